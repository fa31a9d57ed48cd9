"""Entanglement tests: two- and three-qubit classification and projection searches."""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ArityError, TheoremViolation, ZeroSignatureError
from .scalars import Backend, GaussQ
from .sigcore import LocalMap, Signature, connected_factors, project


def _scale(f: Signature) -> float:
    return float(np.max(np.abs(f.coeffs.astype(complex)))) if f.coeffs.size else 0.0


def _nonzero(be: Backend, x, scale: float = 1.0) -> bool:
    if be.exact:
        return bool(x)
    return abs(complex(x)) > be.eps * max(1.0, scale)


def _differ(be: Backend, a, b) -> bool:
    return not be.eq(a, b)


def is_entangled2(f: Signature) -> bool:
    if f.arity != 2:
        raise ArityError("is_entangled2 takes a binary signature")
    f.require_nonzero()
    a, b, c, d = f.coeffs
    return _nonzero(f.backend, a * d - b * c, _scale(f) ** 2)


@dataclass(frozen=True)
class EntClass3:
    tag: str  # GHZ, W, Biseparable, FullyProduct, Zero
    split: str | None = None  # e.g. '1|23' for Biseparable

    def __str__(self):
        return f"{self.tag}({self.split})" if self.split else self.tag


def ghz_invariant(f: Signature):
    """Returns (P, Q, R) with the GHZ test being P^2 - 4QR != 0."""
    a = f.coeffs
    P = a[0] * a[7] - a[2] * a[5] + a[1] * a[6] - a[3] * a[4]
    Q = a[2] * a[4] - a[0] * a[6]
    R = a[3] * a[5] - a[1] * a[7]
    return P, Q, R


def ghz_criterion(f: Signature) -> bool:
    P, Q, R = ghz_invariant(f)
    be = f.backend
    if be.exact:
        return bool(P * P - 4 * Q * R)
    s = _scale(f)
    lhs, rhs = complex(P * P), complex(4 * Q * R)
    return abs(lhs - rhs) > be.eps * max(1.0, s ** 4, abs(lhs), abs(rhs))


def w_criterion(f: Signature) -> bool:
    a = f.coeffs
    be = f.backend
    if be.exact:
        ne = lambda x, y: x != y  # noqa: E731
    else:
        s2 = _scale(f) ** 2
        ne = lambda x, y: abs(complex(x) - complex(y)) > be.eps * max(1.0, s2)  # noqa: E731
    c1 = ne(a[0] * a[3], a[1] * a[2]) or ne(a[5] * a[6], a[4] * a[7])
    c2 = ne(a[1] * a[4], a[0] * a[5]) or ne(a[3] * a[6], a[2] * a[7])
    c3 = ne(a[3] * a[5], a[1] * a[7]) or ne(a[2] * a[4], a[0] * a[6])
    return c1 and c2 and c3


def classify3(f: Signature) -> EntClass3:
    if f.arity != 3:
        raise ArityError("classify3 takes a ternary signature")
    if f.is_zero():
        return EntClass3("Zero")
    if ghz_criterion(f):
        return EntClass3("GHZ")
    if w_criterion(f):
        return EntClass3("W")
    fac = connected_factors(f)
    sizes = [len(w) for _, w in fac]
    if max(sizes) == 1:
        return EntClass3("FullyProduct")
    if max(sizes) == 2:
        single = next(w[0] for _, w in fac if len(w) == 1)
        pair = next(w for _, w in fac if len(w) == 2)
        return EntClass3("Biseparable", f"{single}|{pair[0]}{pair[1]}")
    # only reachable on floats right at the edge of the criteria
    return EntClass3("W")


def is_genuinely_entangled(f: Signature) -> bool:
    if f.is_zero():
        raise ZeroSignatureError("zero signature has no entanglement structure")
    if f.arity < 2:
        return False
    fac = connected_factors(f)
    return len(fac) == 1


class ProjectorBasis(enum.Enum):
    Zero = 0
    One = 1
    Plus = 2
    Minus = 3

    @property
    def covector(self) -> tuple[int, int]:
        return ((1, 0), (0, 1), (1, 1), (1, -1))[self.value]


@dataclass(frozen=True)
class ProjectionChain:
    """Ordered single-wire projections.

    ``steps`` hold (wire index in the state at that moment, projector);
    ``survivors`` are the original 1-based labels of the remaining wires.
    """

    source_arity: int
    steps: tuple
    survivors: tuple
    residual: Signature
    backtracks: int = 0

    def replay(self, f: Signature) -> Signature:
        g = f
        for wire, kind in self.steps:
            g = project(g, wire, kind.covector)
        return g

    def to_json(self) -> dict:
        return {
            "source_arity": self.source_arity,
            "steps": [[w, k.name] for w, k in self.steps],
            "survivors": list(self.survivors),
            "residual": self.residual.to_strings(),
            "backtracks": self.backtracks,
        }


def _project_many(f: Signature, assignment: dict) -> Signature:
    """Project wires (original labels) in descending order so indices stay valid."""
    g = f
    for w in sorted(assignment, reverse=True):
        g = project(g, w, assignment[w].covector)
    return g


def find_pair_projection(f: Signature, i: int, j: int) -> ProjectionChain:
    """Exhaustive search for projections of the other wires leaving i, j entangled."""
    n = f.arity
    if n < 3:
        raise ArityError("pair projection needs arity >= 3")
    if i == j or not (1 <= i <= n and 1 <= j <= n):
        raise ArityError("need two distinct wires in range")
    f.require_nonzero()
    others = [w for w in range(1, n + 1) if w not in (i, j)]
    for kinds in itertools.product(list(ProjectorBasis), repeat=len(others)):
        assign = dict(zip(others, kinds))
        g = _project_many(f, assign)
        if g.is_zero():
            continue
        if is_entangled2(g):
            steps = tuple((w, assign[w]) for w in sorted(others, reverse=True))
            return ProjectionChain(n, steps, tuple(sorted((i, j))), g)
    raise TheoremViolation(
        f"no product projection leaves wires {i},{j} entangled",
        {"coeffs": f.to_strings(), "pair": [i, j]},
    )


def _first_support_bits(sig: Signature) -> list[int]:
    sup = sig.backend.support(sig.coeffs)
    k = int(np.argmax(sup)) if sig.backend.exact else int(np.argmax(np.abs(sig.coeffs)))
    n = sig.arity
    return [(k >> (n - 1 - t)) & 1 for t in range(n)]


def find_triple_projection(f: Signature, seed: int | None = None) -> ProjectionChain:
    """Project single wires until a genuinely entangled ternary remains.

    Each step must leave a factor on at least three wires; the chain then
    continues inside that factor and pins every other factor to a
    computational basis string where it is nonzero.  Wires are tried from
    the highest label down, projectors in Zero, One, Plus, Minus order,
    with full backtracking.
    """
    n = f.arity
    if n < 3:
        raise ArityError("triple projection needs arity >= 3")
    f.require_nonzero()
    if not is_genuinely_entangled(f):
        raise ArityError("input is not genuinely entangled")
    stats = {"backtracks": 0}

    def search(g: Signature, labels: list, steps: list):
        if g.arity == 3:
            return g, labels, steps
        for w in range(g.arity, 0, -1):
            for kind in ProjectorBasis:
                h = project(g, w, kind.covector)
                if h.is_zero():
                    continue
                hl = labels[: w - 1] + labels[w:]
                fac = connected_factors(h)
                big = [(sig, ws) for sig, ws in fac if len(ws) >= 3]
                if not big:
                    continue
                big.sort(key=lambda t: (-len(t[1]), t[1]))
                keep_sig, keep = big[0]
                new_steps = steps + [(w, kind)]
                # pin the other factors, highest current wire first
                pins = []
                for sig, ws in fac:
                    if ws == keep:
                        continue
                    bits = _first_support_bits(sig)
                    pins.extend(zip(ws, bits))
                cur = h
                cur_labels = hl
                for wire, bit in sorted(pins, reverse=True):
                    kb = ProjectorBasis.Zero if bit == 0 else ProjectorBasis.One
                    cur = project(cur, wire, kb.covector)
                    cur_labels = cur_labels[: wire - 1] + cur_labels[wire:]
                    new_steps.append((wire, kb))
                res = search(cur, cur_labels, new_steps)
                if res is not None:
                    return res
                stats["backtracks"] += 1
        return None

    out = search(f, list(range(1, n + 1)), [])
    if out is None:
        raise TheoremViolation(
            "no projection chain reaches a genuinely entangled ternary",
            {"coeffs": f.to_strings(), "seed": seed},
        )
    g, labels, steps = out
    chain = ProjectionChain(n, tuple(steps), tuple(labels), g, stats["backtracks"])
    if not is_genuinely_entangled(chain.residual):
        raise TheoremViolation("residual is not genuinely entangled", {"coeffs": f.to_strings()})
    return chain


# --- two-term (GHZ-type) decompositions ------------------------------------

def _eig2(N: np.ndarray, be: Backend):
    """Two independent eigenvectors of a 2x2 matrix, or None if not diagonalizable
    with distinct eigenvalues.  Raises InexactError when the exact eigenvalues
    leave Q[i]."""
    tr = N[0, 0] + N[1, 1]
    det = N[0, 0] * N[1, 1] - N[0, 1] * N[1, 0]
    disc = tr * tr - 4 * det
    if be.exact:
        if not disc:
            return None
    else:
        scale = max(1.0, abs(complex(tr)) ** 2)
        if abs(complex(disc)) <= 1e-7 * scale:
            return None
    r = be.sqrt(disc)
    half = GaussQ(1, 0) / 2 if be.exact else 0.5
    vecs = []
    for lam in ((tr + r) * half, (tr - r) * half):
        a = N[0, 1]
        b = lam - N[0, 0]
        c = lam - N[1, 1]
        d = N[1, 0]
        if be.exact:
            if a or b:
                v = (a, b)
            elif c or d:
                v = (c, d)
            else:
                return None
        else:
            n1 = abs(complex(a)) + abs(complex(b))
            n2 = abs(complex(c)) + abs(complex(d))
            v = (a, b) if n1 >= n2 else (c, d)
            if max(n1, n2) == 0:
                return None
        vecs.append(v)
    return vecs


def _contract_rest(t: np.ndarray, covs: list) -> np.ndarray:
    """Contract axes 2.. of t with the given covectors, leaving a 2x2 matrix."""
    m = t
    for c in reversed(covs):
        m = np.tensordot(m, np.asarray(c, dtype=m.dtype), axes=([m.ndim - 1], [0]))
    return m


def pencil_basis(f: Signature, rng: np.random.Generator, retries: int = 8):
    """Candidate wire-1 vectors (u, v) if f = u⊗a + v⊗b for some a, b.

    Contracts wires 3.. with two random product covectors to get a pencil of
    2x2 matrices whose eigenvectors give u and v.
    """
    be = f.backend
    n = f.arity
    t = f.tensor
    for _ in range(retries):
        covs = []
        for _k in range(2):
            cs = []
            for _w in range(n - 2):
                a, b = (int(x) for x in rng.integers(-9, 10, size=2))
                if a == 0 and b == 0:
                    a = 1
                cs.append(be.array([a, b]))
            covs.append(cs)
        F1 = _contract_rest(t, covs[0])
        F2 = _contract_rest(t, covs[1])
        d2 = F2[0, 0] * F2[1, 1] - F2[0, 1] * F2[1, 0]
        if be.is_zero(d2) if not be.exact else not d2:
            continue
        adj = np.empty((2, 2), dtype=F2.dtype)
        adj[0, 0], adj[0, 1], adj[1, 0], adj[1, 1] = F2[1, 1], -F2[0, 1], -F2[1, 0], F2[0, 0]
        N = np.empty((2, 2), dtype=F1.dtype)
        for r in range(2):
            for c in range(2):
                N[r, c] = F1[r, 0] * adj[0, c] + F1[r, 1] * adj[1, c]
        vecs = _eig2(N, be)
        if vecs is None:
            continue
        return vecs
    return None


def ghz_decomposition(psi: Signature, rng: np.random.Generator | None = None):
    """Find A, B, C with psi = (A⊗B⊗C)(|000>+|111>), or None.

    Raises InexactError on the exact backend if the factors leave Q[i].
    """
    if psi.arity != 3:
        raise ArityError("ghz_decomposition takes a ternary signature")
    be = psi.backend
    rng = rng or np.random.default_rng(0)
    vecs = pencil_basis(psi, rng)
    if vecs is None:
        return None
    (u0, u1), (v0, v1) = vecs
    U = LocalMap(be.array([[u0, v0], [u1, v1]], (2, 2)), be)
    if not U.invertible:
        return None
    Uinv = U.inverse().matrix
    t = psi.tensor
    t2 = np.tensordot(Uinv, t, axes=([1], [0]))
    cols_b, cols_c = [], []
    for r in range(2):
        m = t2[r]
        flat = m.reshape(-1)
        sup = be.support(flat)
        if not sup.any():
            return None
        k = int(np.argmax(sup)) if be.exact else int(np.argmax(np.abs(flat.astype(complex))))
        pr, pc = divmod(k, 2)
        piv = m[pr, pc]
        inv = GaussQ.coerce(piv).inverse() if be.exact else 1 / piv
        cols_b.append((m[0, pc], m[1, pc]))
        cols_c.append((m[pr, 0] * inv, m[pr, 1] * inv))
    B = LocalMap(be.array([[cols_b[0][0], cols_b[1][0]], [cols_b[0][1], cols_b[1][1]]], (2, 2)), be)
    C = LocalMap(be.array([[cols_c[0][0], cols_c[1][0]], [cols_c[0][1], cols_c[1][1]]], (2, 2)), be)
    from .sigcore import apply_local, named_state

    rebuilt = apply_local([(1, U), (2, B), (3, C)], named_state("GHZ", 3, be))
    if not rebuilt.close(psi):
        return None
    return U, B, C
