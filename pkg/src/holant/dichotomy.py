"""Tractable-family membership tests and the Holant*, #CSP and Holant+ classifiers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .entclass import pencil_basis
from .errors import InexactError, ZeroSignatureError
from .scalars import Backend, GaussQ, format_scalar
from .sigcore import LocalMap, Signature, apply_local, connected_factors, constants


def _check_nonzero(F: Iterable[Signature]) -> list[Signature]:
    F = list(F)
    for f in F:
        if f.is_zero():
            raise ZeroSignatureError("signature sets must not contain the zero signature")
    return F


def _support_indices(f: Signature) -> np.ndarray:
    return np.nonzero(f.backend.support(f.coeffs))[0]


def in_family(f: Signature, family: str) -> bool:
    """E: support inside {x, x̄}; M: support of Hamming weight at most one."""
    f.require_nonzero()
    sup = _support_indices(f)
    n = f.arity
    if family == "E":
        full = (1 << n) - 1
        s = int(sup[0])
        return all(int(x) in (s, s ^ full) for x in sup)
    if family == "M":
        return all(bin(int(x)).count("1") <= 1 for x in sup)
    raise ValueError(f"unknown family {family!r}")


_FRAMES = {"KE": ("K", "E"), "KXE": ("KX", "E"), "KM": ("K", "M"), "KXM": ("KX", "M")}


def frame_inverse(frame: str, be: Backend) -> LocalMap:
    return constants(be)[frame].inverse()


def factor_in(sig: Signature, base: str, L: LocalMap | None = None) -> bool:
    """Membership test for one irreducible factor."""
    be = sig.backend
    if base == "T":
        return sig.arity <= 2
    if base in ("E", "M"):
        return in_family(sig, base)
    if base in _FRAMES:
        frame, fam = _FRAMES[base]
        return in_family(apply_local(frame_inverse(frame, be), sig), fam)
    if base == "Eform":
        if L is None:
            raise ValueError("Eform needs a local map")
        return in_family(apply_local(L, sig), "E")
    raise ValueError(f"unknown base {base!r}")


def in_closure(F: Iterable[Signature], base: str, L: LocalMap | None = None) -> bool:
    """Every connected factor of every f in F passes the base test.

    For base 'Eform' the map L is applied to every wire before the E test.
    """
    for f in _check_nonzero(F):
        for sig, _wires in connected_factors(f):
            if not factor_in(sig, base, L):
                return False
    return True


def all_factors(F: Iterable[Signature]) -> list[Signature]:
    out = []
    for f in F:
        out.extend(sig for sig, _ in connected_factors(f))
    return out


@dataclass(frozen=True)
class CommonBasis:
    L: LocalMap
    klass: str  # 'orthogonal' or 'Ktype'
    exact: bool = True  # False when the search had to drop to floating point


def _bilinear(u, v):
    return u[0] * v[0] + u[1] * v[1]


def find_common_local_basis(F: Iterable[Signature], seed: int = 0) -> CommonBasis | None:
    """Look for L with every factor of F in L∘E, where L is orthogonal up to
    column scaling or has isotropic columns.

    Candidate columns come from the pencil of the first factor of arity at
    least three; the result is re-checked against all of F.
    """
    F = _check_nonzero(F)
    factors = all_factors(F)
    big = [h for h in factors if h.arity >= 3]
    if not big:
        return None
    be = big[0].backend
    rng = np.random.default_rng(seed)
    exact = True
    try:
        vecs = pencil_basis(big[0], rng)
    except InexactError:
        vecs = None
        exact = False
    if not exact:
        from .scalars import FLOAT

        fb = FLOAT if be.exact else be
        ffl = [f.with_backend(fb) for f in F]
        res = find_common_local_basis(ffl, seed)
        if res is None:
            return None
        return CommonBasis(res.L, res.klass, False)
    if vecs is None:
        return None
    u, v = vecs
    L = LocalMap(be.array([[u[0], v[0]], [u[1], v[1]]], (2, 2)), be)
    if not L.invertible:
        return None
    uu, vv, uv = _bilinear(u, u), _bilinear(v, v), _bilinear(u, v)
    if be.is_zero(uv) and not be.is_zero(uu) and not be.is_zero(vv):
        klass = "orthogonal"
    elif be.is_zero(uu) and be.is_zero(vv) and not be.is_zero(uv):
        klass = "Ktype"
    else:
        return None
    if not in_closure(F, "Eform", L.inverse()):
        return None
    if klass == "orthogonal":
        L = _normalize_columns(L)
    return CommonBasis(L, klass, exact)


def _normalize_columns(L: LocalMap) -> LocalMap:
    """Scale columns to unit bilinear norm when the square roots exist."""
    be = L.backend
    m = L.matrix
    cols = []
    for c in range(2):
        u = (m[0, c], m[1, c])
        try:
            s = be.sqrt(_bilinear(u, u))
        except InexactError:
            return L
        inv = GaussQ.coerce(s).inverse() if be.exact else 1 / s
        u = (u[0] * inv, u[1] * inv)
        # sign convention: first nonzero entry has positive real part (else positive imaginary)
        lead = complex(u[0]) if not be.is_zero(u[0]) else complex(u[1])
        if lead.real < 0 or (abs(lead.real) <= be.eps and lead.imag < 0):
            u = (-u[0], -u[1])
        cols.append(u)
    return LocalMap(be.array([[cols[0][0], cols[1][0]], [cols[0][1], cols[1][1]]], (2, 2)), be)


# --- affine signatures ------------------------------------------------------

@dataclass(frozen=True)
class AffineForm:
    """f(x) = c · i^(l·x) · (-1)^(sum_{j<k} q_jk x_j x_k) · [A x = b]."""

    c: object
    l: tuple  # Z4 entries
    q: tuple  # n x n 0/1, strictly upper triangular
    A: tuple  # m x n 0/1
    b: tuple  # m 0/1
    n: int

    def exponent(self, x: Sequence[int]) -> int:
        e = sum(lj * xj for lj, xj in zip(self.l, x))
        for j in range(self.n):
            if not x[j]:
                continue
            for k in range(j + 1, self.n):
                if self.q[j][k] and x[k]:
                    e += 2
        return e % 4

    def in_support(self, x) -> bool:
        for row, bb in zip(self.A, self.b):
            if sum(a * xx for a, xx in zip(row, x)) % 2 != bb:
                return False
        return True

    def evaluate(self, be: Backend) -> Signature:
        vals = []
        for idx in range(1 << self.n):
            x = [(idx >> (self.n - 1 - j)) & 1 for j in range(self.n)]
            if not self.in_support(x):
                vals.append(be.zero)
                continue
            vals.append(self.c * (be.one, be.i, -be.one, -be.i)[self.exponent(x)])
        return Signature(be.array(vals), be)

    def to_json(self) -> dict:
        return {
            "c": format_scalar(self.c),
            "l": list(self.l),
            "q": [list(r) for r in self.q],
            "A": [list(r) for r in self.A],
            "b": list(self.b),
        }


def _gf2_rref(vectors: list[int], n: int):
    """Reduced row echelon basis over GF(2); vectors as ints with bit n-1-j = coordinate j."""
    basis: list[int] = []
    pivots: list[int] = []
    for v in vectors:
        for b, p in zip(basis, pivots):
            if (v >> (n - 1 - p)) & 1:
                v ^= b
        if v:
            p = next(j for j in range(n) if (v >> (n - 1 - j)) & 1)
            for k in range(len(basis)):
                if (basis[k] >> (n - 1 - p)) & 1:
                    basis[k] ^= v
            basis.append(v)
            pivots.append(p)
    order = sorted(range(len(basis)), key=lambda k: pivots[k])
    return [basis[k] for k in order], [pivots[k] for k in order]


def _parity_checks(basis: list[int], pivots: list[int], n: int) -> list[int]:
    """Rows h with h·b = 0 for every basis vector; one per non-pivot column."""
    rows = []
    free = [j for j in range(n) if j not in pivots]
    for j in free:
        h = 1 << (n - 1 - j)
        for b, p in zip(basis, pivots):
            if (b >> (n - 1 - j)) & 1:
                h |= 1 << (n - 1 - p)
        rows.append(h)
    return rows


def _power_of_i(be: Backend, r) -> int | None:
    if be.exact:
        z = GaussQ.coerce(r)
        for k, w in enumerate((GaussQ(1), GaussQ(0, 1), GaussQ(-1), GaussQ(0, -1))):
            if z == w:
                return k
        return None
    z = complex(r)
    for k, w in enumerate((1, 1j, -1, -1j)):
        if abs(z - w) <= be.eps * 10:
            return k
    return None


def is_affine(f: Signature) -> AffineForm | None:
    f.require_nonzero()
    be = f.backend
    n = f.arity
    sup = [int(x) for x in _support_indices(f)]
    s0 = sup[0]
    basis, pivots = _gf2_rref([s ^ s0 for s in sup], n)
    if (1 << len(basis)) != len(sup):
        return None
    # shift the base point so it is zero on every pivot column
    for b, p in zip(basis, pivots):
        if (s0 >> (n - 1 - p)) & 1:
            s0 ^= b
    c = f.coeffs[s0]
    inv_c = GaussQ.coerce(c).inverse() if be.exact else 1 / c
    expo = {}
    for s in sup:
        k = _power_of_i(be, f.coeffs[s] * inv_c)
        if k is None:
            return None
        expo[s] = k
    r = len(basis)
    lam = [expo[s0 ^ b] for b in basis]
    mu = [[0] * r for _ in range(r)]
    for a in range(r):
        for d in range(a + 1, r):
            resid = (expo[s0 ^ basis[a] ^ basis[d]] - lam[a] - lam[d]) % 4
            if resid % 2:
                return None
            mu[a][d] = resid // 2
    l = [0] * n
    q = [[0] * n for _ in range(n)]
    for a, p in enumerate(pivots):
        l[p] = lam[a]
    for a in range(r):
        for d in range(a + 1, r):
            if mu[a][d]:
                j, k = sorted((pivots[a], pivots[d]))
                q[j][k] = 1
    checks = _parity_checks(basis, pivots, n)
    A = [[(h >> (n - 1 - j)) & 1 for j in range(n)] for h in checks]
    bvec = [bin(h & s0).count("1") % 2 for h in checks]
    form = AffineForm(c, tuple(l), tuple(tuple(r_) for r_ in q), tuple(tuple(r_) for r_ in A), tuple(bvec), n)
    if not be.allclose(form.evaluate(be).coeffs, f.coeffs):
        return None
    return form


# --- verdicts -----------------------------------------------------------------

@dataclass(frozen=True)
class FamilyTag:
    tag: str  # Tclosure, Eform, KE, KM, KXM, Affine
    L: LocalMap | None = None
    klass: str | None = None

    def to_json(self) -> dict:
        out = {"tag": self.tag}
        if self.L is not None:
            out["L"] = self.L.to_strings()
        if self.klass is not None:
            out["class"] = self.klass
        return out


@dataclass
class ClassVerdict:
    outcome: str  # 'FP' or 'SharpPHard'
    reason: FamilyTag | None = None
    certificate: dict = field(default_factory=dict)
    witness: object = None
    mode: str = "plus"

    @property
    def tractable(self) -> bool:
        return self.outcome == "FP"

    def to_json(self) -> dict:
        out = {"outcome": self.outcome, "mode": self.mode, "certificate": self.certificate}
        if self.reason is not None:
            out["reason"] = self.reason.to_json()
        if self.witness is not None:
            out["witness"] = self.witness.to_json()
        return out


def _star_verdict(F: list[Signature], seed: int) -> ClassVerdict | None:
    if in_closure(F, "T"):
        return ClassVerdict("FP", FamilyTag("Tclosure"), {"max_factor_arity": max((s.arity for s in all_factors(F)), default=0)})
    be = F[0].backend
    if in_closure(F, "E"):
        return ClassVerdict("FP", FamilyTag("Eform", constants(be)["I"], "orthogonal"), {"L": constants(be)["I"].to_strings(), "seed": seed})
    if in_closure(F, "KE"):
        return ClassVerdict("FP", FamilyTag("KE"), {"frame": "K"})
    basis = find_common_local_basis(F, seed)
    if basis is not None:
        cert = {"L": basis.L.to_strings(), "class": basis.klass, "exact": basis.exact, "seed": seed}
        if basis.klass == "orthogonal":
            return ClassVerdict("FP", FamilyTag("Eform", basis.L, "orthogonal"), cert)
        return ClassVerdict("FP", FamilyTag("KE", basis.L, "Ktype"), cert)
    if in_closure(F, "KM"):
        return ClassVerdict("FP", FamilyTag("KM"), {"frame": "K"})
    if in_closure(F, "KXM"):
        return ClassVerdict("FP", FamilyTag("KXM"), {"frame": "KX"})
    return None


def classify_holant_star(F: Iterable[Signature], seed: int = 0) -> ClassVerdict:
    F = _check_nonzero(F)
    v = _star_verdict(F, seed)
    if v is None:
        v = ClassVerdict("SharpPHard", None, {"failed": ["Tclosure", "Eform", "KE", "KM", "KXM"]})
    v.mode = "star"
    return v


def affine_forms(F: Iterable[Signature]) -> list[AffineForm] | None:
    forms = []
    for f in F:
        form = is_affine(f)
        if form is None:
            return None
        forms.append(form)
    return forms


def classify_csp(F: Iterable[Signature]) -> ClassVerdict:
    F = _check_nonzero(F)
    forms = affine_forms(F)
    if forms is not None:
        v = ClassVerdict("FP", FamilyTag("Affine"), {"forms": [a.to_json() for a in forms]})
    elif in_closure(F, "E"):
        v = ClassVerdict("FP", FamilyTag("Eform", constants(F[0].backend)["I"], "orthogonal"), {"L": "I"})
    else:
        v = ClassVerdict("SharpPHard", None, {"failed": ["Affine", "E"]})
    v.mode = "csp"
    return v


def classify_holant_plus(F: Iterable[Signature], seed: int = 0, build_witness: bool = True) -> ClassVerdict:
    F = _check_nonzero(F)
    v = _star_verdict(F, seed)
    if v is None:
        forms = affine_forms(F)
        if forms is not None:
            v = ClassVerdict("FP", FamilyTag("Affine"), {"forms": [a.to_json() for a in forms]})
    if v is None:
        witness = None
        if build_witness:
            from .gadgetry import build_hardness_witness

            witness = build_hardness_witness(F, seed=seed)
        v = ClassVerdict("SharpPHard", None, {"failed": ["Tclosure", "Eform", "KE", "KM", "KXM", "Affine"]}, witness)
    v.mode = "plus"
    return v


def check_fp_certificate(F: Sequence[Signature], v: ClassVerdict) -> bool:
    """Re-verify an FP verdict from its tag alone."""
    if v.outcome != "FP" or v.reason is None:
        return False
    tag = v.reason.tag
    if tag == "Tclosure":
        return in_closure(F, "T")
    if tag == "Affine":
        return affine_forms(F) is not None
    if tag == "Eform":
        L = v.reason.L
        if L is not None and L.backend.name != F[0].backend.name:
            Ff = [f.with_backend(L.backend) for f in F]
            return in_closure(Ff, "Eform", L.inverse())
        return in_closure(F, "Eform", L.inverse())
    if tag == "KE":
        if in_closure(F, "KE"):
            return True
        L = v.reason.L
        if L is not None:
            Ff = F if L.backend.name == F[0].backend.name else [f.with_backend(L.backend) for f in F]
            return in_closure(Ff, "Eform", L.inverse())
        return False
    if tag in ("KM", "KXM"):
        return in_closure(F, tag)
    return False
