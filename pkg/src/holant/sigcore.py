"""Signatures as dense tensors, local maps, and the basic tensor algebra.

Coefficient order: idx(x) = sum_j x_j * 2**(n-j), so wire 1 is the most
significant bit.  Reshaping coeffs to (2,)*n in C order puts wire j on
axis j-1, which is what every routine below relies on.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ArityError, BackendMismatch, GridError, ZeroSignatureError
from .scalars import EXACT, Backend, GaussQ, format_scalar

MAX_ARITY = 12


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Signature:
    coeffs: np.ndarray
    backend: Backend = EXACT

    def __post_init__(self):
        c = np.asarray(self.coeffs).reshape(-1)
        size = c.size
        n = size.bit_length() - 1
        if size == 0 or (1 << n) != size:
            raise ArityError(f"coefficient count {size} is not a power of two")
        if n > MAX_ARITY:
            raise ArityError(f"arity {n} exceeds cap {MAX_ARITY}")
        object.__setattr__(self, "coeffs", _freeze(self.backend.convert(c)))

    @classmethod
    def from_values(cls, values: Iterable, backend: Backend = EXACT) -> "Signature":
        return cls(backend.array(list(values)), backend)

    @classmethod
    def from_tensor(cls, tensor: np.ndarray, backend: Backend = EXACT) -> "Signature":
        return cls(np.asarray(tensor).reshape(-1), backend)

    @property
    def arity(self) -> int:
        return self.coeffs.size.bit_length() - 1

    @property
    def tensor(self) -> np.ndarray:
        return self.coeffs.reshape((2,) * self.arity)

    def __getitem__(self, x):
        if isinstance(x, (tuple, list, str)):
            bits = [int(b) for b in x]
            if len(bits) != self.arity:
                raise ArityError("bit string length does not match arity")
            x = int("".join(map(str, bits)) or "0", 2)
        return self.coeffs[x]

    def __len__(self):
        return self.coeffs.size

    def __iter__(self):
        return iter(self.coeffs.tolist())

    def __eq__(self, other):
        if not isinstance(other, Signature):
            return NotImplemented
        if other.backend.name != self.backend.name or other.arity != self.arity:
            return False
        if self.backend.exact:
            return all(a == b for a, b in zip(self.coeffs, other.coeffs))
        return bool(np.array_equal(self.coeffs, other.coeffs))

    def __hash__(self):
        if self.backend.exact:
            return hash(tuple(self.coeffs.tolist()))
        return hash(self.coeffs.tobytes())

    def close(self, other: "Signature") -> bool:
        """Equality under the backend's comparison (exact or within eps)."""
        self.backend.check(other.backend)
        return other.arity == self.arity and self.backend.allclose(self.coeffs, other.coeffs)

    def is_zero(self) -> bool:
        return not self.backend.support(self.coeffs).any()

    def scaled(self, lam) -> "Signature":
        lam = self.backend.scalar(lam)
        return Signature(self.coeffs * lam, self.backend)

    def with_backend(self, backend: Backend) -> "Signature":
        """Explicit conversion; exact to float is lossy and float to exact rationalizes."""
        if backend.exact == self.backend.exact:
            return Signature(self.coeffs, backend)
        if backend.exact:
            return Signature(np.array([GaussQ.coerce(complex(z)) for z in self.coeffs], dtype=object), backend)
        return Signature(np.array([complex(z) for z in self.coeffs], dtype=np.complex128), backend)

    def to_strings(self) -> list[str]:
        return [format_scalar(z) for z in self.coeffs]

    def __repr__(self):
        sym = to_symmetric(self)
        if sym is not None:
            body = "[" + ",".join(format_scalar(z) for z in sym.values) + "]"
        else:
            body = "(" + ",".join(self.to_strings()) + ")"
        return f"Signature{body}"

    def require_nonzero(self) -> None:
        if self.is_zero():
            raise ZeroSignatureError("operation undefined on the zero signature")


@dataclass(frozen=True)
class SymmetricSignature:
    values: tuple

    @property
    def arity(self) -> int:
        return len(self.values) - 1

    def __getitem__(self, k):
        return self.values[k]


def _weights(n: int) -> np.ndarray:
    idx = np.arange(1 << n)
    w = np.zeros(1 << n, dtype=np.int64)
    for j in range(n):
        w += (idx >> j) & 1
    return w


def from_symmetric(values, backend: Backend = EXACT) -> Signature:
    if isinstance(values, SymmetricSignature):
        values = values.values
    vals = backend.array(list(values))
    n = len(vals) - 1
    if n < 0:
        raise ArityError("symmetric signature needs at least one value")
    if n > MAX_ARITY:
        raise ArityError(f"arity {n} exceeds cap {MAX_ARITY}")
    return Signature(vals[_weights(n)], backend)


def to_symmetric(f: Signature) -> SymmetricSignature | None:
    n = f.arity
    w = _weights(n)
    vals = []
    for k in range(n + 1):
        bucket = f.coeffs[w == k]
        ref = bucket[0]
        if not all(f.backend.eq(z, ref) for z in bucket[1:]):
            return None
        vals.append(ref)
    return SymmetricSignature(tuple(vals))


def tensor(f: Signature, g: Signature) -> Signature:
    f.backend.check(g.backend)
    if f.arity + g.arity > MAX_ARITY:
        raise ArityError(f"tensor arity {f.arity + g.arity} exceeds cap {MAX_ARITY}")
    return Signature(np.outer(f.coeffs, g.coeffs).reshape(-1), f.backend)


def tensor_all(sigs: Sequence[Signature], backend: Backend | None = None) -> Signature:
    sigs = list(sigs)
    if backend is None:
        backend = sigs[0].backend if sigs else EXACT
    out = Signature(backend.array([1]), backend)
    for s in sigs:
        out = tensor(out, s)
    return out


# --- local maps -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LocalMap:
    matrix: np.ndarray
    backend: Backend = EXACT

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.shape != (2, 2):
            raise ValueError("a local map is a 2x2 matrix")
        object.__setattr__(self, "matrix", _freeze(self.backend.convert(m)))

    @classmethod
    def of(cls, rows, backend: Backend = EXACT) -> "LocalMap":
        return cls(backend.array([list(r) for r in rows], (2, 2)), backend)

    def __getitem__(self, ij):
        return self.matrix[ij]

    @property
    def det(self):
        m = self.matrix
        return m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]

    @property
    def invertible(self) -> bool:
        return not self.backend.is_zero(self.det) if not self.backend.exact else bool(self.det)

    @property
    def T(self) -> "LocalMap":
        return LocalMap(self.matrix.T, self.backend)

    def inverse(self) -> "LocalMap":
        d = self.det
        if not self.invertible:
            raise ValueError("singular local map")
        m = self.matrix
        adj = np.empty((2, 2), dtype=m.dtype)
        adj[0, 0], adj[0, 1], adj[1, 0], adj[1, 1] = m[1, 1], -m[0, 1], -m[1, 0], m[0, 0]
        if self.backend.exact:
            inv_d = GaussQ.coerce(d).inverse()
            return LocalMap(adj * inv_d, self.backend)
        return LocalMap(adj / d, self.backend)

    def __matmul__(self, other: "LocalMap") -> "LocalMap":
        self.backend.check(other.backend)
        return LocalMap(_matmul2(self.matrix, other.matrix), self.backend)

    def scaled(self, lam) -> "LocalMap":
        return LocalMap(self.matrix * self.backend.scalar(lam), self.backend)

    def close(self, other: "LocalMap") -> bool:
        return self.backend.allclose(self.matrix, other.matrix)

    def __eq__(self, other):
        if not isinstance(other, LocalMap):
            return NotImplemented
        return self.backend.name == other.backend.name and self.backend.allclose(self.matrix, other.matrix)

    __hash__ = None

    def apply_vec(self, v):
        m = self.matrix
        return (m[0, 0] * v[0] + m[0, 1] * v[1], m[1, 0] * v[0] + m[1, 1] * v[1])

    def with_backend(self, backend: Backend) -> "LocalMap":
        if backend.exact == self.backend.exact:
            return LocalMap(self.matrix, backend)
        if backend.exact:
            return LocalMap(np.array([[GaussQ.coerce(complex(z)) for z in r] for r in self.matrix], dtype=object), backend)
        return LocalMap(self.matrix.astype(np.complex128), backend)

    def to_strings(self) -> list[list[str]]:
        return [[format_scalar(z) for z in row] for row in self.matrix]

    def __repr__(self):
        return f"LocalMap({self.to_strings()})"


def _matmul2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.empty((2, 2), dtype=a.dtype)
    for r in range(2):
        for c in range(2):
            out[r, c] = a[r, 0] * b[0, c] + a[r, 1] * b[1, c]
    return out


def constants(backend: Backend = EXACT) -> dict[str, LocalMap]:
    i = backend.i
    one = backend.one
    zero = backend.zero
    mk = lambda rows: LocalMap(backend.array(rows, (2, 2)), backend)  # noqa: E731
    return {
        "I": mk([[one, zero], [zero, one]]),
        "X": mk([[zero, one], [one, zero]]),
        "H": mk([[one, one], [one, -one]]),
        "K": mk([[one, one], [i, -i]]),
        "KX": mk([[one, one], [-i, i]]),
    }


def _apply_axis(t: np.ndarray, m: np.ndarray, axis: int) -> np.ndarray:
    # out[..., a, ...] = sum_b m[a, b] t[..., b, ...]
    t0 = np.take(t, 0, axis=axis)
    t1 = np.take(t, 1, axis=axis)
    r0 = t0 * m[0, 0] + t1 * m[0, 1]
    r1 = t0 * m[1, 0] + t1 * m[1, 1]
    return np.stack([r0, r1], axis=axis)


def apply_local(maps, f: Signature) -> Signature:
    """Apply per-wire 2x2 maps to f.

    ``maps`` is either one LocalMap used on every wire or a list of
    (wire, LocalMap) pairs with 1-based wires.
    """
    n = f.arity
    if isinstance(maps, LocalMap):
        pairs = [(w, maps) for w in range(1, n + 1)]
    else:
        pairs = list(maps)
    t = f.tensor
    for wire, m in pairs:
        f.backend.check(m.backend)
        if not 1 <= wire <= n:
            raise ArityError(f"wire {wire} out of range 1..{n}")
        t = _apply_axis(t, m.matrix, wire - 1)
    return Signature(t.reshape(-1), f.backend)


def project(f: Signature, wire: int, covector) -> Signature:
    """Contract wire (1-based) of f with a covector (c0, c1); arity drops by one."""
    n = f.arity
    if not 1 <= wire <= n:
        raise ArityError(f"wire {wire} out of range 1..{n}")
    c0, c1 = (f.backend.scalar(c) for c in covector)
    t = f.tensor
    out = np.take(t, 0, axis=wire - 1) * c0 + np.take(t, 1, axis=wire - 1) * c1
    return Signature(np.asarray(out).reshape(-1), f.backend)


def pin(f: Signature, wire: int, bit: int) -> Signature:
    return project(f, wire, (1, 0) if bit == 0 else (0, 1))


def permute_wires(f: Signature, order: Sequence[int]) -> Signature:
    """New wire k is old wire order[k] (both 1-based)."""
    axes = [w - 1 for w in order]
    return Signature(np.transpose(f.tensor, axes).reshape(-1), f.backend)


# --- proportionality and factorization -------------------------------------

def _pivot(f: Signature) -> int | None:
    sup = f.backend.support(f.coeffs)
    if not sup.any():
        return None
    if f.backend.exact:
        return int(np.argmax(sup))
    return int(np.argmax(np.abs(f.coeffs)))


def proportional(f: Signature, g: Signature):
    """Return lam != 0 with f = lam * g, or None."""
    f.backend.check(g.backend)
    if f.arity != g.arity:
        return None
    pf, pg = _pivot(f), _pivot(g)
    if pf is None and pg is None:
        return f.backend.one
    if pf is None or pg is None:
        return None
    lam = f.coeffs[pg] / g.coeffs[pg]
    if f.backend.is_zero(lam) if not f.backend.exact else not lam:
        return None
    if not f.backend.allclose(f.coeffs, g.coeffs * lam):
        return None
    return lam


def normalize(f: Signature):
    """Split f = scale * f' with a canonical pivot entry of f' equal to 1."""
    p = _pivot(f)
    if p is None:
        raise ZeroSignatureError("cannot normalize the zero signature")
    lam = f.coeffs[p]
    inv = GaussQ.coerce(lam).inverse() if f.backend.exact else 1 / lam
    return lam, Signature(f.coeffs * inv, f.backend)


def _flatten(t: np.ndarray, rows: Sequence[int]) -> np.ndarray:
    k = t.ndim
    cols = [a for a in range(k) if a not in rows]
    return np.transpose(t, list(rows) + cols).reshape(1 << len(rows), 1 << len(cols))


def _rank_one(mat: np.ndarray, backend: Backend) -> bool:
    if backend.exact:
        sup = backend.support(mat)
        r, c = np.unravel_index(int(np.argmax(sup)), mat.shape)
        p = mat[r, c]
        return bool(np.all(mat * p == np.outer(mat[:, c], mat[r, :])))
    s = np.linalg.svd(mat.astype(np.complex128), compute_uv=False)
    return len(s) < 2 or s[1] <= backend.eps * s[0]


@dataclass(frozen=True)
class Factorization:
    scalar: object
    factors: tuple  # of (Signature, tuple of 1-based wires)
    arity: int

    def __iter__(self):
        return iter(self.factors)

    def __len__(self):
        return len(self.factors)

    def reassemble(self, backend: Backend) -> Signature:
        """Tensor the factors back together in wire order, times the scalar."""
        letters = []
        pieces = []
        for sig, wires in self.factors:
            pieces.append(sig.tensor)
            letters.append(wires)
        t = np.asarray(self.scalar, dtype=backend.dtype).reshape(())
        order: list[int] = []
        for piece, wires in zip(pieces, letters):
            t = np.multiply.outer(t, piece)
            order.extend(wires)
        perm = np.argsort(order)
        t = np.transpose(t, perm) if order else t
        return Signature(np.asarray(t).reshape(-1), backend)


def connected_factors(f: Signature) -> Factorization:
    """Split f into tensor factors that do not split further.

    Minimal separable wire subsets are peeled off in order of size; a
    subset S separates iff the S-vs-rest flattening has rank one.
    """
    f.require_nonzero()
    be = f.backend
    n = f.arity
    remaining = list(range(n))
    cur = f.tensor
    scalar = be.one
    factors = []
    start = 1
    while len(remaining) > 1:
        found = None
        k = len(remaining)
        for size in range(start, k // 2 + 1):
            for sub in itertools.combinations(range(k), size):
                mat = _flatten(cur, sub)
                if _rank_one(mat, be):
                    found = (sub, mat)
                    break
            if found:
                break
        if not found:
            break
        sub, mat = found
        sup = be.support(mat)
        if be.exact:
            r, c = np.unravel_index(int(np.argmax(sup)), mat.shape)
        else:
            r, c = np.unravel_index(int(np.argmax(np.abs(mat))), mat.shape)
        piv = mat[r, c]
        left = mat[:, c]
        right = mat[r, :] * (GaussQ.coerce(piv).inverse() if be.exact else 1 / piv)
        lam, part = normalize(Signature(left, be))
        scalar = scalar * lam
        factors.append((part, tuple(remaining[a] + 1 for a in sub)))
        rest = [a for a in range(k) if a not in sub]
        remaining = [remaining[a] for a in rest]
        cur = np.asarray(right).reshape((2,) * len(rest))
        start = size
    if remaining:
        lam, part = normalize(Signature(np.asarray(cur).reshape(-1), be))
        scalar = scalar * lam
        factors.append((part, tuple(w + 1 for w in remaining)))
    elif n == 0:
        scalar = scalar * f.coeffs[0]
    factors.sort(key=lambda fw: fw[1][0] if fw[1] else -1)
    return Factorization(scalar, tuple(factors), n)


def is_degenerate(f: Signature) -> bool:
    if f.is_zero():
        return True
    return all(len(w) <= 1 for _, w in connected_factors(f))


def named_state(kind: str, n: int = 1, backend: Backend = EXACT) -> Signature:
    kind_u = kind.upper()
    pins = {
        "DELTA0": (1, 0), "ZERO": (1, 0),
        "DELTA1": (0, 1), "ONE": (0, 1),
        "PLUS": (1, 1),
        "MINUS": (1, -1), "PINM": (1, -1),
    }
    if kind_u in pins:
        if n != 1:
            raise ArityError(f"{kind} is unary")
        return Signature.from_values(pins[kind_u], backend)
    if n < 1:
        raise ArityError(f"{kind} needs n >= 1")
    if kind_u in ("GHZ", "EQ"):
        return from_symmetric([1] + [0] * (n - 1) + [1] if n > 1 else [1, 1], backend)
    if kind_u == "W":
        return from_symmetric([0, 1] + [0] * (n - 1), backend)
    raise ValueError(f"unknown named state {kind!r}")


def unary(a, b, backend: Backend = EXACT) -> Signature:
    return Signature.from_values([a, b], backend)


def parse_signature_literal(obj, backend: Backend = EXACT) -> Signature:
    """Build a signature from the grid-file object form."""
    if "symmetric" in obj:
        return from_symmetric([backend.parse(str(s)) for s in obj["symmetric"]], backend)
    if "coeffs" not in obj:
        raise GridError("signature needs 'symmetric' or 'coeffs'")
    coeffs = [backend.parse(str(s)) for s in obj["coeffs"]]
    sig = Signature(backend.array(coeffs), backend)
    if "arity" in obj and int(obj["arity"]) != sig.arity:
        raise ArityError(f"declared arity {obj['arity']} but {len(coeffs)} coefficients")
    return sig


def signature_literal(f: Signature, prefer_symmetric: bool = True) -> dict:
    if prefer_symmetric:
        sym = to_symmetric(f)
        if sym is not None and f.backend.exact:
            return {"symmetric": [format_scalar(z) for z in sym.values]}
    return {"arity": f.arity, "coeffs": f.to_strings()}


def same_backend(*objs) -> Backend:
    be = None
    for o in objs:
        if be is None:
            be = o.backend
        elif o.backend.name != be.name:
            raise BackendMismatch(f"cannot mix {be.name} and {o.backend.name} backends")
    return be or EXACT
