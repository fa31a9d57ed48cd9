"""Holographic transformations, complex QR, and omega-normalisation."""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .errors import GridError, HolantError, InexactError
from .gridnet import SignatureGrid
from .scalars import Backend, GaussQ
from .sigcore import LocalMap, SymmetricSignature, apply_local, constants


def transform_bipartite(grid: SignatureGrid, M: LocalMap) -> SignatureGrid:
    """Left signatures become M∘f, right ones (M^-1)^T∘g.

    A signature name used on both sides is split into name@L / name@R.
    """
    if grid.bipartition is None:
        raise GridError("grid carries no bipartition labels")
    grid.backend.check(M.backend)
    if not M.invertible:
        raise HolantError("transform matrix is singular")
    Minv_t = M.inverse().T
    sides: dict[str, set] = {}
    for name, side in zip(grid.vertices, grid.bipartition):
        sides.setdefault(name, set()).add(side)
    sigs = {}
    rename: dict[tuple, str] = {}
    for name, used in sides.items():
        for side in sorted(used):
            new = name if len(used) == 1 else f"{name}@{side}"
            sigs[new] = apply_local(M if side == "L" else Minv_t, grid.signatures[name])
            rename[(name, side)] = new
    verts = tuple(rename[(n, s)] for n, s in zip(grid.vertices, grid.bipartition))
    return SignatureGrid(sigs, verts, grid.edges, grid.dangling, grid.bipartition, grid.backend)


def is_orthogonal(O: LocalMap) -> bool:
    be = O.backend
    P = (O.T @ O).matrix
    ident = constants(be)["I"].matrix
    if be.exact:
        return all(a == b for a, b in zip(P.flat, ident.flat))
    return bool(np.max(np.abs(P.astype(complex) - ident.astype(complex))) <= be.eps)


def transform_orthogonal(grid: SignatureGrid, O: LocalMap) -> SignatureGrid:
    grid.backend.check(O.backend)
    if not is_orthogonal(O):
        raise HolantError("matrix is not complex orthogonal")
    sigs = {name: apply_local(O, s) for name, s in grid.signatures.items()}
    return SignatureGrid(sigs, grid.vertices, grid.edges, grid.dangling, grid.bipartition, grid.backend)


# --- QR ------------------------------------------------------------------------

@dataclass(frozen=True)
class QRResult:
    Q: LocalMap
    R: LocalMap
    side: str  # 'upper' or 'lower'
    kind: str  # 'orthogonal', 'K' or 'KX'

    def product(self) -> LocalMap:
        return self.Q @ self.R


def _isotropic(be: Backend, a, b) -> bool:
    s = a * a + b * b
    if be.exact:
        return not s
    return abs(complex(s)) <= be.eps * max(1.0, abs(complex(a)) ** 2 + abs(complex(b)) ** 2)


def _unit_sqrt(be: Backend, a, b):
    """sqrt(a^2+b^2), sign chosen so a/s has positive real part (else positive imag)."""
    s2 = a * a + b * b
    if be.exact and not b:
        s = a
    else:
        s = be.sqrt(s2)
    q = complex(a / s)
    if q.real < 0 or (q.real == 0 and q.imag < 0):
        s = -s
    return s


def complex_qr(M: LocalMap, side: str = "upper") -> QRResult:
    """Factor M = Q R with R triangular on `side`.

    Q is complex orthogonal unless the pivot column of M is isotropic, in
    which case it is K or KX.
    """
    be = M.backend
    if not M.invertible:
        raise HolantError("complex_qr needs an invertible matrix")
    if side not in ("upper", "lower"):
        raise ValueError("side must be 'upper' or 'lower'")
    c = constants(be)
    m = M.matrix
    if side == "upper":
        a, b = m[0, 0], m[1, 0]
    else:
        a, b = m[0, 1], m[1, 1]
    if _isotropic(be, a, b):
        # b = +-i a; upper: (1,i) is K's first column; lower: (1,-i) is K's second column
        plus_i = be.eq(b, a * be.i)
        if side == "upper":
            kind = "K" if plus_i else "KX"
        else:
            kind = "KX" if plus_i else "K"
        Q = c[kind]
    else:
        try:
            s = _unit_sqrt(be, a, b) if side == "upper" else _unit_sqrt(be, b, a)
        except InexactError:
            raise InexactError(
                "orthogonal QR needs sqrt(x^2+z^2), which is not in Q[i] here; use the float backend"
            ) from None
        inv = GaussQ.coerce(s).inverse() if be.exact else 1 / s
        u, v = a * inv, b * inv
        if side == "upper":
            rows = [[u, -v], [v, u]]
        else:
            rows = [[v, u], [-u, v]]
        Q = LocalMap(be.array(rows, (2, 2)), be)
        kind = "orthogonal"
    R = Q.inverse() @ M
    Rm = R.matrix.copy()
    # clean the structural zero so float results are exactly triangular
    if side == "upper":
        Rm[1, 0] = be.zero
    else:
        Rm[0, 1] = be.zero
    return QRResult(Q, LocalMap(Rm, be), side, kind)


def is_triangular(R: LocalMap, side: str) -> bool:
    be = R.backend
    z = R.matrix[1, 0] if side == "upper" else R.matrix[0, 1]
    return be.is_zero(z)


@dataclass(frozen=True)
class ATASolution:
    form: str  # 'KD' or 'KXD'
    D: LocalMap

    def reconstruct(self) -> LocalMap:
        be = self.D.backend
        return constants(be)["K" if self.form == "KD" else "KX"] @ self.D


def solve_ata_propto_x(A: LocalMap) -> ATASolution | None:
    """Solve A^T A = mu X (mu != 0): A is K·D or KX·D with D diagonal."""
    be = A.backend
    P = (A.T @ A).matrix
    if not (be.is_zero(P[0, 0]) and be.is_zero(P[1, 1])) or be.is_zero(P[0, 1]):
        return None
    a = A.matrix
    D = LocalMap(be.array([[a[0, 0], 0], [0, a[0, 1]]], (2, 2)), be)
    form = "KD" if be.eq(a[1, 0], a[0, 0] * be.i) else "KXD"
    sol = ATASolution(form, D)
    if not sol.reconstruct().close(A):
        return None
    return sol


# --- omega normalisation -----------------------------------------------------

OMEGA = cmath.exp(2j * cmath.pi / 3)
MAX_ROOT_ORDER = 48


def _bad_order(m: int) -> bool:
    return m % 3 == 0 and m % 9 != 0


def root_order(lam, be: Backend, max_order: int = MAX_ROOT_ORDER) -> int | None:
    """Order of lam as a root of unity, if it is one of order <= max_order."""
    if be.exact:
        z = GaussQ.coerce(lam)
        p = GaussQ(1)
        for m in range(1, max_order + 1):
            p = p * z
            if p == 1:
                return m
            if m == 4:
                # Q[i] holds no roots of unity beyond the fourth ones
                return None
        return None
    z = complex(lam)
    if abs(abs(z) - 1.0) > be.eps * 10:
        return None
    for m in range(1, max_order + 1):
        if abs(z ** m - 1) <= be.eps * 10 * m:
            return m
    return None


def is_bad_ratio(lam, be: Backend, max_order: int = MAX_ROOT_ORDER) -> bool:
    m = root_order(lam, be, max_order)
    return m is not None and _bad_order(m)


@dataclass(frozen=True)
class OmegaTransform:
    j: int = 0

    def factor(self, power: int = 1):
        return OMEGA ** (self.j * power) if self.j else 1

    def apply(self, values, be: Backend):
        """diag(1, w^j) on each wire of a symmetric signature."""
        if self.j == 0:
            return tuple(values)
        if be.exact:
            raise InexactError("omega is not in Q[i]")
        return tuple(complex(v) * OMEGA ** (self.j * k) for k, v in enumerate(values))

    def matrix(self, be: Backend) -> LocalMap:
        if self.j == 0:
            return constants(be)["I"]
        if be.exact:
            raise InexactError("omega is not in Q[i]")
        return LocalMap(np.array([[1, 0], [0, OMEGA ** self.j]], dtype=complex), be)


def is_omega_normalised(values, be: Backend, max_order: int = MAX_ROOT_ORDER) -> bool:
    first, last = values[0], values[-1]
    if be.is_zero(first):
        return True
    return not is_bad_ratio(last / first, be, max_order)


def omega_normalize(y, be: Backend, unary=None, max_order: int = MAX_ROOT_ORDER, require_unary: bool = False):
    """Return (OmegaTransform, normalized values) for a binary or unary.

    For a binary of the shape [0, y1, 0] the binary is left alone and the
    supplied unary is normalised instead; its normalized values are then
    what is returned.
    """
    vals = tuple(y.values if isinstance(y, SymmetricSignature) else y)
    if len(vals) not in (2, 3):
        raise ValueError("omega_normalize takes a unary [a,b] or binary [y0,y1,y2]")
    if len(vals) == 3 and be.is_zero(vals[0]) and be.is_zero(vals[2]):
        if unary is None:
            if require_unary:
                raise HolantError("binary has the form [0,y1,0]; a unary is needed to normalise")
            return OmegaTransform(0), vals
        return omega_normalize(tuple(unary), be, None, max_order)
    for j in range(3):
        t = OmegaTransform(j)
        if j and be.exact:
            break
        cand = t.apply(vals, be)
        if is_omega_normalised(cand, be, max_order):
            return t, cand
    raise HolantError("no omega transform normalises the input")
