"""Naive reference computations, independent of the library's arithmetic.

Exact values are pairs of Fractions (re, im); float values are Python complex.
Everything here loops over assignments directly, so it is slow on purpose.
"""

from __future__ import annotations

import itertools
from fractions import Fraction


def gq(z):
    """Library scalar -> (Fraction, Fraction), or complex for floats."""
    if isinstance(z, complex):
        return z
    if hasattr(z, "re"):
        return (_frac(z.re), _frac(z.im))
    if isinstance(z, (int, Fraction)):
        return (Fraction(z), Fraction(0))
    return complex(z)


def _frac(q):
    return Fraction(int(q.numerator), int(q.denominator))


def cmul(a, b):
    if isinstance(a, complex) or isinstance(b, complex):
        return _c(a) * _c(b)
    return (a[0] * b[0] - a[1] * b[1], a[0] * b[1] + a[1] * b[0])


def cadd(a, b):
    if isinstance(a, complex) or isinstance(b, complex):
        return _c(a) + _c(b)
    return (a[0] + b[0], a[1] + b[1])


def _c(a):
    return a if isinstance(a, complex) else complex(float(a[0]), float(a[1]))


ZERO = (Fraction(0), Fraction(0))
ONE = (Fraction(1), Fraction(0))


def coeffs(sig):
    return [gq(z) for z in sig.coeffs.tolist()]


def bits(x, n):
    """Wire 1 is the most significant bit."""
    return tuple((x >> (n - 1 - j)) & 1 for j in range(n))


def index(b):
    out = 0
    for v in b:
        out = 2 * out + v
    return out


def apply_maps(maps, vals):
    """maps: list of 2x2 nested lists (one per wire, None = identity)."""
    n = len(maps)
    out = []
    for x in range(1 << n):
        xb = bits(x, n)
        acc = ZERO if not isinstance(vals[0], complex) else 0j
        for y in range(1 << n):
            yb = bits(y, n)
            term = vals[y]
            for j in range(n):
                m = maps[j]
                if m is None:
                    if xb[j] != yb[j]:
                        term = ZERO
                        break
                else:
                    term = cmul(term, m[xb[j]][yb[j]])
            acc = cadd(acc, term)
        out.append(acc)
    return out


def holant(grid):
    """Sum over edge assignments of the product of vertex values."""
    tables = {name: coeffs(s) for name, s in grid.signatures.items()}
    nv = len(grid.vertices)
    ports = [dict() for _ in range(nv)]
    for k, (v, p, w, q) in enumerate(grid.edges):
        ports[v][p] = k
        ports[w][q] = k
    exact = not any(isinstance(t[0], complex) for t in tables.values())
    total = ZERO if exact else 0j
    for sigma in itertools.product((0, 1), repeat=len(grid.edges)):
        term = ONE if exact else 1 + 0j
        for v in range(nv):
            t = tables[grid.vertices[v]]
            n = len(ports[v])
            term = cmul(term, t[index([sigma[ports[v][p]] for p in range(1, n + 1)])])
            if term == ZERO:
                break
        total = cadd(total, term)
    return total


def gadget(grid):
    """Effective signature of a grid with dangling endpoints, by brute force."""
    tables = {name: coeffs(s) for name, s in grid.signatures.items()}
    nv = len(grid.vertices)
    ports = [dict() for _ in range(nv)]
    m = len(grid.edges)
    for k, (v, p, w, q) in enumerate(grid.edges):
        ports[v][p] = k
        ports[w][q] = k
    for j, (v, p) in enumerate(grid.dangling):
        ports[v][p] = m + j
    d = len(grid.dangling)
    out = []
    for ext in range(1 << d):
        eb = bits(ext, d)
        acc = ZERO
        for sigma in itertools.product((0, 1), repeat=m):
            full = sigma + eb
            term = ONE
            for v in range(nv):
                t = tables[grid.vertices[v]]
                n = len(ports[v])
                term = cmul(term, t[index([full[ports[v][p]] for p in range(1, n + 1)])])
            acc = cadd(acc, term)
        out.append(acc)
    return out


def matmul(a, b):
    return [[cadd(cmul(a[r][0], b[0][c]), cmul(a[r][1], b[1][c])) for c in range(2)] for r in range(2)]


def transpose(a):
    return [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]


def mat(m):
    """LocalMap -> nested list of oracle scalars."""
    return [[gq(z) for z in row] for row in m.matrix.tolist()]


def det(a):
    x = cmul(a[0][0], a[1][1])
    y = cmul(a[0][1], a[1][0])
    return cadd(x, (-y[0], -y[1]))


def components(grid):
    """Number of connected components, isolated vertices included."""
    parent = list(range(len(grid.vertices)))

    def find(a):
        while parent[a] != a:
            a = parent[a]
        return a

    for v, _, w, _ in grid.edges:
        parent[find(v)] = find(w)
    return len({find(v) for v in range(len(parent))})


def abs_scale(grid):
    """Holant of the entrywise-absolute grid: the size of the summands a float sum sees."""
    from holant.gridnet import build_grid, holant_bruteforce
    from holant.scalars import FLOAT
    from holant.sigcore import Signature

    verts = [(n, Signature.from_values([abs(x) for x in grid.signatures[n].coeffs], FLOAT))
             for n in grid.vertices]
    return abs(holant_bruteforce(build_grid(verts, grid.edges, dangling=grid.dangling)))


def float_close(a, b, *grids, rel=1e-6):
    """Relative agreement, with a rounding floor of 1e-12 times the largest summand scale."""
    if abs(a - b) <= rel * max(1.0, abs(b)):
        return True
    return abs(a - b) <= 1e-12 * max(abs_scale(g) for g in grids)
