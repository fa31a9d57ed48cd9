"""Seeded random signatures, maps and grids for property tests and selftests."""

from __future__ import annotations

import numpy as np

from .dichotomy import AffineForm
from .gridnet import SignatureGrid, build_grid
from .scalars import Backend, EXACT, GaussQ
from .sigcore import LocalMap, Signature, apply_local, constants, named_state, tensor_all


def rng_of(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def rand_scalar(rng, be: Backend = EXACT, bound: int = 3, nonzero: bool = False):
    while True:
        re, im = (int(v) for v in rng.integers(-bound, bound + 1, size=2))
        if nonzero and re == 0 and im == 0:
            continue
        if be.exact:
            return GaussQ(re, im)
        return complex(re, im) + complex(*rng.normal(0, 0.01, size=2))


def rand_signature(rng, arity: int, be: Backend = EXACT, zero_prob: float = 0.0, bound: int = 3) -> Signature:
    while True:
        vals = [be.zero if rng.random() < zero_prob else rand_scalar(rng, be, bound) for _ in range(1 << arity)]
        s = Signature(be.array(vals), be)
        if not s.is_zero():
            return s


def rand_invertible(rng, be: Backend = EXACT, bound: int = 3) -> LocalMap:
    while True:
        m = LocalMap(be.array([rand_scalar(rng, be, bound) for _ in range(4)], (2, 2)), be)
        # float draws are jittered integers; an integer-singular draw would be ill-conditioned
        if m.invertible and (be.exact or abs(m.det) >= 0.5):
            return m


def rand_orthogonal(rng, be: Backend = EXACT) -> LocalMap:
    """Cayley transform of a random skew matrix, optionally times a reflection."""
    while True:
        s = rand_scalar(rng, be, 4, nonzero=True)
        if be.exact:
            s = s / GaussQ(int(rng.integers(1, 5)))
        d = 1 + s * s
        # s*s near -1 blows the entries up; float draws stay well conditioned
        if be.is_zero(d) or (not be.exact and abs(d) < 0.5):
            continue
        inv = GaussQ.coerce(d).inverse() if be.exact else 1 / d
        c = (1 - s * s) * inv
        t = 2 * s * inv
        rows = [[c, -t], [t, c]]
        if rng.random() < 0.5:
            rows = [[c, t], [t, -c]]
        return LocalMap(be.array(rows, (2, 2)), be)


def slocc_image(rng, f: Signature, bound: int = 3) -> Signature:
    be = f.backend
    return apply_local([(w, rand_invertible(rng, be, bound)) for w in range(1, f.arity + 1)], f)


def genuinely_entangled_corpus(rng, n: int, count: int, be: Backend = EXACT):
    """SLOCC images of GHZ_n and W_n plus filtered dense randoms, in that rotation."""
    from .entclass import is_genuinely_entangled

    out = []
    k = 0
    while len(out) < count:
        kind = k % 3
        k += 1
        if kind == 0:
            f = slocc_image(rng, named_state("GHZ", n, be), 2)
        elif kind == 1:
            f = slocc_image(rng, named_state("W", n, be), 2)
        else:
            f = rand_signature(rng, n, be, zero_prob=0.3, bound=2)
        if not f.is_zero() and is_genuinely_entangled(f):
            out.append(f)
    return out


# --- class samplers -----------------------------------------------------------

def rand_e_signature(rng, arity: int, be: Backend = EXACT) -> Signature:
    """Supported on a random pair {x, complement of x}."""
    x = int(rng.integers(0, 1 << arity))
    vals = [be.zero] * (1 << arity)
    vals[x] = rand_scalar(rng, be, 3, nonzero=True)
    if arity and rng.random() < 0.85:
        vals[x ^ ((1 << arity) - 1)] = rand_scalar(rng, be, 3)
    return Signature(be.array(vals), be)


def rand_m_signature(rng, arity: int, be: Backend = EXACT) -> Signature:
    """Supported on Hamming weight at most one."""
    vals = [be.zero] * (1 << arity)
    vals[0] = rand_scalar(rng, be, 3)
    for j in range(arity):
        vals[1 << j] = rand_scalar(rng, be, 3)
    if all(be.is_zero(v) for v in vals):
        vals[0] = be.one
    return Signature(be.array(vals), be)


def rand_affine_form(rng, arity: int, be: Backend = EXACT) -> AffineForm:
    m = int(rng.integers(0, arity + 1)) if arity else 0
    A = [tuple(int(b) for b in rng.integers(0, 2, size=arity)) for _ in range(m)]
    x0 = rng.integers(0, 2, size=arity)
    bvec = tuple(int(sum(a * x for a, x in zip(row, x0)) % 2) for row in A)
    l = tuple(int(v) for v in rng.integers(0, 4, size=arity))
    q = tuple(tuple(int(rng.integers(0, 2)) if k > j else 0 for k in range(arity)) for j in range(arity))
    c = rand_scalar(rng, be, 3, nonzero=True)
    return AffineForm(c, l, q, tuple(A), bvec, arity)


def rand_affine_signature(rng, arity: int, be: Backend = EXACT) -> Signature:
    return rand_affine_form(rng, arity, be).evaluate(be)


def _product(rng, sampler, arity: int, be: Backend, split_prob: float) -> Signature:
    """Sometimes a tensor product of smaller samples, to exercise factoring."""
    if arity >= 2 and rng.random() < split_prob:
        k = int(rng.integers(1, arity))
        return tensor_all([sampler(rng, k, be), sampler(rng, arity - k, be)])
    return sampler(rng, arity, be)


def class_sampler(klass: str):
    """Signature sampler for a tractable family: T, E, KE, Affine, KM, KXM."""
    if klass == "T":
        def s(rng, n, be):
            parts = []
            left = n
            while left:
                k = min(left, int(rng.integers(1, 3)))
                parts.append(rand_signature(rng, k, be, zero_prob=0.2))
                left -= k
            return tensor_all(parts)
        return s
    if klass == "E":
        return lambda rng, n, be: _product(rng, rand_e_signature, n, be, 0.3)
    if klass == "KE":
        return lambda rng, n, be: apply_local(constants(be)["K"], _product(rng, rand_e_signature, n, be, 0.3))
    if klass == "Affine":
        return lambda rng, n, be: rand_affine_signature(rng, n, be)
    if klass in ("KM", "KXM"):
        frame = "K" if klass == "KM" else "KX"
        return lambda rng, n, be: apply_local(constants(be)[frame], _product(rng, rand_m_signature, n, be, 0.3))
    raise ValueError(f"unknown class {klass!r}")


# --- grids ------------------------------------------------------------------------

def _arities(rng, max_edges: int, max_arity: int, min_arity: int = 1):
    """Vertex arities with an even total of at most 2*max_edges."""
    target = int(rng.integers(1, max_edges + 1)) * 2
    ars = []
    total = 0
    while total < target:
        a = int(rng.integers(min_arity, max_arity + 1))
        a = min(a, target - total)
        ars.append(a)
        total += a
    return ars


def random_grid(rng, sampler, be: Backend = EXACT, max_edges: int = 12, max_arity: int = 4,
                distinct: int = 3, min_arity: int = 1) -> SignatureGrid:
    """Random multigraph by pairing half-edges; signatures drawn per arity and reused."""
    ars = _arities(rng, max_edges, max_arity, min_arity)
    pool: dict[int, list] = {}
    verts = []
    for k, a in enumerate(ars):
        bucket = pool.setdefault(a, [])
        if len(bucket) < distinct and (not bucket or rng.random() < 0.5):
            bucket.append((f"s{a}_{len(bucket)}", sampler(rng, a, be)))
        verts.append(bucket[int(rng.integers(0, len(bucket)))])
    halves = [(v, p) for v, a in enumerate(ars) for p in range(1, a + 1)]
    order = rng.permutation(len(halves))
    edges = []
    for j in range(0, len(order), 2):
        (v, p), (w, q) = halves[order[j]], halves[order[j + 1]]
        edges.append((v, p, w, q))
    return build_grid(verts, edges, backend=be)


def random_bipartite_grid(rng, be: Backend = EXACT, max_edges: int = 12, max_arity: int = 4,
                          zero_prob: float = 0.2) -> SignatureGrid:
    total = int(rng.integers(1, max_edges + 1))

    def split(n):
        ars = []
        while n:
            a = min(n, int(rng.integers(1, max_arity + 1)))
            ars.append(a)
            n -= a
        return ars

    left, right = split(total), split(total)
    verts, bip = [], []
    for side, ars in (("L", left), ("R", right)):
        pool = {}
        for a in ars:
            bucket = pool.setdefault(a, [])
            if not bucket or (len(bucket) < 2 and rng.random() < 0.5):
                bucket.append((f"{side}{a}_{len(bucket)}", rand_signature(rng, a, be, zero_prob)))
            verts.append(bucket[int(rng.integers(0, len(bucket)))])
            bip.append(side)
    nl = len(left)
    lh = [(v, p) for v, a in enumerate(left) for p in range(1, a + 1)]
    rh = [(nl + v, p) for v, a in enumerate(right) for p in range(1, a + 1)]
    perm = rng.permutation(len(rh))
    edges = [(lh[j][0], lh[j][1], rh[perm[j]][0], rh[perm[j]][1]) for j in range(len(lh))]
    return build_grid(verts, edges, bipartition=tuple(bip), backend=be)


def ladder_grid(sampler_by_arity, rng, n_rungs: int, be: Backend = EXACT) -> SignatureGrid:
    """Circular ladder of ternary vertices: 2n vertices, 3n edges, low treewidth."""
    sig = ("t", sampler_by_arity(rng, 3, be))
    verts = [sig] * (2 * n_rungs)
    edges = []
    for k in range(n_rungs):
        a, b = 2 * k, 2 * k + 1
        na, nb = (2 * k + 2) % (2 * n_rungs), (2 * k + 3) % (2 * n_rungs)
        edges.append((a, 1, b, 1))
        edges.append((a, 2, na, 3))
        edges.append((b, 2, nb, 3))
    return build_grid(verts, edges, backend=be)


def random_forest_grid(rng, sampler, be: Backend = EXACT, max_edges: int = 12, extra: int = 1,
                       max_degree: int = 4) -> SignatureGrid:
    """Random tree plus up to ``extra`` additional edges (loops and parallels allowed);
    vertex arities are the resulting degrees."""
    while True:
        n = int(rng.integers(2, max_edges + 1))
        pairs = [(int(rng.integers(0, k)), k) for k in range(1, n)]
        for _ in range(int(rng.integers(0, extra + 1))):
            a, b = (int(v) for v in rng.integers(0, n, size=2))
            pairs.append((a, b))
        deg = [0] * n
        for a, b in pairs:
            deg[a] += 1
            deg[b] += 1
        if max(deg) <= max_degree and len(pairs) <= max_edges:
            break
    verts = [(f"v{v}", sampler(rng, deg[v], be)) for v in range(n)]
    used = [0] * n
    edges = []
    for a, b in pairs:
        used[a] += 1
        pa = used[a]
        used[b] += 1
        edges.append((a, pa, b, used[b]))
    return build_grid(verts, edges, backend=be)
