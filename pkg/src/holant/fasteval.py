"""Polynomial-time Holant evaluators for the tractable families, and a dispatcher.

All fast paths work on the factored grid: every vertex is split into its
connected factors, so each node below is an irreducible factor and each
edge joins two node slots.
"""

from __future__ import annotations

import heapq
import math
import os
from collections import deque
from dataclasses import dataclass

import numpy as np

from .dichotomy import find_common_local_basis, in_closure, in_family, is_affine
from .errors import GridError, HolantError
from .gridnet import SignatureGrid, holant_contract
from .holo import transform_orthogonal
from .scalars import Backend, GaussQ
from .sigcore import LocalMap, Signature, apply_local, connected_factors, constants

# Kill-switch for the K∘M route; the dispatcher falls back to contraction.
KM_ROUTE_ENABLED = os.environ.get("HOLANT_DISABLE_KM", "") not in ("1", "true", "yes")


@dataclass
class FactoredGrid:
    scalar: object
    nodes: list  # (Signature, tuple of edge ids per slot)
    num_edges: int
    backend: Backend

    def endpoints(self):
        """edge id -> [(node, slot), (node, slot)]"""
        ends = [[] for _ in range(self.num_edges)]
        for n, (_, es) in enumerate(self.nodes):
            for s, e in enumerate(es):
                ends[e].append((n, s))
        return ends


def factor_grid(grid: SignatureGrid, transform: LocalMap | None = None) -> FactoredGrid:
    """Split every vertex into connected factors, optionally applying
    ``transform`` to each distinct signature first."""
    if grid.dangling:
        raise GridError("fast evaluators need a closed grid")
    be = grid.backend
    cache = {}
    for name, s in grid.signatures.items():
        if transform is not None:
            s = apply_local(transform, s)
        if s.is_zero():
            cache[name] = None
        else:
            fac = connected_factors(s)
            cache[name] = (fac.scalar, list(fac.factors))
    inc = grid.incidence()
    scalar = be.one
    nodes = []
    for v, name in enumerate(grid.vertices):
        entry = cache[name]
        if entry is None:
            return FactoredGrid(be.zero, [], len(grid.edges), be)
        lam, facs = entry
        scalar = scalar * lam
        for sig, wires in facs:
            nodes.append((sig, tuple(inc[v][w - 1] for w in wires)))
    return FactoredGrid(scalar, nodes, len(grid.edges), be)


def _components(fg: FactoredGrid):
    """Connected components of the factor graph as (node list, edge list)."""
    parent = list(range(len(fg.nodes)))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    ends = fg.endpoints()
    for e in range(fg.num_edges):
        (a, _), (b, _) = ends[e]
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    comps: dict[int, tuple[list, list]] = {}
    for n in range(len(fg.nodes)):
        comps.setdefault(find(n), ([], []))[0].append(n)
    for e in range(fg.num_edges):
        comps[find(ends[e][0][0])][1].append(e)
    return list(comps.values()), ends


def _require(cond: bool, what: str):
    if not cond:
        raise HolantError(f"precondition violated: {what}")


# --- binary factors: paths and cycles -------------------------------------------

def _tree_product(mats: list):
    """Ordered product by pairwise halving; keeps exact operands balanced in size."""
    while len(mats) > 1:
        nxt = [mats[j] @ mats[j + 1] for j in range(0, len(mats) - 1, 2)]
        if len(mats) % 2:
            nxt.append(mats[-1])
        mats = nxt
    return mats[0]


def eval_binary_grid(grid: SignatureGrid):
    fg = factor_grid(grid)
    be = fg.backend
    if not fg.nodes:
        return fg.scalar
    _require(all(s.arity <= 2 for s, _ in fg.nodes), "every factor has arity <= 2")
    ends = fg.endpoints()
    mats = [np.asarray(s.coeffs).reshape((2,) * s.arity) for s, _ in fg.nodes]
    seen = [False] * len(fg.nodes)
    total = fg.scalar

    def other_end(e, n, s):
        a, b = ends[e]
        return b if a == (n, s) else a

    for n, (sig, es) in enumerate(fg.nodes):
        if seen[n] or sig.arity != 1:
            continue
        seen[n] = True
        # path from this unary to the next one; binaries oriented along the walk
        chain = [mats[n].reshape(1, 2)]
        cur, s = n, 0
        while True:
            m, t = other_end(fg.nodes[cur][1][s], cur, s)
            seen[m] = True
            if mats[m].ndim == 1:
                chain.append(mats[m].reshape(2, 1))
                break
            chain.append(mats[m] if t == 0 else mats[m].T)
            cur, s = m, 1 - t
        total = total * _tree_product(chain)[0, 0]
    for n, (sig, es) in enumerate(fg.nodes):
        if seen[n]:
            continue
        seen[n] = True
        # cycle through binary nodes, starting at slot 0 of n
        chain = [mats[n]]
        cur, s = n, 1
        while True:
            e = fg.nodes[cur][1][s]
            m, t = other_end(e, cur, s)
            if m == n and t == 0 and e == es[0]:
                break
            seen[m] = True
            chain.append(mats[m] if t == 0 else mats[m].T)
            cur, s = m, 1 - t
        P = _tree_product(chain)
        total = total * (P[0, 0] + P[1, 1])
    return be.scalar(total) if be.exact else complex(total)


# --- equality-type factors: parity union-find -------------------------------------

class ParityComponent:
    """Union-find over nodes with parity offsets; a contradiction zeroes the
    component instead of raising."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.parity = [0] * n
        self.broken: set[int] = set()

    def find(self, a: int):
        path = []
        while self.parent[a] != a:
            path.append(a)
            a = self.parent[a]
        root = a
        acc = 0
        for node in reversed(path):
            acc ^= self.parity[node]
            self.parity[node] = acc
            self.parent[node] = root
        return root

    def offset(self, a: int) -> int:
        self.find(a)
        return self.parity[a] if self.parent[a] != a else 0

    def union(self, a: int, b: int, rel: int):
        """Record branch(a) xor branch(b) = rel."""
        ra, rb = self.find(a), self.find(b)
        pa, pb = self.offset(a), self.offset(b)
        if ra == rb:
            if pa ^ pb != rel:
                self.broken.add(ra)
            return
        self.parent[ra] = rb
        self.parity[ra] = pa ^ pb ^ rel
        if ra in self.broken:
            self.broken.discard(ra)
            self.broken.add(rb)


def eval_equality_grid(grid: SignatureGrid, frame: str = "plain"):
    """Holant of a grid whose factors lie in E (frame 'plain') or K∘E (frame 'K')."""
    be = grid.backend
    if frame not in ("plain", "K", "Kframe", "KX"):
        raise ValueError("frame must be 'plain' or 'K'")
    flip = 0 if frame == "plain" else 1
    T = None if not flip else constants(be)["K" if frame != "KX" else "KX"].inverse()
    fg = factor_grid(grid, T)
    if not fg.nodes:
        return fg.scalar * (2 ** fg.num_edges if flip else 1)
    _require(all(in_family(s, "E") for s, _ in fg.nodes), "every factor lies in E")
    # each node: its support pair (x, complement) and the two values
    info = []
    for sig, _ in fg.nodes:
        k = sig.arity
        sup = be.support(sig.coeffs)
        x = int(np.argmax(sup))
        xc = x ^ ((1 << k) - 1)
        info.append((x, sig.coeffs[x], sig.coeffs[xc], k))
    uf = ParityComponent(len(fg.nodes))
    ends = fg.endpoints()
    for e in range(fg.num_edges):
        (a, sa), (b, sb) = ends[e]
        bit_a = (info[a][0] >> (info[a][3] - 1 - sa)) & 1
        bit_b = (info[b][0] >> (info[b][3] - 1 - sb)) & 1
        uf.union(a, b, bit_a ^ bit_b ^ flip)
    w0: dict[int, object] = {}
    w1: dict[int, object] = {}
    for n in range(len(fg.nodes)):
        r = uf.find(n)
        p = uf.offset(n)
        _, vx, vxc, _ = info[n]
        a0, a1 = (vx, vxc) if p == 0 else (vxc, vx)
        w0[r] = w0.get(r, be.one) * a0
        w1[r] = w1.get(r, be.one) * a1
    total = fg.scalar
    for r in w0:
        if r in uf.broken:
            return be.zero
        total = total * (w0[r] + w1[r])
    if flip:
        total = total * (2 ** fg.num_edges)
    return total


# --- affine factors: Gauss sums ----------------------------------------------------

class _QuadForm:
    """i^(k + sum L_v x_v + 2 sum_{uv in Q} x_u x_v), with a running prefactor
    (1+i)^a * 2^b tracked by exponents."""

    def __init__(self):
        self.k = 0
        self.L: dict[int, int] = {}
        self.Q: dict[int, set] = {}
        self.a = 0
        self.b = 0
        self.zero = False

    def var(self, v):
        self.L.setdefault(v, 0)
        self.Q.setdefault(v, set())

    def lin(self, v, c):
        if v is None:
            self.k = (self.k + c) % 4
        else:
            self.L[v] = (self.L[v] + c) % 4

    def quad(self, u, v):
        """add 2·x_u·x_v; None stands for the constant 1"""
        if u is None and v is None:
            self.k = (self.k + 2) % 4
        elif u is None or v is None:
            self.lin(v if u is None else u, 2)
        elif u == v:
            self.lin(u, 2)
        elif v in self.Q[u]:
            self.Q[u].discard(v)
            self.Q[v].discard(u)
        else:
            self.Q[u].add(v)
            self.Q[v].add(u)

    def drop(self, v):
        for u in self.Q.pop(v):
            self.Q[u].discard(v)
        self.L.pop(v)

    def eliminate(self, v) -> list[int]:
        """Sum out x_v; returns the variables whose degree changed."""
        l = self.L[v]
        nb = sorted(self.Q[v])
        self.drop(v)
        if l % 2:
            # 1 + i^l (-1)^s = (1+i) i^(c*s) up to a phase, s = xor of nb
            self.a += 1
            c = 3 if l == 1 else 1
            if l == 3:
                self.k = (self.k + 3) % 4
            for u in nb:
                self.lin(u, c)
            for j in range(len(nb)):
                for t in range(j + 1, len(nb)):
                    self.quad(nb[j], nb[t])
            return nb
        if not nb:
            if l == 2:
                self.zero = True
            self.b += 1
            return []
        # 2 * [xor(nb) = l/2]; solve for the neighbour of least degree
        self.b += 1
        u = min(nb, key=lambda w: (len(self.Q[w]), w))
        atoms = [w for w in nb if w != u] + ([None] if l == 2 else [])
        lu = self.L[u]
        qu = sorted(self.Q[u])
        self.drop(u)
        for z in atoms:
            self.lin(z, lu)
        if lu % 2:
            for j in range(len(atoms)):
                for t in range(j + 1, len(atoms)):
                    self.quad(atoms[j], atoms[t])
        for r in qu:
            for z in atoms:
                self.quad(z, r)
        return sorted(set(w for w in atoms if w is not None) | set(qu))

    def run(self):
        heap = [(len(self.Q[v]), v) for v in self.L]
        heapq.heapify(heap)
        while heap and not self.zero:
            d, v = heapq.heappop(heap)
            if v not in self.L or d != len(self.Q[v]):
                continue
            for u in self.eliminate(v):
                if u in self.L:
                    heapq.heappush(heap, (len(self.Q[u]), u))


def _prefactor(be: Backend, a: int, b: int, k: int):
    """i^k (1+i)^a 2^b exactly (or in float)."""
    if be.exact:
        z = GaussQ(0, 1) ** k
        z = z * (GaussQ(1, 1) ** a)
        two = GaussQ(2)
        return z * (two ** b if b >= 0 else (two ** (-b)).inverse())
    return (1j ** k) * ((1 + 1j) ** a) * (2.0 ** b)


def eval_affine_grid(grid: SignatureGrid):
    be = grid.backend
    if grid.dangling:
        raise GridError("fast evaluators need a closed grid")
    forms = {}
    for name, s in grid.signatures.items():
        if s.is_zero():
            return be.zero
        forms[name] = is_affine(s)
        _require(forms[name] is not None, f"signature {name!r} is affine")
    qf = _QuadForm()
    for e in range(len(grid.edges)):
        qf.var(e)
    inc = grid.incidence()
    const = be.one
    aux = len(grid.edges)
    for v, name in enumerate(grid.vertices):
        form = forms[name]
        const = const * form.c
        xs = inc[v]
        for j in range(form.n):
            qf.lin(xs[j], form.l[j])
            for t in range(j + 1, form.n):
                if form.q[j][t]:
                    qf.quad(xs[j], xs[t])
        for row, rhs in zip(form.A, form.b):
            odd = set()
            for j, bit in enumerate(row):
                if bit:
                    odd ^= {xs[j]}
            if not odd:
                if rhs:
                    return be.zero
                continue
            # [sum x = rhs] = 1/2 sum_t (-1)^(t (sum x + rhs))
            qf.var(aux)
            qf.lin(aux, 2 * rhs)
            for x in odd:
                qf.quad(aux, x)
            qf.b -= 1
            aux += 1
    qf.run()
    if qf.zero:
        return be.zero
    return const * _prefactor(be, qf.a, qf.b, qf.k)


# --- K∘M factors: hot-half orientation DP -------------------------------------

def _m_weights(sig: Signature):
    """(weight with no hot slot, [weight with slot j hot])"""
    k = sig.arity
    c = sig.coeffs
    return c[0], [c[1 << (k - 1 - j)] for j in range(k)]


def _integral_weights(be, weights):
    """Scale each node's weights into Z[i]; returns (weights, product of scales).

    Keeps the DP on integers so long paths do not pay for rational gcds.
    """
    if not be.exact:
        return weights, 1
    out, total = [], 1
    for w0, wj in weights:
        d = 1
        for v in (w0, *wj):
            d = math.lcm(d, int(v.re.denominator), int(v.im.denominator))
        out.append((w0 * d, [v * d for v in wj]) if d != 1 else (w0, wj))
        total *= d
    return out, total


def _tree_dp(be, nodes_c, adj, weights, root):
    """Sum over hot-half choices on a tree component rooted at ``root``.

    adj[n] = list of (edge, my slot, neighbour, their slot).
    """
    order = []
    parent = {root: None}
    dq = deque([root])
    while dq:
        n = dq.popleft()
        order.append(n)
        for e, s, m, t in adj[n]:
            if m not in parent and (parent[n] is None or e != parent[n][0]):
                parent[m] = (e, t, n, s)  # edge, my slot, parent, parent's slot
                dq.append(m)
    A: dict[int, object] = {}  # parent edge hot at this node
    B: dict[int, object] = {}  # parent edge hot at the parent
    for n in reversed(order):
        w0, wj = weights[n]
        kids = [(m, s) for (e, s, m, t) in adj[n] if m != n and parent.get(m) is not None
                and parent[m][0] == e and parent[m][2] == n]
        prod_a = be.one
        pre = [be.one]
        for m, _ in kids:
            prod_a = prod_a * A[m]
            pre.append(prod_a)
        suf = [be.one] * (len(kids) + 1)
        for idx in range(len(kids) - 1, -1, -1):
            suf[idx] = suf[idx + 1] * A[kids[idx][0]]
        b_val = w0 * prod_a
        for idx, (m, s) in enumerate(kids):
            b_val = b_val + wj[s] * B[m] * pre[idx] * suf[idx + 1]
        B[n] = b_val
        if parent[n] is not None:
            A[n] = wj[parent[n][1]] * prod_a
    return B[root]


def eval_km_grid(grid: SignatureGrid, frame: str = "K"):
    """Holant of a grid whose factors lie in frame∘M, frame K or KX.

    Each edge contributes 2X in the M picture, so exactly one end of every
    edge is 'hot' and a factor takes at most one hot slot.
    """
    be = grid.backend
    if frame not in ("K", "KX"):
        raise ValueError("frame must be 'K' or 'KX'")
    fg = factor_grid(grid, constants(be)[frame].inverse())
    if not fg.nodes:
        return fg.scalar * (2 ** fg.num_edges)
    _require(all(in_family(s, "M") for s, _ in fg.nodes), f"every factor lies in {frame}∘M")
    weights, denom = _integral_weights(be, [_m_weights(s) for s, _ in fg.nodes])
    comps, ends = _components(fg)
    total = fg.scalar * (2 ** fg.num_edges) * (GaussQ(1) / denom if be.exact else 1)
    for nodes_c, edges_c in comps:
        if len(edges_c) > len(nodes_c):
            return be.zero
        adj = {n: [] for n in nodes_c}
        if len(edges_c) == len(nodes_c):
            # condition on the non-tree edge
            tree, extra = _spanning(nodes_c, edges_c, ends)
            for e in tree:
                (a, sa), (b, sb) = ends[e]
                adj[a].append((e, sa, b, sb))
                adj[b].append((e, sb, a, sa))
            (a, sa), (b, sb) = ends[extra]
            val = be.zero
            for node, slot in ((a, sa), (b, sb)):
                w = list(weights)
                w0, wj = w[node]
                w[node] = (wj[slot], [be.zero] * len(wj))
                val = val + _tree_dp(be, nodes_c, adj, w, nodes_c[0])
        else:
            for e in edges_c:
                (a, sa), (b, sb) = ends[e]
                adj[a].append((e, sa, b, sb))
                adj[b].append((e, sb, a, sa))
            val = _tree_dp(be, nodes_c, adj, weights, nodes_c[0])
        total = total * val
    return total


def _spanning(nodes_c, edges_c, ends):
    parent = {n: n for n in nodes_c}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    tree, extra = [], None
    for e in edges_c:
        (a, _), (b, _) = ends[e]
        ra, rb = find(a), find(b)
        if ra == rb:
            extra = e
        else:
            parent[ra] = rb
            tree.append(e)
    return tree, extra


# --- dispatcher ---------------------------------------------------------------

def eval_auto(grid: SignatureGrid, seed: int = 0):
    """(value, route) using the first fast path whose class covers the grid."""
    if grid.dangling:
        raise GridError("evaluation needs a closed grid")
    sigs = [s for s in grid.signatures.values()]
    if not sigs or any(s.is_zero() for s in sigs):
        return _fallback(grid), "fallback"
    if in_closure(sigs, "T"):
        return eval_binary_grid(grid), "Tclosure"
    if all(is_affine(s) is not None for s in sigs):
        return eval_affine_grid(grid), "Affine"
    if in_closure(sigs, "E"):
        return eval_equality_grid(grid, "plain"), "Eform"
    if in_closure(sigs, "KE"):
        return eval_equality_grid(grid, "K"), "KE"
    if KM_ROUTE_ENABLED:
        if in_closure(sigs, "KM"):
            return eval_km_grid(grid, "K"), "KM"
        if in_closure(sigs, "KXM"):
            return eval_km_grid(grid, "KX"), "KXM"
    basis = find_common_local_basis(sigs, seed)
    if basis is not None and (basis.exact or not grid.backend.exact):
        if basis.klass == "orthogonal":
            O = basis.L
            return eval_equality_grid(transform_orthogonal(grid, O.T), "plain"), "Eform"
        # K-type bases are K·D or KX·D, so the set is already in K∘E
        return eval_equality_grid(grid, "K"), "KE"
    return _fallback(grid), "fallback"


def _fallback(grid: SignatureGrid):
    if grid.dangling:
        raise GridError("evaluation needs a closed grid")
    return holant_contract(grid)
