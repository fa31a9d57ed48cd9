"""Signature grids, gadgets, Holant evaluation, and the grid file format."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
from gmpy2 import lcm, mpq

from .errors import ArityError, BudgetExceeded, GridError
from .scalars import EXACT, Backend, GaussQ, format_scalar
from .sigcore import (
    MAX_ARITY,
    Signature,
    from_symmetric,
    parse_signature_literal,
    signature_literal,
)

Edge = tuple  # (v, p, w, q): 0-based vertices, 1-based ports

EQ2 = "=2"


@dataclass(frozen=True, eq=False)
class SignatureGrid:
    """A multigraph of signature-bearing vertices.

    Edges join (vertex, port) endpoints; self-loops and parallel edges are
    allowed.  Endpoints listed in ``dangling`` stay open, which turns the
    grid into a gadget whose outputs follow the dangling order.
    """

    signatures: Mapping[str, Signature]
    vertices: tuple
    edges: tuple
    dangling: tuple = ()
    bipartition: tuple | None = None
    backend: Backend = field(default=EXACT)

    def __post_init__(self):
        object.__setattr__(self, "signatures", dict(self.signatures))
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "edges", tuple(tuple(int(x) for x in e) for e in self.edges))
        object.__setattr__(self, "dangling", tuple(tuple(int(x) for x in d) for d in self.dangling))
        if self.bipartition is not None:
            object.__setattr__(self, "bipartition", tuple(self.bipartition))
        if self.signatures:
            be = next(iter(self.signatures.values())).backend
            object.__setattr__(self, "backend", be)
        self.validate()

    def validate(self) -> None:
        for name, sig in self.signatures.items():
            if sig.backend.name != self.backend.name:
                raise GridError("mixed backends in one grid", f"signature {name!r}")
        seen: dict[tuple, str] = {}
        nv = len(self.vertices)
        for v, name in enumerate(self.vertices):
            if name not in self.signatures:
                raise GridError(f"unknown signature name {name!r}", f"vertex {v}")

        def claim(v, p, where):
            if not 0 <= v < nv:
                raise GridError(f"vertex index {v} out of range", where)
            ar = self.signatures[self.vertices[v]].arity
            if not 1 <= p <= ar:
                raise GridError(f"port {p} out of range 1..{ar} for vertex {v} ({self.vertices[v]})", where)
            if (v, p) in seen:
                raise GridError(f"port ({v},{p}) used twice (also in {seen[(v, p)]})", where)
            seen[(v, p)] = where

        for k, e in enumerate(self.edges):
            if len(e) != 4:
                raise GridError("edge must be [v, port, w, port]", f"edge {k}")
            claim(e[0], e[1], f"edge {k}")
            claim(e[2], e[3], f"edge {k}")
        for k, d in enumerate(self.dangling):
            if len(d) != 2:
                raise GridError("dangling entry must be [v, port]", f"dangling {k}")
            claim(d[0], d[1], f"dangling {k}")
        for v, name in enumerate(self.vertices):
            ar = self.signatures[name].arity
            for p in range(1, ar + 1):
                if (v, p) not in seen:
                    raise GridError(f"port {p} of vertex {v} ({name}) is unconnected", f"vertex {v}")
        if self.bipartition is not None:
            if len(self.bipartition) != nv:
                raise GridError("bipartition length differs from vertex count", "bipartition")
            for v, side in enumerate(self.bipartition):
                if side not in ("L", "R"):
                    raise GridError(f"bad side label {side!r}", f"bipartition[{v}]")
            for k, (v, _, w, _) in enumerate(self.edges):
                if self.bipartition[v] == self.bipartition[w]:
                    raise GridError("edge joins two vertices on the same side", f"edge {k}")

    # convenience
    def sig(self, v: int) -> Signature:
        return self.signatures[self.vertices[v]]

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def incidence(self) -> list[list]:
        """Per vertex, the edge id (or ('d', k) for dangling) seen at each port."""
        inc: list[list] = [[None] * self.sig(v).arity for v in range(len(self.vertices))]
        for k, (v, p, w, q) in enumerate(self.edges):
            inc[v][p - 1] = k
            inc[w][q - 1] = k
        for k, (v, p) in enumerate(self.dangling):
            inc[v][p - 1] = ("d", k)
        return inc

    def closed(self) -> "SignatureGrid":
        return replace(self, dangling=())


Gadget = SignatureGrid


def build_grid(vertices: Sequence[Signature | tuple], edges, dangling=(), bipartition=None,
               backend: Backend | None = None) -> SignatureGrid:
    """Build a grid from per-vertex signatures, naming them by identity.

    A vertex may be given as (name, Signature).
    """
    sigs: dict[str, Signature] = {}
    names = []
    by_id: dict[int, str] = {}
    for k, v in enumerate(vertices):
        if isinstance(v, tuple):
            name, s = v
        else:
            s = v
            name = by_id.get(id(s))
            if name is None:
                name = f"f{len(by_id)}"
                while name in sigs:
                    name += "_"
        by_id.setdefault(id(s), name)
        if name in sigs and sigs[name] is not s and not (sigs[name] == s):
            raise GridError(f"name {name!r} bound to two different signatures", f"vertex {k}")
        sigs[name] = s
        names.append(name)
    be = backend or (next(iter(sigs.values())).backend if sigs else EXACT)
    return SignatureGrid(sigs, tuple(names), tuple(edges), tuple(dangling), bipartition, be)


# --- brute force -----------------------------------------------------------

CHUNK = 1 << 16


def _int_tables(sig: Signature):
    """Scale an exact signature to Gaussian integers: coeffs = (re + i*im) / den."""
    den = mpq(1).numerator
    for z in sig.coeffs:
        den = lcm(den, z.re.denominator)
        den = lcm(den, z.im.denominator)
    re = [int(z.re * den) for z in sig.coeffs]
    im = [int(z.im * den) for z in sig.coeffs]
    return re, im, int(den)


def _vertex_index(sigma: np.ndarray, edge_ids: Sequence[int]) -> np.ndarray:
    n = len(edge_ids)
    idx = np.zeros(sigma.shape, dtype=np.int64)
    for j, e in enumerate(edge_ids):
        idx |= ((sigma >> e) & 1) << (n - 1 - j)
    return idx


def holant_bruteforce(grid: SignatureGrid, max_edges: int = 24):
    """Sum over all edge assignments of the product of vertex values."""
    if grid.dangling:
        raise GridError("brute-force Holant needs a closed grid (no dangling ports)")
    m = grid.num_edges
    if m > max_edges:
        raise BudgetExceeded(f"{m} edges exceed the brute-force budget of {max_edges}")
    be = grid.backend
    inc = grid.incidence()
    if not grid.vertices:
        return be.one
    total = 1 << m
    if be.exact:
        return _brute_exact(grid, inc, m, total)
    tables = [np.asarray(grid.sig(v).coeffs, dtype=np.complex128) for v in range(len(grid.vertices))]
    parts = []
    for start in range(0, total, CHUNK):
        sigma = np.arange(start, min(total, start + CHUNK), dtype=np.int64)
        prod = np.ones(sigma.shape, dtype=np.complex128)
        for v, t in enumerate(tables):
            prod *= t[_vertex_index(sigma, inc[v])]
        parts.append(np.sum(prod))
    return complex(np.sum(np.array(parts)))


def _brute_exact(grid, inc, m, total):
    tables = []
    den = 1
    bound = 1
    for v in range(len(grid.vertices)):
        re, im, d = _int_tables(grid.sig(v))
        tables.append((re, im))
        den *= d
        bound *= max((abs(a) + abs(b) for a, b in zip(re, im)), default=0) or 1
    use_i64 = bound * (1 << m) * 2 < (1 << 62)
    dtype = np.int64 if use_i64 else object
    arrs = [(np.array(re, dtype=dtype), np.array(im, dtype=dtype)) for re, im in tables]
    acc_re = 0
    acc_im = 0
    for start in range(0, total, CHUNK):
        sigma = np.arange(start, min(total, start + CHUNK), dtype=np.int64)
        pr = np.ones(sigma.shape, dtype=dtype)
        pi = np.zeros(sigma.shape, dtype=dtype)
        for v, (tr, ti) in enumerate(arrs):
            idx = _vertex_index(sigma, inc[v])
            br, bi = tr[idx], ti[idx]
            pr, pi = pr * br - pi * bi, pr * bi + pi * br
        acc_re += int(pr.sum())
        acc_im += int(pi.sum())
    return GaussQ(mpq(acc_re, den), mpq(acc_im, den))


# --- contraction -------------------------------------------------------------

ARITY_CAP = 20


class _Net:
    """Mutable working state for one contraction run."""

    def __init__(self, tensors, legs, backend):
        self.tensors = tensors
        self.legs = legs
        self.be = backend

    def copy(self):
        return _Net(list(self.tensors), [list(l) for l in self.legs], self.be)


def _trace_self(t: np.ndarray, legs: list):
    # collapse repeated labels (self-loops) by taking diagonals
    while True:
        seen = {}
        pair = None
        for a, lab in enumerate(legs):
            if lab in seen:
                pair = (seen[lab], a)
                break
            seen[lab] = a
        if pair is None:
            return t, legs
        a, b = pair
        t = np.trace(t, axis1=a, axis2=b) if t.dtype != object else _obj_trace(t, a, b)
        legs = [l for k, l in enumerate(legs) if k not in (a, b)]


def _obj_trace(t, a, b):
    return np.take(np.take(t, 0, axis=b), 0, axis=a) + np.take(np.take(t, 1, axis=b), 1, axis=a)


def _contract_pair(ta, la, tb, lb):
    shared = [l for l in la if l in lb]
    ax_a = [la.index(l) for l in shared]
    ax_b = [lb.index(l) for l in shared]
    t = np.tensordot(ta, tb, axes=(ax_a, ax_b))
    legs = [l for l in la if l not in shared] + [l for l in lb if l not in shared]
    return t, legs


def _plan_step(net: _Net):
    """Pick the pair to merge: smallest result leg count, then lowest edge id."""
    owner: dict = {}
    for k, legs in enumerate(net.legs):
        for lab in legs:
            if isinstance(lab, int):
                owner.setdefault(lab, []).append(k)
    best = None
    for lab in sorted(owner):
        ts = owner[lab]
        if len(ts) != 2 or ts[0] == ts[1]:
            continue
        a, b = ts
        la, lb = net.legs[a], net.legs[b]
        shared = sum(1 for l in la if l in lb)
        size = len(la) + len(lb) - 2 * shared
        key = (size, lab)
        if best is None or key < best[0]:
            best = (key, a, b, lab)
    return best


def _run(net: _Net, cap: int):
    while True:
        step = _plan_step(net)
        if step is None:
            break
        (size, lab), a, b, _ = step
        if size > cap:
            return _slice(net, lab, cap)
        t, legs = _contract_pair(net.tensors[a], net.legs[a], net.tensors[b], net.legs[b])
        keep = [k for k in range(len(net.tensors)) if k not in (a, b)]
        net.tensors = [net.tensors[k] for k in keep] + [t]
        net.legs = [net.legs[k] for k in keep] + [legs]
    # outer product of what is left (dangling-only pieces and scalars)
    t = np.ones((), dtype=net.be.dtype) if not net.be.exact else np.array(GaussQ(1), dtype=object).reshape(())
    legs: list = []
    for tt, ll in zip(net.tensors, net.legs):
        t = np.multiply.outer(t, tt)
        legs = legs + list(ll)
    return t, legs


def _slice(net: _Net, lab: int, cap: int):
    """Fix edge `lab` to 0 and 1 and sum the two sub-contractions."""
    results = []
    for bit in (0, 1):
        sub = net.copy()
        for k, legs in enumerate(sub.legs):
            while lab in legs:
                ax = legs.index(lab)
                sub.tensors[k] = np.take(sub.tensors[k], bit, axis=ax)
                legs = legs[:ax] + legs[ax + 1:]
            sub.legs[k] = legs
        results.append(_run(sub, cap))
    (t0, l0), (t1, l1) = results
    perm = [l1.index(l) for l in l0]
    return t0 + np.transpose(t1, perm), l0


def _contract(grid: SignatureGrid, order=None, cap: int = ARITY_CAP):
    be = grid.backend
    inc = grid.incidence()
    tensors = []
    legs = []
    for v in range(len(grid.vertices)):
        t, l = _trace_self(np.asarray(grid.sig(v).tensor), list(inc[v]))
        tensors.append(t)
        legs.append(l)
    net = _Net(tensors, legs, be)
    if order is not None:
        for lab in order:
            own = [k for k, l in enumerate(net.legs) if lab in l]
            if len(own) != 2:
                continue
            a, b = own
            t, l = _contract_pair(net.tensors[a], net.legs[a], net.tensors[b], net.legs[b])
            keep = [k for k in range(len(net.tensors)) if k not in (a, b)]
            net.tensors = [net.tensors[k] for k in keep] + [t]
            net.legs = [net.legs[k] for k in keep] + [l]
    t, l = _run(net, cap)
    want = [("d", k) for k in range(len(grid.dangling))]
    if l:
        t = np.transpose(t, [l.index(x) for x in want])
    return t


def holant_contract(grid: SignatureGrid, order=None, cap: int = ARITY_CAP):
    """Holant by pairwise tensor contraction (greedy order unless given)."""
    if grid.dangling:
        raise GridError("holant_contract needs a closed grid; use gadget_signature")
    t = _contract(grid, order, cap)
    val = np.asarray(t).reshape(()).item()
    return grid.backend.scalar(val) if grid.backend.exact else complex(val)


def gadget_signature(g: SignatureGrid, cap: int = ARITY_CAP) -> Signature:
    k = len(g.dangling)
    if k > MAX_ARITY:
        raise ArityError(f"gadget has {k} dangling wires, cap is {MAX_ARITY}")
    t = _contract(g, None, cap)
    return Signature(np.asarray(t).reshape(-1), g.backend)


def holant(grid: SignatureGrid, method: str = "contract"):
    if method == "brute":
        return holant_bruteforce(grid)
    return holant_contract(grid)


# --- structural rewrites -----------------------------------------------------

def _eq2_name(grid: SignatureGrid) -> tuple[str, dict]:
    sigs = dict(grid.signatures)
    eq = from_symmetric([1, 0, 1], grid.backend)
    name = EQ2
    while name in sigs and not (sigs[name] == eq):
        name += "'"
    sigs[name] = eq
    return name, sigs


def make_bipartite(grid: SignatureGrid) -> SignatureGrid:
    """Subdivide every edge with an =2 vertex; originals go left."""
    if not grid.edges:
        return grid
    name, sigs = _eq2_name(grid)
    verts = list(grid.vertices)
    side = ["L"] * len(verts)
    edges = []
    for v, p, w, q in grid.edges:
        mid = len(verts)
        verts.append(name)
        side.append("R")
        edges.append((v, p, mid, 1))
        edges.append((mid, 2, w, q))
    return SignatureGrid(sigs, tuple(verts), tuple(edges), grid.dangling, tuple(side), grid.backend)


def insert_equalities_partial(grid: SignatureGrid, f_name: str) -> SignatureGrid:
    """Bipartize around f: f-vertices left, the rest right.

    Edges between two f-copies or between two non-f vertices get an =2
    vertex in the middle, placed on the side opposite its neighbours.
    """
    name, sigs = _eq2_name(grid)
    verts = list(grid.vertices)
    is_f = [n == f_name for n in verts]
    side = ["L" if x else "R" for x in is_f]
    edges = []
    changed = False
    for v, p, w, q in grid.edges:
        if is_f[v] != is_f[w]:
            edges.append((v, p, w, q))
            continue
        changed = True
        mid = len(verts)
        verts.append(name)
        side.append("R" if is_f[v] else "L")
        edges.append((v, p, mid, 1))
        edges.append((mid, 2, w, q))
    if not changed:
        sigs = dict(grid.signatures)
    return SignatureGrid(sigs, tuple(verts), tuple(edges), grid.dangling, tuple(side), grid.backend)


def disjoint_union(a: SignatureGrid, b: SignatureGrid) -> SignatureGrid:
    a.backend.check(b.backend)
    sigs = dict(a.signatures)
    rename = {}
    for name, s in b.signatures.items():
        new = name
        while new in sigs and not (sigs[new] == s):
            new += "'"
        sigs[new] = s
        rename[name] = new
    off = len(a.vertices)
    verts = list(a.vertices) + [rename[n] for n in b.vertices]
    edges = list(a.edges) + [(v + off, p, w + off, q) for v, p, w, q in b.edges]
    dang = list(a.dangling) + [(v + off, p) for v, p in b.dangling]
    bip = None
    if a.bipartition is not None and b.bipartition is not None:
        bip = tuple(a.bipartition) + tuple(b.bipartition)
    return SignatureGrid(sigs, tuple(verts), tuple(edges), tuple(dang), bip, a.backend)


def close_gadget(g: SignatureGrid, unaries: Sequence[Signature], names: Sequence[str] | None = None) -> SignatureGrid:
    """Attach unary vertices to the dangling ports, in order."""
    if len(unaries) != len(g.dangling):
        raise GridError(f"need {len(g.dangling)} unaries, got {len(unaries)}")
    sigs = dict(g.signatures)
    verts = list(g.vertices)
    edges = list(g.edges)
    for k, ((v, p), u) in enumerate(zip(g.dangling, unaries)):
        if u.arity != 1:
            raise ArityError("closing signatures must be unary")
        nm = names[k] if names else f"u{k}"
        while nm in sigs and not (sigs[nm] == u):
            nm += "'"
        sigs[nm] = u
        verts.append(nm)
        edges.append((v, p, len(verts) - 1, 1))
    return SignatureGrid(sigs, tuple(verts), tuple(edges), (), None, g.backend)


def relabel(grid: SignatureGrid, vperm: Sequence[int], eperm: Sequence[int] | None = None,
            flip: Sequence[bool] | None = None) -> SignatureGrid:
    """Renumber vertices (new index of old v is vperm[v]) and reorder/reorient edges."""
    n = len(grid.vertices)
    verts = [None] * n
    for old, new in enumerate(vperm):
        verts[new] = grid.vertices[old]
    edges = [(vperm[v], p, vperm[w], q) for v, p, w, q in grid.edges]
    if flip is not None:
        edges = [(w, q, v, p) if fl else (v, p, w, q) for (v, p, w, q), fl in zip(edges, flip)]
    if eperm is not None:
        new_edges = [None] * len(edges)
        for old, new in enumerate(eperm):
            new_edges[new] = edges[old]
        edges = new_edges
    dang = [(vperm[v], p) for v, p in grid.dangling]
    bip = None
    if grid.bipartition is not None:
        bip = [None] * n
        for old, new in enumerate(vperm):
            bip[new] = grid.bipartition[old]
    return SignatureGrid(grid.signatures, tuple(verts), tuple(edges), tuple(dang),
                         tuple(bip) if bip else None, grid.backend)


# --- file format -------------------------------------------------------------

def grid_to_dict(grid: SignatureGrid) -> dict:
    doc = {
        "signatures": {name: signature_literal(s) for name, s in sorted(grid.signatures.items())},
        "vertices": [{"sig": n} for n in grid.vertices],
        "edges": [list(e) for e in grid.edges],
    }
    if grid.dangling:
        doc["dangling"] = [list(d) for d in grid.dangling]
    if grid.bipartition is not None:
        doc["bipartition"] = list(grid.bipartition)
    return doc


def serialize_grid(grid: SignatureGrid) -> str:
    return json.dumps(grid_to_dict(grid), sort_keys=True, indent=1)


def grid_from_dict(doc, backend: Backend = EXACT) -> SignatureGrid:
    if not isinstance(doc, dict):
        raise GridError("top level must be an object", "$")
    for key in ("signatures", "vertices", "edges"):
        if key not in doc:
            raise GridError(f"missing required key {key!r}", "$")
    extra = set(doc) - {"signatures", "vertices", "edges", "dangling", "bipartition"}
    if extra:
        raise GridError(f"unknown keys {sorted(extra)}", "$")
    sigs = {}
    if not isinstance(doc["signatures"], dict):
        raise GridError("must be an object", "$.signatures")
    for name, obj in doc["signatures"].items():
        where = f"$.signatures[{name!r}]"
        if not isinstance(obj, dict) or not ({"coeffs"} <= set(obj) or "symmetric" in obj):
            raise GridError("expected {'arity','coeffs'} or {'symmetric'}", where)
        try:
            sigs[name] = parse_signature_literal(obj, backend)
        except (ValueError, ArityError) as exc:
            raise GridError(str(exc), where) from None
    if not isinstance(doc["vertices"], list):
        raise GridError("must be a list", "$.vertices")
    verts = []
    for k, v in enumerate(doc["vertices"]):
        if not isinstance(v, dict) or "sig" not in v:
            raise GridError("vertex must be {'sig': name}", f"$.vertices[{k}]")
        if v["sig"] not in sigs:
            raise GridError(f"unknown signature name {v['sig']!r}", f"$.vertices[{k}]")
        verts.append(v["sig"])
    for key in ("edges", "dangling"):
        for k, e in enumerate(doc.get(key, []) or []):
            if not isinstance(e, list) or not all(isinstance(x, int) and not isinstance(x, bool) for x in e):
                raise GridError("entries must be integer lists", f"$.{key}[{k}]")
    return SignatureGrid(sigs, tuple(verts), tuple(tuple(e) for e in doc["edges"]),
                         tuple(tuple(d) for d in doc.get("dangling", []) or []),
                         tuple(doc["bipartition"]) if doc.get("bipartition") is not None else None,
                         backend)


def parse_grid(text: str, backend: Backend = EXACT) -> SignatureGrid:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GridError(f"invalid JSON: {exc.msg}", f"line {exc.lineno} col {exc.colno}") from None
    return grid_from_dict(doc, backend)


def grids_equal(a: SignatureGrid, b: SignatureGrid) -> bool:
    return (
        a.vertices == b.vertices
        and a.edges == b.edges
        and a.dangling == b.dangling
        and a.bipartition == b.bipartition
        and set(a.signatures) == set(b.signatures)
        and all(a.signatures[k] == b.signatures[k] for k in a.signatures)
    )


def value_str(z) -> str:
    return format_scalar(z)
