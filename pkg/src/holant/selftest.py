"""Invariant suites behind ``holant selftest``, plus witness fault injection."""

from __future__ import annotations

import copy

import numpy as np

from .dichotomy import classify_holant_plus
from .entclass import classify3, find_pair_projection, find_triple_projection, is_genuinely_entangled
from .errors import HolantError
from .fasteval import eval_affine_grid, eval_binary_grid, eval_equality_grid, eval_km_grid
from .gadgetry import (
    HardnessWitness,
    build_hardness_witness,
    ghz_triangle_closed_form,
    triangle_gadget,
    verify_witness,
    w_triangle_closed_form,
)
from .generators import (
    class_sampler,
    genuinely_entangled_corpus,
    rand_invertible,
    rand_orthogonal,
    random_bipartite_grid,
    random_forest_grid,
    random_grid,
)
from .gridnet import gadget_signature, holant_bruteforce
from .holo import complex_qr, is_triangular, transform_bipartite, transform_orthogonal
from .scalars import EXACT, Backend, format_scalar, parse_scalar
from .sigcore import apply_local, from_symmetric, named_state


def _tol_eq(be: Backend, a, b, rel: float = 1e-6) -> bool:
    if be.exact:
        return a == b
    return abs(complex(a) - complex(b)) <= rel * max(1.0, abs(complex(b)))


def check_holographic(rng, count, be=EXACT):
    bad = 0
    for _ in range(count):
        g = random_bipartite_grid(rng, be, 8, 3)
        M = rand_invertible(rng, be)
        bad += not _tol_eq(be, holant_bruteforce(transform_bipartite(g, M)), holant_bruteforce(g))
    return bad


def check_orthogonal(rng, count, be=EXACT):
    bad = 0
    for _ in range(count):
        g = random_grid(rng, lambda r, n, b: class_sampler("T")(r, n, b) if n < 2 else
                        _dense(r, n, b), be, 8, 3)
        O = rand_orthogonal(rng, be)
        bad += not _tol_eq(be, holant_bruteforce(transform_orthogonal(g, O)), holant_bruteforce(g))
    return bad


def _dense(rng, n, be):
    from .generators import rand_signature

    return rand_signature(rng, n, be, zero_prob=0.2)


def check_closed_forms(rng, count):
    bad = 0
    for _ in range(count):
        A, B, C = (rand_invertible(rng) for _ in range(3))
        for state, form in (("GHZ", ghz_triangle_closed_form), ("W", w_triangle_closed_form)):
            psi = apply_local([(1, A), (2, B), (3, C)], named_state(state, 3))
            bad += not (gadget_signature(triangle_gadget("psi", psi, 1)) == form(A, B, C))
    return bad


def check_slocc(rng, count):
    bad = 0
    for _ in range(count):
        maps = [(w, rand_invertible(rng)) for w in (1, 2, 3)]
        bad += classify3(apply_local(maps, named_state("GHZ", 3))).tag != "GHZ"
        bad += classify3(apply_local(maps, named_state("W", 3))).tag != "W"
    return bad


def check_projections(rng, count, arities=(4, 5)):
    bad = 0
    for n in arities:
        for f in genuinely_entangled_corpus(rng, n, count):
            try:
                ch = find_triple_projection(f)
                bad += not is_genuinely_entangled(ch.residual)
                find_pair_projection(f, 1, n)
            except HolantError:
                bad += 1
    return bad


def check_fasteval(rng, count):
    bad = 0
    routes = (
        ("T", eval_binary_grid, random_grid),
        ("E", eval_equality_grid, random_grid),
        ("KE", lambda g: eval_equality_grid(g, "K"), random_grid),
        ("Affine", eval_affine_grid, random_grid),
        ("KM", lambda g: eval_km_grid(g, "K"), random_forest_grid),
        ("KXM", lambda g: eval_km_grid(g, "KX"), random_forest_grid),
    )
    for klass, fn, gen in routes:
        for _ in range(count):
            g = gen(rng, class_sampler(klass), EXACT, 10)
            bad += fn(g) != holant_bruteforce(g)
    return bad


def check_dichotomy(rng, count):
    bad = 0
    fixtures = [
        ([from_symmetric([1, 0, 0, 1])], "FP"),
        ([from_symmetric([1, 2, 3]), from_symmetric([0, 1, 0])], "FP"),
        ([from_symmetric([2, 0, -2, 0])], "FP"),
        ([from_symmetric([0, 1, 0, 0])], "SharpPHard"),
    ]
    for F, want in fixtures:
        v = classify_holant_plus(F)
        bad += v.outcome != want
        if v.witness is not None:
            bad += not verify_witness(v.witness, F).passed
    return bad


def check_qr(rng, count):
    bad = 0
    for _ in range(count):
        M = rand_invertible(rng, Backend("float"))
        for side in ("upper", "lower"):
            r = complex_qr(M, side)
            bad += not (r.product().close(M) and is_triangular(r.R, side))
    return bad


def perturb_witness_doc(doc: dict, rng) -> tuple[dict, str]:
    """Copy of a witness document with one coefficient changed; returns the path."""
    doc = copy.deepcopy(doc)
    slots = []

    def walk(node, path):
        if isinstance(node, dict):
            for k, v in node.items():
                if k in ("theorem", "kind", "name", "note", "frame", "backend", "class",
                         "properties", "ternary_source", "binary_source", "source",
                         "edges", "dangling", "vertices", "bipartition", "arity", "form",
                         "omega_j", "decomposition_exact", "alpha_is_pm_i", "csp_verdict",
                         "csp_set_size", "unary_choice_flagged"):
                    continue
                walk(v, path + [k])
        elif isinstance(node, list):
            for j, v in enumerate(node):
                walk(v, path + [j])
        elif isinstance(node, str):
            slots.append(path)

    walk(doc, [])
    path = slots[int(rng.integers(0, len(slots)))]
    parent = doc
    for key in path[:-1]:
        parent = parent[key]
    exact = doc.get("backend", "exact") == "exact"
    old = parse_scalar(parent[path[-1]], exact)
    delta = complex(*rng.integers(1, 4, size=2)) if not exact else None
    if exact:
        from .scalars import GaussQ

        new = old + GaussQ(int(rng.integers(1, 4)), int(rng.integers(-3, 4)))
    else:
        new = old + delta
    parent[path[-1]] = format_scalar(new)
    return doc, "/".join(str(p) for p in path)


def check_tamper(rng, count):
    bad = 0
    F = [from_symmetric([0, 1, 0, 0])]
    w = build_hardness_witness(F)
    doc = w.to_json()
    for _ in range(count):
        bent, _ = perturb_witness_doc(doc, rng)
        try:
            rep = verify_witness(HardnessWitness.from_json(bent), F)
            bad += rep.passed or rep.first_failure is None
        except HolantError:
            pass
    return bad


SUITES = [
    ("holographic-invariance", check_holographic, 20, 200),
    ("orthogonal-invariance", check_orthogonal, 20, 200),
    ("triangle-closed-forms", check_closed_forms, 20, 200),
    ("slocc-invariance", check_slocc, 50, 500),
    ("projection-chains", check_projections, 5, 50),
    ("fast-evaluators", check_fasteval, 10, 100),
    ("dichotomy-fixtures", check_dichotomy, 1, 1),
    ("complex-qr", check_qr, 50, 500),
    ("witness-tamper", check_tamper, 10, 50),
]


def run_selftest(seed: int = 0, quick: bool = False) -> list[dict]:
    out = []
    for name, fn, n_quick, n_full in SUITES:
        rng = np.random.default_rng([seed, len(out)])
        n = n_quick if quick else n_full
        try:
            failures = int(fn(rng, n))
            err = None
        except Exception as exc:  # a crash is a failure, reported by name
            failures = -1
            err = f"{type(exc).__name__}: {exc}"
        entry = {"suite": name, "cases": n, "failures": failures, "passed": failures == 0}
        if err:
            entry["error"] = err
        out.append(entry)
    return out
