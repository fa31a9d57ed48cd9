import itertools

import numpy as np
import pytest

from holant.dichotomy import (
    check_fp_certificate,
    classify_csp,
    classify_holant_plus,
    classify_holant_star,
    find_common_local_basis,
    in_closure,
    in_family,
    is_affine,
)
from holant.errors import ZeroSignatureError
from holant.fasteval import eval_auto
from holant.gadgetry import verify_witness
from holant.generators import class_sampler, rand_orthogonal, rand_scalar, rand_signature, random_grid
from holant.gridnet import holant_bruteforce
from holant.scalars import EXACT, GaussQ
from holant.sigcore import Signature, apply_local, constants, from_symmetric, named_state

I = GaussQ(0, 1)
C = constants()
GHZ3 = named_state("GHZ", 3)
W3 = named_state("W", 3)
KGHZ = from_symmetric([2, 0, -2, 0])


def test_kghz_fixture_is_k_image():
    # hand-derived: K on each wire of |000>+|111> gives [2,0,-2,0]
    assert apply_local(C["K"], GHZ3) == KGHZ


def test_in_family_examples():
    assert in_family(named_state("GHZ", 5), "E")
    assert in_family(W3, "M") and not in_family(W3, "E")
    f = from_symmetric([1, 1, 1])
    assert not in_family(f, "E") and not in_family(f, "M")
    with pytest.raises(ZeroSignatureError):
        in_family(Signature.from_values([0, 0]), "E")


def test_in_closure_examples():
    assert in_closure([from_symmetric([1, 0, 1]), GHZ3], "E")
    assert in_closure([KGHZ], "KE")
    assert not in_closure([W3], "T")
    assert in_closure([apply_local(C["K"], W3)], "KM")
    assert in_closure([apply_local(C["KX"], W3)], "KXM")


def test_in_closure_monotone():
    rng = np.random.default_rng(40)
    for klass, base in (("E", "E"), ("KE", "KE"), ("KM", "KM"), ("KXM", "KXM"), ("T", "T")):
        s = class_sampler(klass)
        F = [s(rng, int(rng.integers(1, 5)), EXACT) for _ in range(4)]
        assert in_closure(F, base)
        for r in range(1, 4):
            for sub in itertools.combinations(F, r):
                assert in_closure(sub, base)


def test_common_basis_ghz4():
    b = find_common_local_basis([named_state("GHZ", 4)])
    assert b.klass == "orthogonal" and b.L == C["I"]


def test_common_basis_ktype():
    b = find_common_local_basis([KGHZ])
    assert b.klass == "Ktype"
    assert in_closure([KGHZ], "Eform", b.L.inverse())


def test_common_basis_random_orthogonal():
    rng = np.random.default_rng(41)
    for _ in range(20):
        O = rand_orthogonal(rng)
        F = [apply_local(O, GHZ3)]
        b = find_common_local_basis(F)
        assert b is not None and b.klass == "orthogonal"
        assert in_closure(F, "Eform", b.L.inverse())
        # columns of L match columns of O up to order and scale
        Linv_O = (b.L.inverse() @ O).matrix
        diag = Linv_O[0, 1] == 0 and Linv_O[1, 0] == 0
        anti = Linv_O[0, 0] == 0 and Linv_O[1, 1] == 0
        assert diag or anti


def test_common_basis_absent():
    assert find_common_local_basis([W3]) is None


def test_is_affine_examples():
    assert is_affine(GHZ3) is not None
    assert is_affine(W3) is None
    form = is_affine(Signature.from_values([1, I, I, -1]))
    assert form is not None and all(v == 0 for row in form.q for v in row)


def _brute_affine_set():
    """Every arity-2 affine signature with values in {0, +-1, +-i}, by enumeration."""
    out = set()
    units = [GaussQ(1), I, GaussQ(-1), -I]
    rows = [(0, 0), (0, 1), (1, 0), (1, 1)]
    for m in range(3):
        for A in itertools.product(rows, repeat=m):
            for b in itertools.product((0, 1), repeat=m):
                for l1, l2 in itertools.product(range(4), repeat=2):
                    for q in (0, 1):
                        for c in units:
                            vals = []
                            for x1, x2 in itertools.product((0, 1), repeat=2):
                                if any((a1 * x1 + a2 * x2) % 2 != bb for (a1, a2), bb in zip(A, b)):
                                    vals.append(GaussQ(0))
                                    continue
                                e = (l1 * x1 + l2 * x2 + 2 * q * x1 * x2) % 4
                                vals.append(c * units[e])
                            if any(vals):
                                out.add(tuple(vals))
    return out


def test_is_affine_exhaustive_arity2():
    want = _brute_affine_set()
    alphabet = [GaussQ(0), GaussQ(1), GaussQ(-1), I, -I]
    for vals in itertools.product(alphabet, repeat=4):
        if not any(vals):
            continue
        f = Signature.from_values(vals)
        form = is_affine(f)
        assert (form is not None) == (vals in want), vals
        if form is not None:
            assert form.evaluate(EXACT) == f


def test_is_affine_forms_reproduce():
    rng = np.random.default_rng(42)
    s = class_sampler("Affine")
    for _ in range(200):
        f = s(rng, int(rng.integers(1, 6)), EXACT)
        form = is_affine(f)
        assert form is not None and form.evaluate(EXACT) == f


def test_star_examples():
    binaries = [from_symmetric([1, 2, 3]), Signature.from_values([1, 2, 3, 4])]
    v = classify_holant_star(binaries)
    assert v.outcome == "FP" and v.reason.tag == "Tclosure"
    assert classify_holant_star([W3]).outcome == "SharpPHard"
    v = classify_holant_star([GHZ3, from_symmetric([1, 0, 1])])
    assert v.outcome == "FP" and v.reason.tag == "Eform" and v.reason.L == C["I"]


def test_csp_examples():
    v = classify_csp([GHZ3, Signature.from_values([1, I])])
    assert v.outcome == "FP" and v.reason.tag == "Affine"
    v = classify_csp([named_state("GHZ", 5)])
    assert v.outcome == "FP"
    assert classify_csp([W3]).outcome == "SharpPHard"


def test_plus_examples():
    assert classify_holant_plus([GHZ3]).outcome == "FP"
    v = classify_holant_plus([W3])
    assert v.outcome == "SharpPHard"
    assert verify_witness(v.witness, [W3]).passed


def test_plus_random_slocc_ghz():
    rng = np.random.default_rng(43)
    done = 0
    while done < 3:
        M = [(w, C["I"]) for w in (1, 2, 3)]
        A = [[rand_scalar(rng, nonzero=True) for _ in range(2)] for _ in range(2)]
        M[0] = (1, type(C["I"]).of(A))
        if not M[0][1].invertible:
            continue
        f = apply_local(M, from_symmetric([1, 0, 0, 2]))
        v = classify_holant_plus([f])
        if v.outcome == "FP":
            continue
        assert verify_witness(v.witness, [f]).passed
        done += 1


def test_fp_certificates_recheck():
    rng = np.random.default_rng(44)
    for klass in ("T", "E", "KE", "Affine", "KM", "KXM"):
        s = class_sampler(klass)
        for _ in range(10):
            F = [s(rng, int(rng.integers(1, 5)), EXACT) for _ in range(3)]
            v = classify_holant_plus(F)
            assert v.outcome == "FP", klass
            assert check_fp_certificate(F, v)


def test_adding_unaries_keeps_fp():
    rng = np.random.default_rng(45)
    for klass in ("T", "E", "KE", "KM", "KXM"):
        s = class_sampler(klass)
        for _ in range(10):
            F = [s(rng, int(rng.integers(2, 5)), EXACT) for _ in range(2)]
            assert classify_holant_star(F).outcome == "FP"
            u = rand_signature(rng, 1)
            assert classify_holant_star(F + [u]).outcome == "FP", klass


def test_scalar_invariance():
    rng = np.random.default_rng(46)
    sets = [[GHZ3], [W3], [KGHZ], [from_symmetric([1, 1, 1])],
            [apply_local(C["K"], W3)], [from_symmetric([1, 2, 0, 1])]]
    for F in sets:
        base = classify_holant_plus(F, build_witness=False).outcome
        for _ in range(3):
            lam = rand_scalar(rng, nonzero=True)
            G = [f.scaled(lam) for f in F]
            assert classify_holant_plus(G, build_witness=False).outcome == base
            assert classify_holant_star(G).outcome == classify_holant_star(F).outcome
            assert classify_csp(G).outcome == classify_csp(F).outcome


def test_fp_sets_have_matching_fast_route():
    rng = np.random.default_rng(47)
    for klass in ("T", "E", "KE", "Affine", "KM", "KXM"):
        s = class_sampler(klass)
        for _ in range(15):
            g = random_grid(rng, s, EXACT, 10, 4)
            F = list(g.signatures.values())
            assert classify_holant_plus(F, build_witness=False).outcome == "FP"
            value, route = eval_auto(g)
            assert route != "fallback", klass
            assert value == holant_bruteforce(g)
