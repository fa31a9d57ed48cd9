import itertools

import numpy as np
import pytest

from holant.entclass import (
    ProjectorBasis,
    classify3,
    find_pair_projection,
    find_triple_projection,
    ghz_criterion,
    is_entangled2,
    is_genuinely_entangled,
    w_criterion,
)
from holant.errors import ArityError
from holant.generators import genuinely_entangled_corpus, rand_invertible, slocc_image
from holant.scalars import EXACT, FLOAT
from holant.sigcore import Signature, apply_local, from_symmetric, named_state, proportional, tensor

EPR = from_symmetric([1, 0, 1])


def test_is_entangled2_examples():
    assert is_entangled2(EPR)
    plus = named_state("Plus")
    assert not is_entangled2(tensor(plus, plus))
    assert is_entangled2(from_symmetric([0, 1, 0]))
    with pytest.raises(ArityError):
        is_entangled2(named_state("GHZ", 3))


def test_classify3_examples():
    assert classify3(named_state("GHZ", 3)).tag == "GHZ"
    assert classify3(named_state("W", 3)).tag == "W"
    c = classify3(tensor(named_state("Zero"), EPR))
    assert (c.tag, c.split) == ("Biseparable", "1|23")
    p = named_state("Plus")
    assert classify3(tensor(tensor(p, p), p)).tag == "FullyProduct"
    assert classify3(Signature.from_values([0] * 8)).tag == "Zero"


def test_biseparable_splits():
    a = Signature.from_values([1, 2])
    f = tensor(EPR, a)  # wires 1,2 entangled, 3 alone
    assert str(classify3(f)) == "Biseparable(3|12)"


@pytest.mark.parametrize("be", [EXACT, FLOAT], ids=["exact", "float"])
def test_slocc_invariance(be):
    rng = np.random.default_rng(30)
    for _ in range(300):
        maps = [(w, rand_invertible(rng, be)) for w in (1, 2, 3)]
        assert classify3(apply_local(maps, named_state("GHZ", 3, be))).tag == "GHZ"
        assert classify3(apply_local(maps, named_state("W", 3, be))).tag == "W"


def test_criteria_mutually_exclusive_paths():
    rng = np.random.default_rng(31)
    vals = [0, 1, -1, 2]
    for _ in range(2000):
        f = Signature.from_values([vals[int(k)] for k in rng.integers(0, 4, 8)])
        if f.is_zero():
            continue
        tag = classify3(f).tag
        if ghz_criterion(f):
            assert tag == "GHZ"
        elif w_criterion(f):
            assert tag == "W"
        else:
            assert tag in ("Biseparable", "FullyProduct")


def test_genuinely_entangled_examples():
    assert is_genuinely_entangled(named_state("GHZ", 5))
    assert is_genuinely_entangled(from_symmetric([0, 1, 0]))
    assert not is_genuinely_entangled(tensor(EPR, EPR))


def test_pair_projection_ghz4():
    ch = find_pair_projection(named_state("GHZ", 4), 1, 2)
    assert sorted(w for w, _ in ch.steps) == [3, 4]
    assert proportional(ch.residual, EPR) is not None
    assert is_entangled2(ch.residual)


def test_pair_projection_w4():
    ch = find_pair_projection(named_state("W", 4), 1, 2)
    assert [k for _, k in ch.steps] == [ProjectorBasis.Zero, ProjectorBasis.Zero]
    assert ch.residual == from_symmetric([0, 1, 0])


def test_pair_projection_replays():
    f = named_state("W", 5)
    ch = find_pair_projection(f, 2, 4)
    assert ch.replay(f) == ch.residual


def test_pair_projection_slocc5():
    rng = np.random.default_rng(32)
    for k in range(12):
        f = slocc_image(rng, named_state("GHZ" if k % 2 else "W", 5), 2)
        for i, j in itertools.combinations(range(1, 6), 2):
            assert is_entangled2(find_pair_projection(f, i, j).residual)


def test_triple_projection_ghz4():
    ch = find_triple_projection(named_state("GHZ", 4))
    assert list(ch.steps) == [(4, ProjectorBasis.Plus)]
    assert proportional(ch.residual, named_state("GHZ", 3)) is not None


def test_triple_projection_w4():
    ch = find_triple_projection(named_state("W", 4))
    assert list(ch.steps) == [(4, ProjectorBasis.Zero)]
    assert ch.residual == named_state("W", 3)


def test_triple_projection_ternary_is_empty():
    f = named_state("W", 3)
    ch = find_triple_projection(f)
    assert ch.steps == () and ch.residual == f


def test_triple_projection_rejects_product():
    with pytest.raises(ArityError):
        find_triple_projection(tensor(EPR, EPR))


def test_triple_projection_corpus():
    rng = np.random.default_rng(33)
    for n in (4, 5, 6):
        for f in genuinely_entangled_corpus(rng, n, 15):
            ch = find_triple_projection(f)
            assert ch.residual.arity == 3
            assert is_genuinely_entangled(ch.residual)
            assert classify3(ch.residual).tag in ("GHZ", "W")
            assert ch.replay(f) == ch.residual
            assert len(ch.survivors) == 3


def test_arity7_greedy_without_backtracking():
    rng = np.random.default_rng(34)
    for k in range(100):
        f = slocc_image(rng, named_state("GHZ" if k % 2 else "W", 7), 2)
        assert find_triple_projection(f).backtracks == 0
