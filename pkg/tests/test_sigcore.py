import numpy as np
import pytest

import oracles
from holant.errors import ArityError, BackendMismatch, ZeroSignatureError
from holant.generators import rand_invertible, rand_signature
from holant.scalars import EXACT, FLOAT, GaussQ
from holant.sigcore import (
    LocalMap,
    Signature,
    apply_local,
    connected_factors,
    constants,
    from_symmetric,
    is_degenerate,
    named_state,
    permute_wires,
    project,
    proportional,
    tensor,
    tensor_all,
    to_symmetric,
)

I = GaussQ(0, 1)


def sig(*vals, be=EXACT):
    return Signature.from_values(vals, be)


def test_from_symmetric():
    assert from_symmetric([1, 0, 1]) == sig(1, 0, 0, 1)
    assert from_symmetric([0, 1, 0]) == sig(0, 1, 1, 0)
    assert from_symmetric([1, 0, 0, 1]) == sig(1, 0, 0, 0, 0, 0, 0, 1)


def test_to_symmetric():
    assert to_symmetric(sig(0, 1, 0, 0)) is None
    assert to_symmetric(from_symmetric([2, 3, 5])).values == (2, 3, 5)


def test_bit_order_wire_one_is_msb():
    f = sig(0, 0, 1, 0)  # |10>
    assert f[(1, 0)] == 1
    assert project(f, 1, (0, 1)) == sig(1, 0)


def test_tensor_examples():
    epr = from_symmetric([1, 0, 1])
    out = tensor(sig(1, 0), epr)
    assert out == sig(1, 0, 0, 1, 0, 0, 0, 0)
    sq = tensor(epr, epr)
    ones = [k for k, v in enumerate(sq.coeffs) if v]
    assert ones == [0b0000, 0b0011, 0b1100, 0b1111]


def test_tensor_infers_float_backend():
    a = sig(1, 2, be=FLOAT)
    assert tensor_all([a, a]).backend == FLOAT


def test_apply_local_examples():
    c = constants()
    assert apply_local(c["X"], sig(1, 0)) == sig(0, 1)
    assert apply_local(c["K"], from_symmetric([1, 0, 1])) == from_symmetric([2, 0, -2])


def test_constants():
    c = constants()
    assert c["K"] == LocalMap.of([[1, 1], [I, -I]])
    assert c["K"].T @ c["K"] == c["X"].scaled(2)
    assert c["KX"].T @ c["KX"] == c["X"].scaled(2)
    assert c["KX"] == LocalMap.of([[1, 1], [-I, I]])
    hth = c["H"].T @ c["H"]
    assert hth[0, 1] == 0 and hth[1, 0] == 0 and hth[0, 0] == hth[1, 1] != 0


def test_apply_local_matches_oracle():
    rng = np.random.default_rng(1)
    for n in (1, 2, 3):
        f = rand_signature(rng, n)
        maps = [rand_invertible(rng) for _ in range(n)]
        got = apply_local([(w + 1, m) for w, m in enumerate(maps)], f)
        want = oracles.apply_maps([oracles.mat(m) for m in maps], oracles.coeffs(f))
        assert oracles.coeffs(got) == want


def test_apply_local_roundtrip():
    rng = np.random.default_rng(2)
    for _ in range(50):
        n = int(rng.integers(1, 5))
        f = rand_signature(rng, n)
        maps = [(w, rand_invertible(rng)) for w in range(1, n + 1)]
        back = [(w, m.inverse()) for w, m in maps]
        assert apply_local(back, apply_local(maps, f)) == f


def test_connected_factors_examples():
    f = tensor(sig(1, 0), from_symmetric([1, 0, 1]))
    assert [w for _, w in connected_factors(f)] == [(1,), (2, 3)]
    g = tensor_all([sig(1, 1), sig(1, -1), sig(1, 1)])
    assert [w for _, w in connected_factors(g)] == [(1,), (2,), (3,)]


def test_connected_factors_reassemble():
    rng = np.random.default_rng(3)
    for _ in range(500):
        parts = []
        left = int(rng.integers(1, 7))
        while left:
            k = int(rng.integers(1, left + 1))
            parts.append(rand_signature(rng, k))
            left -= k
        f = tensor_all(parts)
        perm = [int(x) + 1 for x in rng.permutation(f.arity)]
        f = permute_wires(f, perm)
        fac = connected_factors(f)
        assert fac.reassemble(EXACT) == f
        assert len(fac) >= 1


def test_is_degenerate():
    g = sig(2, 3)
    assert is_degenerate(tensor(g, g))
    assert not is_degenerate(from_symmetric([1, 0, 1]))
    assert not is_degenerate(named_state("GHZ", 4))


def test_proportional_examples():
    assert proportional(sig(2, 0, 0, 2), from_symmetric([1, 0, 1])) == 2
    assert proportional(sig(1, 0), sig(0, 1)) is None
    K2 = apply_local(constants()["K"], from_symmetric([1, 0, 1]))
    assert proportional(K2, from_symmetric([1, 0, -1])) == 2


def test_proportional_equivalence():
    rng = np.random.default_rng(4)
    for _ in range(100):
        f = rand_signature(rng, 2)
        lam = GaussQ(int(rng.integers(1, 4)), int(rng.integers(-3, 4)))
        mu = GaussQ(int(rng.integers(-3, 4)), 1)
        g = f.scaled(lam)
        h = g.scaled(mu)
        assert proportional(f, f) == 1
        assert proportional(g, f) == lam
        assert proportional(f, g) == 1 / lam
        assert proportional(h, f) == lam * mu


def test_named_state():
    assert named_state("W", 3) == from_symmetric([0, 1, 0, 0])
    assert named_state("GHZ", 2) == from_symmetric([1, 0, 1])
    assert named_state("Minus") == sig(1, -1)


def test_errors():
    with pytest.raises(ArityError):
        Signature.from_values([1, 2, 3])
    with pytest.raises(ZeroSignatureError):
        connected_factors(sig(0, 0))
    with pytest.raises(BackendMismatch):
        apply_local(constants(FLOAT)["X"], sig(1, 0))
