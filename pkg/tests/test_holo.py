import cmath

import numpy as np
import pytest

import oracles
from holant.errors import GridError, HolantError, InexactError
from holant.generators import (
    rand_invertible,
    rand_orthogonal,
    rand_scalar,
    rand_signature,
    random_bipartite_grid,
    random_grid,
)
from holant.gridnet import build_grid, grids_equal, holant_bruteforce
from holant.holo import (
    complex_qr,
    is_omega_normalised,
    is_orthogonal,
    is_triangular,
    omega_normalize,
    root_order,
    solve_ata_propto_x,
    transform_bipartite,
    transform_orthogonal,
)
from holant.scalars import EXACT, FLOAT, GaussQ
from holant.sigcore import LocalMap, apply_local, constants, from_symmetric, proportional

I = GaussQ(0, 1)
C = constants()


def dense(rng, n, be):
    return rand_signature(rng, n, be, zero_prob=0.2)


def test_transform_identity():
    rng = np.random.default_rng(20)
    g = random_bipartite_grid(rng, EXACT, 6, 3)
    assert grids_equal(transform_bipartite(g, C["I"]), g)
    h = random_grid(rng, dense, EXACT, 6, 3)
    assert grids_equal(transform_orthogonal(h, C["I"]), h)


@pytest.mark.parametrize("be", [EXACT, FLOAT], ids=["exact", "float"])
def test_valiant_invariance(be):
    rng = np.random.default_rng(21)
    for _ in range(100):
        g = random_bipartite_grid(rng, be, 10, 4)
        M = rand_invertible(rng, be)
        a, b = holant_bruteforce(transform_bipartite(g, M)), holant_bruteforce(g)
        if be.exact:
            assert a == b
        else:
            assert abs(a - b) <= 1e-6 * max(1.0, abs(b))


def test_valiant_against_oracle():
    rng = np.random.default_rng(22)
    for _ in range(15):
        g = random_bipartite_grid(rng, EXACT, 6, 3)
        M = rand_invertible(rng)
        assert oracles.holant(transform_bipartite(g, M)) == oracles.holant(g)


def test_transform_k_recovers_equality():
    two = from_symmetric([2, 0, -2])
    g = build_grid([("f", two), ("g", from_symmetric([1, 0, 1]))], [(0, 1, 1, 1), (0, 2, 1, 2)],
                   bipartition=("L", "R"))
    t = transform_bipartite(g, C["K"].inverse())
    assert proportional(t.signatures["f"], from_symmetric([1, 0, 1])) is not None
    assert holant_bruteforce(t) == holant_bruteforce(g)


def test_transform_needs_bipartition():
    g = build_grid([from_symmetric([1, 0, 1])], [(0, 1, 0, 2)])
    with pytest.raises(GridError):
        transform_bipartite(g, C["K"])


def test_x_fixes_equality():
    eq = from_symmetric([1, 0, 1])
    assert apply_local(C["X"], eq) == eq
    g = build_grid([eq] * 3, [(0, 2, 1, 1), (1, 2, 2, 1), (2, 2, 0, 1)])
    assert holant_bruteforce(transform_orthogonal(g, C["X"])) == holant_bruteforce(g)


@pytest.mark.parametrize("be", [EXACT, FLOAT], ids=["exact", "float"])
def test_orthogonal_invariance(be):
    rng = np.random.default_rng(23)
    for _ in range(100):
        g = random_grid(rng, dense, be, 10, 4)
        O = rand_orthogonal(rng, be)
        assert is_orthogonal(O)
        a, b = holant_bruteforce(transform_orthogonal(g, O)), holant_bruteforce(g)
        if be.exact:
            assert a == b
        else:
            assert abs(a - b) <= 1e-6 * max(1.0, abs(b))


def test_rotation_float():
    th = 0.7 + 0.3j
    c, s = cmath.cos(th), cmath.sin(th)
    O = LocalMap.of([[c, s], [-s, c]], FLOAT)
    rng = np.random.default_rng(24)
    g = random_grid(rng, dense, FLOAT, 9, 3)
    a, b = holant_bruteforce(transform_orthogonal(g, O)), holant_bruteforce(g)
    assert abs(a - b) <= 1e-6 * max(1.0, abs(b))


def test_non_orthogonal_rejected():
    g = build_grid([from_symmetric([1, 0, 1])], [(0, 1, 0, 2)])
    with pytest.raises(HolantError):
        transform_orthogonal(g, C["K"])


def test_qr_upper_triangular_input():
    M = LocalMap.of([[2, 3], [0, 5]])
    r = complex_qr(M)
    assert r.kind == "orthogonal" and r.Q == C["I"] and r.R == M


def test_qr_of_k():
    r = complex_qr(C["K"])
    assert r.kind == "K" and r.Q == C["K"] and r.R == C["I"]


def test_qr_exact_pythagorean():
    M = LocalMap.of([[3, 1], [4, 7]])
    r = complex_qr(M)
    assert r.Q == LocalMap.of([[GaussQ(3, 0) / 5, GaussQ(-4) / 5], [GaussQ(4) / 5, GaussQ(3) / 5]])
    assert r.product() == M


def test_qr_exact_inexact_sqrt():
    with pytest.raises(InexactError):
        complex_qr(LocalMap.of([[1, 0], [1, 1]]))


def test_qr_singular():
    with pytest.raises(HolantError):
        complex_qr(LocalMap.of([[1, 2], [2, 4]]))


@pytest.mark.parametrize("side", ["upper", "lower"])
def test_qr_random_float(side):
    rng = np.random.default_rng(25)
    for _ in range(300):
        M = rand_invertible(rng, FLOAT)
        r = complex_qr(M, side)
        assert r.product().close(M)
        assert is_triangular(r.R, side)
        assert r.kind == "orthogonal" and is_orthogonal(r.Q)


@pytest.mark.parametrize("side", ["upper", "lower"])
def test_qr_planted_isotropic(side):
    rng = np.random.default_rng(26)
    for _ in range(50):
        D = LocalMap.of([[rand_scalar(rng, nonzero=True), 0], [0, rand_scalar(rng, nonzero=True)]])
        U = LocalMap.of([[1, rand_scalar(rng)], [0, 1]] if side == "upper" else [[1, 0], [rand_scalar(rng), 1]])
        frame = C["K"] if rng.random() < 0.5 else C["KX"]
        M = frame @ D @ U
        r = complex_qr(M, side)
        assert r.kind in ("K", "KX")
        assert r.product() == M and is_triangular(r.R, side)


def test_ata_examples():
    s = solve_ata_propto_x(C["K"])
    assert s.form == "KD" and s.D == C["I"]
    assert solve_ata_propto_x(C["I"]) is None
    D = LocalMap.of([[2, 0], [0, 3]])
    s = solve_ata_propto_x(C["KX"] @ D)
    assert s.form == "KXD" and s.D == D


def test_ata_random_against_direct_product():
    rng = np.random.default_rng(27)
    for k in range(400):
        if k % 4 == 0:
            D = LocalMap.of([[rand_scalar(rng, nonzero=True), 0], [0, rand_scalar(rng, nonzero=True)]])
            A = (C["K"] if k % 8 == 0 else C["KX"]) @ D
        else:
            A = rand_invertible(rng)
        a = oracles.mat(A)
        P = oracles.matmul(oracles.transpose(a), a)
        zero = oracles.ZERO
        want = P[0][0] == zero and P[1][1] == zero and P[0][1] != zero
        s = solve_ata_propto_x(A)
        assert (s is not None) == want
        if s:
            assert s.reconstruct() == A


def test_omega_examples():
    t, y = omega_normalize([0, 1, 2], EXACT)
    assert t.j == 0
    t, y = omega_normalize([1, 1, 2], EXACT)
    assert t.j == 0
    lam = cmath.exp(1j * cmath.pi / 3)
    assert root_order(lam, FLOAT) == 6
    t, y = omega_normalize([1, 1, lam], FLOAT)
    assert t.j in (1, 2)
    assert abs(y[2] / y[0] + 1) < 1e-9
    assert is_omega_normalised(y, FLOAT)


def test_omega_three_candidates():
    # the chosen transform is the first of the three that passes the test
    for k in range(1, 13):
        lam = cmath.exp(2j * cmath.pi * k / 12)
        t, y = omega_normalize([1, 0.5, lam], FLOAT)
        cands = [j for j in range(3) if is_omega_normalised([1, 0, lam * cmath.exp(2j * cmath.pi * 2 * j / 3)], FLOAT)]
        assert t.j == cands[0]


def test_omega_unary_case():
    with pytest.raises(HolantError):
        omega_normalize([0, 1, 0], EXACT, require_unary=True)
    t, y = omega_normalize([0, 1, 0], EXACT, unary=[1, 1])
    assert t.j == 0 and tuple(y) == (1, 1)


def test_constants_exact():
    assert C["K"].T @ C["K"] == C["X"].scaled(2)
    assert [C["KX"][0, 0], C["KX"][1, 0]] == [1, -I]
    assert [C["KX"][0, 1], C["KX"][1, 1]] == [1, I]
