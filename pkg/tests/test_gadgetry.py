import numpy as np
import pytest

import oracles
from holant import gadgetry
from holant.dichotomy import classify_holant_plus, in_closure
from holant.entclass import classify3, is_entangled2
from holant.errors import HolantError, WitnessError
from holant.gadgetry import (
    HardnessWitness,
    binary_outside_km,
    binary_outside_km_gadget,
    build_hardness_witness,
    ghz_triangle_closed_form,
    in_frame_m,
    sandwich_closed_form,
    symmetric_binary_outside_km,
    symmetrize_ghz,
    symmetrize_w,
    triangle_gadget,
    verify_witness,
    w_lemma_parameters,
    w_triangle_closed_form,
)
from holant.generators import rand_invertible, rand_scalar, rand_signature, slocc_image
from holant.gridnet import gadget_signature
from holant.scalars import EXACT
from holant.selftest import perturb_witness_doc
from holant.sigcore import (
    LocalMap,
    apply_local,
    connected_factors,
    constants,
    from_symmetric,
    is_degenerate,
    named_state,
    proportional,
    to_symmetric,
)

C = constants()
GHZ3 = named_state("GHZ", 3)
W3 = named_state("W", 3)


def slocc3(rng, f):
    maps = [rand_invertible(rng) for _ in range(3)]
    return maps, apply_local([(w + 1, m) for w, m in enumerate(maps)], f)


def test_ghz_identity_triangle():
    res = symmetrize_ghz(GHZ3)
    assert res.first_good().output == GHZ3
    assert all(s == GHZ3 for s in res.signatures())


def test_triangle_oracle_agrees():
    rng = np.random.default_rng(50)
    for state in (GHZ3, W3):
        _, psi = slocc3(rng, state)
        g = triangle_gadget("psi", psi, 1)
        assert oracles.coeffs(gadget_signature(g)) == oracles.gadget(g)


@pytest.mark.parametrize("state, form", [(GHZ3, ghz_triangle_closed_form), (W3, w_triangle_closed_form)],
                         ids=["ghz", "w"])
def test_triangle_closed_forms(state, form):
    rng = np.random.default_rng(51)
    for _ in range(100):
        (A, B, Cm), psi = slocc3(rng, state)
        assert gadget_signature(triangle_gadget("psi", psi, 1)) == form(A, B, Cm)


def test_w_triangle_at_identity():
    # value frozen from the brute-force gadget oracle
    g = triangle_gadget("w", W3, 1)
    want = oracles.gadget(g)
    assert want == [oracles.gq(v) for v in (0, 1, 1, 0, 1, 0, 0, 1)]
    assert gadget_signature(g) == from_symmetric([0, 1, 0, 1])
    assert w_triangle_closed_form(C["I"], C["I"], C["I"]) == from_symmetric([0, 1, 0, 1])


def test_symmetrize_ghz_outputs():
    rng = np.random.default_rng(52)
    for _ in range(40):
        _, psi = slocc3(rng, GHZ3)
        res = symmetrize_ghz(psi)
        for c in res.candidates:
            assert to_symmetric(c.output) is not None
            assert c.nondegenerate == (not is_degenerate(c.output))
        assert res.first_good() is not None


def test_symmetrize_ghz_ke_diagnosis():
    psi = apply_local(C["K"], from_symmetric([2, 0, 0, 3]))
    res = symmetrize_ghz(psi)
    assert all(not c.nondegenerate for c in res.candidates)
    assert res.diagnosis is not None and "K∘E" in res.diagnosis


def test_symmetrize_ghz_wrong_class():
    with pytest.raises(HolantError):
        symmetrize_ghz(W3)


def test_symmetrize_w_random():
    rng = np.random.default_rng(53)
    seen_ghz = 0
    for _ in range(100):
        _, psi = slocc3(rng, W3)
        if in_frame_m(psi, "K") or in_frame_m(psi, "KX"):
            continue
        res = symmetrize_w(psi)
        assert to_symmetric(res.output) is not None
        assert not is_degenerate(res.output)
        assert classify3(res.output).tag in ("GHZ", "W")
        seen_ghz += classify3(res.output).tag == "GHZ"
        assert res.output == gadget_signature(res.gadget)
    assert seen_ghz > 50


def test_w_pregadget_leaves_km():
    psi = apply_local(C["K"], W3)
    assert in_frame_m(psi, "K")
    phi = from_symmetric([1, 2, 3])
    assert is_entangled2(phi) and not in_frame_m(phi, "K")
    res = symmetrize_w(psi, phi)
    assert res.pre_gadget is not None
    pre = res.pre_output
    assert not in_frame_m(pre, "K") and not in_frame_m(pre, "KX")
    # the K-frame picture has weight-two support
    kt = apply_local(C["K"].inverse(), pre)
    assert kt[(1, 0, 1)] != 0 or kt[(1, 1, 0)] != 0 or kt[(0, 1, 1)] != 0
    assert pre == gadget_signature(res.pre_gadget)


def test_symmetrize_w_requires_binary():
    with pytest.raises(HolantError):
        symmetrize_w(apply_local(C["K"], W3))
    with pytest.raises(HolantError):
        symmetrize_w(apply_local(C["K"], W3), apply_local(C["K"], from_symmetric([0, 1, 0])))


def test_binary_outside_km_examples():
    w2 = from_symmetric([0, 1, 0])
    if in_frame_m(w2, "K"):
        with pytest.raises(HolantError):
            binary_outside_km([w2], "K")
    else:
        assert binary_outside_km([w2], "K") == w2
    out = binary_outside_km([named_state("GHZ", 4)], "K")
    assert is_entangled2(out) and not in_frame_m(out, "K")
    bg = binary_outside_km_gadget([named_state("GHZ", 4)], "K")
    assert len(bg.assignment) == 2
    phi = from_symmetric([1, 2, 3])
    assert binary_outside_km([phi], "KX") == phi


def test_binary_outside_km_random():
    rng = np.random.default_rng(54)
    runs = 0
    while runs < 200:
        n = int(rng.integers(2, 6))
        f = rand_signature(rng, n, zero_prob=0.3, bound=2)
        frame = "K" if runs % 2 else "KX"
        try:
            out = binary_outside_km([f], frame)
        except HolantError:
            # only allowed when no factor of arity >= 2 is outside the frame
            assert all(len(ws) < 2 or in_frame_m(s, frame) for s, ws in connected_factors(f))
            continue
        assert out.arity == 2
        assert is_entangled2(out)
        assert not in_closure([out], "KM" if frame == "K" else "KXM")
        runs += 1


def _frame_phi_t(phi, T):
    P = LocalMap(phi.coeffs.reshape(2, 2), EXACT)
    Phi = (T.inverse() @ P @ T).matrix
    if Phi[1, 0] == 0:
        return None
    return [Phi[0, 1] / Phi[1, 0], Phi[0, 0] / Phi[1, 0], Phi[1, 1] / Phi[1, 0]]


def test_sandwich_closed_form():
    rng = np.random.default_rng(55)
    checked = 0
    while checked < 100:
        frame = "K" if checked % 2 else "KX"
        T = C[frame]
        w = rand_scalar(rng, nonzero=True)
        psi = apply_local(T, from_symmetric([rand_scalar(rng), w, 0, 0]))
        phi = rand_signature(rng, 2)
        if not is_entangled2(phi) or in_frame_m(phi, frame):
            continue
        phi_t = _frame_phi_t(phi, T)
        if phi_t is None:
            continue
        r = symmetric_binary_outside_km(psi, phi, frame)
        assert proportional(r.output, sandwich_closed_form(phi_t, r.v_prime, frame, EXACT)) is not None
        assert to_symmetric(r.output) is not None
        assert is_entangled2(r.output) and not in_frame_m(r.output, frame)
        checked += 1


def test_sandwich_closed_form_symmetric_nondegenerate():
    rng = np.random.default_rng(56)
    for _ in range(200):
        phi_t = [rand_scalar(rng) for _ in range(3)]
        # non-degenerate phi in the frame picture: phi00*1 - phi01*phi10 != 0
        if phi_t[0] - phi_t[1] * phi_t[2] == 0 or phi_t[1] == 0:
            continue
        v = rand_scalar(rng)
        out = sandwich_closed_form(phi_t, v, "K", EXACT)
        assert out[(0, 1)] == out[(1, 0)]
        assert not is_degenerate(out)


def test_w_lemma_alpha_zero_for_w3():
    form, alpha, A, B = w_lemma_parameters([0, 1, 0, 0], EXACT)
    assert (form, alpha, A, B) == (1, 0, 1, 0)


def test_witness_w3():
    w = build_hardness_witness([W3])
    assert w.final["theorem"] == "W-state lemma"
    assert w.final["class"] == "W"
    assert EXACT.parse(w.final["record"]["alpha"]) == 0
    rep = verify_witness(w, [W3])
    assert rep.passed and rep.first_failure is None
    kinds = [s.kind for s in w.steps]
    assert kinds[0] == "projection-chain" and kinds[-1] == "bipartite-rewrite"


def test_witness_random_ghz_branch():
    rng = np.random.default_rng(57)
    built = 0
    while built < 3:
        f = slocc_image(rng, from_symmetric([1, 0, 0, 2]), 2)
        if classify_holant_plus([f], build_witness=False).outcome == "FP":
            continue
        w = build_hardness_witness([f])
        assert w.final["class"] == "GHZ" and w.final["theorem"] == "GHZ-state theorem"
        assert verify_witness(w, [f]).passed
        built += 1


def test_witness_km_branch():
    F = [apply_local(C["K"], W3), from_symmetric([1, 2, 3])]
    w = build_hardness_witness(F)
    assert any(s.kind == "binary-extraction" for s in w.steps)
    assert verify_witness(w, F).passed


def test_witness_ghz3_is_tractable():
    with pytest.raises(HolantError):
        build_hardness_witness([GHZ3])


def test_witness_json_roundtrip():
    w = build_hardness_witness([W3])
    doc = w.to_json()
    back = HardnessWitness.from_json(doc)
    assert back.to_json() == doc
    assert verify_witness(back, [W3]).passed
    assert "W-state lemma" in w.transcript()


def test_verify_empty_steps():
    w = build_hardness_witness([W3])
    empty = HardnessWitness(w.F, [], w.final, w.backend)
    rep = verify_witness(empty)
    assert rep.passed and rep.warnings


def test_verify_rejects_wrong_input_set():
    w = build_hardness_witness([W3])
    rep = verify_witness(w, [from_symmetric([0, 1, 0, 1])])
    assert not rep.passed and rep.first_failure[0] == "input"


def test_verify_rejects_tampering():
    rng = np.random.default_rng(58)
    doc = build_hardness_witness([W3]).to_json()
    for _ in range(20):
        bent, path = perturb_witness_doc(doc, rng)
        try:
            rep = verify_witness(HardnessWitness.from_json(bent), [W3])
        except HolantError:
            continue  # the tampered document no longer parses as a grid
        assert not rep.passed, path
        assert rep.first_failure is not None


def test_builder_never_returns_unverified(monkeypatch):
    real = gadgetry.w_lemma_record

    def bent(psi_s):
        rec = real(psi_s)
        rec["alpha"] = "1"
        return rec

    monkeypatch.setattr(gadgetry, "w_lemma_record", bent)
    with pytest.raises(WitnessError):
        build_hardness_witness([W3])
