"""Gadget constructions for ternary symmetrisation, binary extraction, and
hardness witnesses with an independent verifier."""

from __future__ import annotations

import cmath
import itertools
from dataclasses import dataclass, field

import numpy as np

from .dichotomy import _star_verdict, affine_forms, classify_csp, in_closure
from .entclass import (
    ProjectorBasis,
    classify3,
    find_triple_projection,
    ghz_decomposition,
    is_entangled2,
    is_genuinely_entangled,
)
from .errors import ArityError, HolantError, InexactError, WitnessError
from .gridnet import (
    SignatureGrid,
    build_grid,
    gadget_signature,
    grid_from_dict,
    grid_to_dict,
    holant_contract,
    insert_equalities_partial,
)
from .holo import is_omega_normalised, omega_normalize, transform_bipartite
from .scalars import FLOAT, Backend, format_scalar, get_backend
from .sigcore import (
    LocalMap,
    Signature,
    apply_local,
    connected_factors,
    constants,
    from_symmetric,
    is_degenerate,
    named_state,
    project,
    proportional,
    to_symmetric,
)

FREE = {
    "|0>": (1, 0),
    "|1>": (0, 1),
    "|+>": (1, 1),
    "|->": (1, -1),
}
_KIND_NAME = {
    ProjectorBasis.Zero: "|0>",
    ProjectorBasis.One: "|1>",
    ProjectorBasis.Plus: "|+>",
    ProjectorBasis.Minus: "|->",
}


def free_unary(name: str, be: Backend) -> Signature:
    return Signature.from_values(FREE[name], be)


def _frame_map(frame: str, be: Backend) -> LocalMap:
    return constants(be)[frame]


def in_frame_m(f: Signature, frame: str) -> bool:
    return in_closure([f], "KM" if frame == "K" else "KXM")


# --- gadget builders -----------------------------------------------------------

def triangle_gadget(name: str, psi: Signature, ext: int) -> SignatureGrid:
    """Three copies of a ternary; copy k's B wire meets copy k+1's C wire.

    ``ext`` is the external wire; B and C follow it cyclically.
    """
    if psi.arity != 3:
        raise ArityError("triangle gadget needs a ternary")
    b = ext % 3 + 1
    c = b % 3 + 1
    edges = [(k, b, (k + 1) % 3, c) for k in range(3)]
    dangling = [(k, ext) for k in range(3)]
    return build_grid([(name, psi)] * 3, edges, dangling)


def projection_gadget(name: str, f: Signature, assignment: dict, survivors) -> SignatureGrid:
    """f with free unaries on the wires in ``assignment`` (label -> ProjectorBasis)."""
    verts = [(name, f)]
    edges = []
    for w in sorted(assignment):
        uname = _KIND_NAME[assignment[w]]
        verts.append((uname, free_unary(uname, f.backend)))
        edges.append((0, w, len(verts) - 1, 1))
    dangling = [(0, w) for w in survivors]
    return build_grid(verts, edges, dangling)


def w_pregadget(phi_name, phi, psi_name, psi, phi_port: int = 2, psi_port: int = 1) -> SignatureGrid:
    """Binary phi glued onto one wire of psi; outputs (phi free port, psi's other two)."""
    other_phi = 3 - phi_port
    rest = [p for p in (1, 2, 3) if p != psi_port]
    return build_grid(
        [(phi_name, phi), (psi_name, psi)],
        [(0, phi_port, 1, psi_port)],
        [(0, other_phi), (1, rest[0]), (1, rest[1])],
    )


def sandwich_gadget(phi_name, phi, psi_name, psi, pin_name) -> SignatureGrid:
    """psi between two copies of phi with its third wire pinned."""
    be = psi.backend
    return build_grid(
        [(phi_name, phi), (psi_name, psi), (phi_name, phi), (pin_name, free_unary(pin_name, be))],
        [(0, 2, 1, 1), (1, 2, 2, 2), (1, 3, 3, 1)],
        [(0, 1), (2, 1)],
    )


# --- closed forms ----------------------------------------------------------------

def ghz_triangle_closed_form(A: LocalMap, B: LocalMap, C: LocalMap) -> Signature:
    M = C.T @ B
    a, b, c, d = M.matrix.flat
    return apply_local(A, from_symmetric([a ** 3, a * b * c, b * c * d, d ** 3], A.backend))


def w_triangle_closed_form(A: LocalMap, B: LocalMap, C: LocalMap) -> Signature:
    M = C.T @ B
    a, b, c, d = M.matrix.flat
    vals = [
        b ** 3 + c ** 3 + 3 * a * b * d + 3 * a * c * d,
        a * b * b + a * b * c + a * c * c + a * a * d,
        a * a * b + a * a * c,
        a ** 3,
    ]
    return apply_local(A, from_symmetric(vals, A.backend))


def sandwich_closed_form(phi_t, v_prime, frame: str, be: Backend) -> Signature:
    """frame^{⊗2} applied to the symmetric binary built from frame-picture data.

    ``phi_t`` = (phi00, phi01, phi10) with phi11 normalised to 1.
    """
    p00, p01, p10 = (be.scalar(x) for x in phi_t)
    v = be.scalar(v_prime)
    vals = [2 * p00 * p01 + p01 * p01 * v, p00 + p01 * p10 + p01 * v, 2 * p10 + v]
    return apply_local(_frame_map(frame, be), from_symmetric(vals, be))


# --- symmetrisation -------------------------------------------------------------------

@dataclass
class Candidate:
    role: int
    gadget: SignatureGrid
    output: Signature
    nondegenerate: bool
    ent_class: str


@dataclass
class SymmetrizeResult:
    candidates: list
    diagnosis: str | None = None

    def signatures(self) -> list[Signature]:
        return [c.output for c in self.candidates]

    def first_good(self) -> Candidate | None:
        return next((c for c in self.candidates if c.nondegenerate), None)


def _triangles(name: str, psi: Signature) -> list[Candidate]:
    out = []
    for ext in (1, 2, 3):
        g = triangle_gadget(name, psi, ext)
        s = gadget_signature(g)
        if to_symmetric(s) is None:
            raise WitnessError("triangle gadget produced a non-symmetric signature")
        nd = not s.is_zero() and not is_degenerate(s)
        out.append(Candidate(ext, g, s, nd, classify3(s).tag))
    return out


def symmetrize_ghz(psi: Signature, name: str = "psi") -> SymmetrizeResult:
    if classify3(psi).tag != "GHZ":
        raise HolantError("symmetrize_ghz needs a GHZ-class ternary")
    cands = _triangles(name, psi)
    diag = None
    if not any(c.nondegenerate for c in cands):
        if in_closure([psi], "KE") and to_symmetric(psi) is not None:
            diag = "input is symmetric and in K∘E; use it directly"
        else:
            raise WitnessError("all GHZ triangle candidates degenerate without the K∘E diagnosis")
    return SymmetrizeResult(cands, diag)


@dataclass
class SymmetrizeW:
    output: Signature
    gadget: SignatureGrid
    role: int
    pre_gadget: SignatureGrid | None = None
    pre_output: Signature | None = None
    ent_class: str = "W"


def _needs_binary(psi: Signature) -> str | None:
    if in_frame_m(psi, "K"):
        return "K"
    if in_frame_m(psi, "KX"):
        return "KX"
    return None


def symmetrize_w(psi: Signature, phi: Signature | None = None, names=("psi", "phi", "psi'")) -> SymmetrizeW:
    """Symmetric entangled ternary from a W-class ternary, via a pre-gadget if needed."""
    if classify3(psi).tag != "W":
        raise HolantError("symmetrize_w needs a W-class ternary")
    psi_name, phi_name, pre_name = names
    frame = _needs_binary(psi)
    pre = None
    work = psi
    work_name = psi_name
    if frame is not None:
        if phi is None or phi.arity != 2:
            raise HolantError(f"psi is in {frame}∘M; an entangled binary outside it is required")
        if not is_entangled2(phi) or in_frame_m(phi, frame):
            raise HolantError(f"supplied binary is degenerate or inside {frame}∘M")
        for phi_port, psi_port in itertools.product((2, 1), (1, 2, 3)):
            g = w_pregadget(phi_name, phi, psi_name, psi, phi_port, psi_port)
            s = gadget_signature(g)
            if classify3(s).tag == "W" and _needs_binary(s) is None:
                pre = (g, s)
                break
        if pre is None:
            raise WitnessError("no pre-gadget placement leaves K∘M and KX∘M")
        work, work_name = pre[1], pre_name
    for cand in _triangles(work_name, work):
        if cand.nondegenerate and cand.ent_class in ("GHZ", "W"):
            return SymmetrizeW(cand.output, cand.gadget, cand.role,
                               pre[0] if pre else None, pre[1] if pre else None, cand.ent_class)
    raise WitnessError("all three W triangle pairings failed outside K∘M and KX∘M")


# --- binaries outside frame∘M ---------------------------------------------------

def _pin_other_factors(f: Signature, keep_wires) -> dict:
    """Assignment pinning every factor except the one on keep_wires to a
    computational basis string where it is nonzero."""
    assign = {}
    for sig, ws in connected_factors(f):
        if tuple(ws) == tuple(keep_wires):
            continue
        sup = sig.backend.support(sig.coeffs)
        k = int(np.argmax(sup)) if sig.backend.exact else int(np.argmax(np.abs(sig.coeffs)))
        for t, w in enumerate(ws):
            bit = (k >> (len(ws) - 1 - t)) & 1
            assign[w] = ProjectorBasis.One if bit else ProjectorBasis.Zero
    return assign


def _apply_assignment(f: Signature, assign: dict) -> Signature:
    g = f
    for w in sorted(assign, reverse=True):
        g = project(g, w, assign[w].covector)
    return g


@dataclass
class BinaryGadget:
    source: int  # index into F
    gadget: SignatureGrid
    output: Signature
    assignment: dict
    survivors: tuple


def binary_outside_km_gadget(F, frame: str = "K", names=None) -> BinaryGadget:
    """Project a qualifying signature of F down to an entangled binary outside frame∘M.

    Works factor by factor: each step projects one wire with a free unary and
    keeps an irreducible factor on at least two wires that is still outside
    frame∘M, pinning the rest.
    """
    F = list(F)
    for idx, f in enumerate(F):
        name = names[idx] if names else f"F[{idx}]"
        for sig, ws in connected_factors(f):
            if len(ws) < 2 or in_frame_m(sig, frame):
                continue
            assign = _pin_other_factors(f, ws)
            res = _binary_search(f, assign, list(ws), frame)
            if res is None:
                continue
            assign, survivors = res
            g = projection_gadget(name, f, assign, survivors)
            out = gadget_signature(g)
            return BinaryGadget(idx, g, out, assign, tuple(survivors))
    raise HolantError(f"no signature in the set has an entangled factor outside {frame}∘M")


def _binary_search(f, assign, live, frame):
    """DFS over single-wire projections of the live wires (labels of f)."""
    cur = _apply_assignment(f, assign)
    # map live labels to current indices
    remaining = sorted(set(range(1, f.arity + 1)) - set(assign))
    pos = {w: remaining.index(w) + 1 for w in live}
    if len(live) == 2:
        sub = _restrict(cur, remaining, live)
        if is_entangled2(sub) and not in_frame_m(sub, frame):
            return assign, sorted(live)
        return None
    for w in sorted(live, reverse=True):
        for kind in ProjectorBasis:
            h = project(cur, pos[w], kind.covector)
            if h.is_zero():
                continue
            rem2 = [x for x in remaining if x != w]
            facs = connected_factors(h)
            for sig, ws in facs:
                labels = [rem2[i - 1] for i in ws]
                if len(labels) < 2 or in_frame_m(sig, frame):
                    continue
                if not set(labels) <= set(live):
                    continue
                new = dict(assign)
                new[w] = kind
                for sig2, ws2 in facs:
                    if ws2 == ws:
                        continue
                    sup = sig2.backend.support(sig2.coeffs)
                    k = int(np.argmax(sup)) if sig2.backend.exact else int(np.argmax(np.abs(sig2.coeffs)))
                    for t, i in enumerate(ws2):
                        bit = (k >> (len(ws2) - 1 - t)) & 1
                        new[rem2[i - 1]] = ProjectorBasis.One if bit else ProjectorBasis.Zero
                res = _binary_search(f, new, labels, frame)
                if res is not None:
                    return res
    return None


def _restrict(cur: Signature, remaining, live) -> Signature:
    if len(remaining) != len(live):
        raise WitnessError("unpinned wires outside the live factor")
    return cur


def binary_outside_km(F, frame: str = "K") -> Signature:
    return binary_outside_km_gadget(F, frame).output


@dataclass
class SandwichResult:
    output: Signature
    gadget: SignatureGrid
    pin: str
    v: object
    v_prime: object


def _frame_params(psi: Signature, frame: str):
    """(p, w) with frame^-1∘psi = [p, w, 0, 0]."""
    be = psi.backend
    xt = to_symmetric(apply_local(_frame_map(frame, be).inverse(), psi))
    if xt is None or not (be.is_zero(xt[2]) and be.is_zero(xt[3])) or be.is_zero(xt[1]):
        raise HolantError(f"ternary is not a W-type member of {frame}∘M")
    return xt[0], xt[1]


def symmetric_binary_outside_km(psi: Signature, phi: Signature, frame: str = "K",
                                names=("psi", "phi")) -> SandwichResult:
    be = psi.backend
    if to_symmetric(psi) is None or not in_frame_m(psi, frame):
        raise HolantError(f"psi must be symmetric and in {frame}∘M")
    if phi.arity != 2 or not is_entangled2(phi) or in_frame_m(phi, frame):
        raise HolantError(f"phi must be an entangled binary outside {frame}∘M")
    p, w = _frame_params(psi, frame)
    v = p / w
    T = _frame_map(frame, be)
    for pin in ("|0>", "|1>", "|+>", "|->"):
        g = sandwich_gadget(names[1], phi, names[0], psi, pin)
        out = gadget_signature(g)
        if to_symmetric(out) is None or not is_entangled2(out) or in_frame_m(out, frame):
            continue
        ut = T.T.apply_vec(free_unary(pin, be).coeffs)
        v_prime = v + ut[1] / ut[0]
        return SandwichResult(out, g, pin, v, v_prime)
    raise WitnessError("every pin leaves the sandwich output inside the frame")


# --- theorem records ---------------------------------------------------------------

def w_lemma_parameters(x, be: Backend):
    """Write x_k = A k a^(k-1) + B a^k (form 1) or the reversed form (form 2)."""
    for form, seq in ((1, list(x)), (2, list(x)[::-1])):
        x0, x1, x2, x3 = seq
        den = x1 * x1 - x0 * x2
        if be.is_zero(den):
            continue
        alpha = (x1 * x2 - x0 * x3) / (2 * den)
        B = x0
        A = x1 - B * alpha
        if be.is_zero(A):
            continue
        pred = [B, A + B * alpha, 2 * A * alpha + B * alpha ** 2, 3 * A * alpha ** 2 + B * alpha ** 3]
        if all(be.eq(a, b) for a, b in zip(pred, seq)):
            return form, alpha, A, B
    return None


def _alpha_is_pm_i(alpha, be: Backend) -> bool:
    return be.eq(alpha, be.i) or be.eq(alpha, -be.i)


def _cube_root(z: complex) -> complex:
    return cmath.exp(cmath.log(z) / 3) if z != 0 else 0j


def _sym_binary(m: LocalMap):
    P = (m.T @ m).matrix
    return (P[0, 0], P[0, 1], P[1, 1])


def ghz_theorem_record(psi_s: Signature, F, seed: int = 0) -> dict:
    """Decision record: symmetric GHZ ternary + omega-normalised binary and the
    #CSP set whose hardness the GHZ-state theorem turns into hardness here."""
    be = psi_s.backend
    rng = np.random.default_rng(seed)
    dec = None
    exact = be.exact
    try:
        dec = ghz_decomposition(psi_s, rng)
    except InexactError:
        dec = None
        exact = False
    if dec is None:
        dec = ghz_decomposition(psi_s.with_backend(FLOAT), rng)
        exact = False
        if dec is None:
            raise WitnessError("could not decompose the symmetric GHZ ternary")
    U = dec[0]
    ub = U.backend
    if not ub.exact:
        cols = np.array(U.matrix, dtype=complex)
        U = LocalMap(cols / np.abs(cols).max(axis=0), ub)
    inv = U.inverse()
    core = apply_local(inv, psi_s if ub.name == be.name else psi_s.with_backend(ub))
    alpha, beta = core.coeffs[0], core.coeffs[7]
    M = LocalMap(np.array(U.matrix, dtype=complex) @ np.diag([_cube_root(complex(alpha)), _cube_root(complex(beta))]), FLOAT)
    y = _sym_binary(M)
    t, y_norm = omega_normalize(y, FLOAT)
    unary_choice = None
    flagged = False
    if FLOAT.is_zero(y[0]) and FLOAT.is_zero(y[2]):
        for nm in ("|+>", "|->", "|0>", "|1>"):
            u = M.T.apply_vec(free_unary(nm, FLOAT).coeffs)
            tj, un = omega_normalize((u[0], u[1]), FLOAT)
            if not FLOAT.is_zero(un[0]) and not FLOAT.is_zero(un[1]):
                t = tj
                unary_choice = {"name": nm, "value": [format_scalar(z) for z in un]}
                flagged = nm != "|+>"
                break
        if unary_choice is None:
            raise WitnessError("no free unary gives ab != 0 after omega-normalisation")
    Mn = M @ t.matrix(FLOAT) if t.j else M
    csp = _csp_set(Mn, F)
    verdict = classify_csp(csp)
    return {
        "theorem": "GHZ-state theorem",
        "M0": U.to_strings(),
        "alpha": format_scalar(alpha),
        "beta": format_scalar(beta),
        "decomposition_exact": exact,
        "M": Mn.to_strings(),
        "omega_j": t.j,
        "y": [format_scalar(z) for z in _sym_binary(Mn)],
        "unary": unary_choice,
        "unary_choice_flagged": flagged,
        "csp_verdict": verdict.outcome,
        "csp_set_size": len(csp),
    }


def _csp_set(M: LocalMap, F) -> list[Signature]:
    """{M^T∘=2} ∪ M^T∘(F ∪ free unaries) ∪ {M^-1∘=2}, on the float backend."""
    eq2 = from_symmetric([1, 0, 1], FLOAT)
    out = [apply_local(M.T, eq2)]
    for f in F:
        out.append(apply_local(M.T, f.with_backend(FLOAT) if f.backend.exact else f))
    for nm in FREE:
        out.append(apply_local(M.T, free_unary(nm, FLOAT)))
    out.append(apply_local(M.inverse(), eq2))
    return out


def _check_ghz_record(psi_s: Signature, rec: dict, F) -> list[str]:
    errs = []
    M = LocalMap(FLOAT.array([[FLOAT.parse(s) for s in row] for row in rec["M"]], (2, 2)), FLOAT)
    if not M.invertible:
        return ["M is singular"]
    rebuilt = apply_local(M, named_state("GHZ", 3, FLOAT))
    target = psi_s.with_backend(FLOAT) if psi_s.backend.exact else psi_s
    if proportional(Signature(rebuilt.coeffs, Backend("float", 1e-7)),
                    Signature(target.coeffs, Backend("float", 1e-7))) is None:
        errs.append("M∘[1,0,0,1] does not reproduce the ternary")
    dbe = psi_s.backend if rec.get("decomposition_exact") else FLOAT
    try:
        M0 = LocalMap(dbe.array([[dbe.parse(t) for t in row] for row in rec["M0"]], (2, 2)), dbe)
        core = from_symmetric([dbe.parse(rec["alpha"]), 0, 0, dbe.parse(rec["beta"])], dbe)
        ref = psi_s if dbe.name == psi_s.backend.name else psi_s.with_backend(FLOAT)
        if not apply_local(M0, core).close(ref):
            errs.append("M0 and (alpha, beta) do not rebuild the ternary")
    except (ValueError, HolantError) as exc:
        errs.append(f"unreadable decomposition: {exc}")
    y = _sym_binary(M)
    if [format_scalar(z) for z in y] != rec["y"] and not all(
        FLOAT.eq(a, FLOAT.parse(b)) for a, b in zip(y, rec["y"])
    ):
        errs.append("recorded binary differs from M^T M")
    det = y[0] * y[2] - y[1] * y[1]
    if abs(det) <= 1e-9 * max(1.0, abs(y[0]) * abs(y[2]), abs(y[1]) ** 2):
        errs.append("binary is degenerate")
    if not is_omega_normalised(y, FLOAT):
        errs.append("binary is not omega-normalised")
    if FLOAT.is_zero(y[0]) and FLOAT.is_zero(y[2]):
        un = rec.get("unary")
        if not un:
            errs.append("[0,y1,0] case needs a unary record")
        else:
            u = M.T.apply_vec(free_unary(un["name"], FLOAT).coeffs)
            if FLOAT.is_zero(u[0]) or FLOAT.is_zero(u[1]) or not is_omega_normalised(u, FLOAT):
                errs.append("recorded unary is not omega-normalised with ab != 0")
            elif not all(FLOAT.eq(a, FLOAT.parse(b)) for a, b in zip(u, un["value"])):
                errs.append("recorded unary value is wrong")
    if classify_csp(_csp_set(M, F)).outcome != "SharpPHard":
        errs.append("the transformed #CSP set is tractable")
    if rec.get("csp_verdict") != "SharpPHard":
        errs.append("record does not claim a hard #CSP set")
    return errs


def w_lemma_record(psi_s: Signature) -> dict:
    be = psi_s.backend
    x = to_symmetric(psi_s).values
    params = w_lemma_parameters(x, be)
    if params is None:
        raise WitnessError("symmetric W ternary has no W-lemma parameters")
    form, alpha, A, B = params
    return {
        "theorem": "W-state lemma",
        "form": form,
        "alpha": format_scalar(alpha),
        "A": format_scalar(A),
        "B": format_scalar(B),
        "alpha_is_pm_i": _alpha_is_pm_i(alpha, be),
    }


def _check_w_record(psi_s: Signature, rec: dict) -> list[str]:
    be = psi_s.backend
    errs = []
    sym = to_symmetric(psi_s)
    if sym is None:
        return ["ternary is not symmetric"]
    alpha, A, B = (be.parse(rec[k]) for k in ("alpha", "A", "B"))
    seq = list(sym.values) if rec["form"] == 1 else list(sym.values)[::-1]
    pred = [B, A + B * alpha, 2 * A * alpha + B * alpha ** 2, 3 * A * alpha ** 2 + B * alpha ** 3]
    if not all(be.eq(a, b) for a, b in zip(pred, seq)):
        errs.append("x_k = A k a^(k-1) + B a^k does not reproduce the ternary")
    if be.is_zero(A):
        errs.append("A = 0")
    if _alpha_is_pm_i(alpha, be) or rec.get("alpha_is_pm_i"):
        errs.append("alpha = ±i is the tractable case")
    if _needs_binary(psi_s) is not None:
        errs.append("ternary lies in K∘M or KX∘M")
    return errs


def binary_ternary_record(psi_s: Signature, phi_s: Signature, frame: str) -> dict:
    be = psi_s.backend
    p, w = _frame_params(psi_s, frame)
    q = (p - 1) / 3
    N = LocalMap(be.array([[1, q], [0, w]], (2, 2)), be)
    M = _frame_map(frame, be) @ N
    z = to_symmetric(apply_local(M.T, phi_s))
    return {
        "theorem": "binary/ternary theorem",
        "frame": frame,
        "M": M.to_strings(),
        "z": [format_scalar(t) for t in z.values],
    }


def _check_bt_record(psi_s: Signature, phi_s: Signature, rec: dict) -> list[str]:
    be = psi_s.backend
    errs = []
    M = LocalMap(be.array([[be.parse(s) for s in row] for row in rec["M"]], (2, 2)), be)
    if not M.invertible:
        return ["M is singular"]
    if not apply_local(M, from_symmetric([1, 1, 0, 0], be)).close(psi_s):
        errs.append("M∘[1,1,0,0] does not reproduce the ternary")
    if to_symmetric(phi_s) is None or not is_entangled2(phi_s):
        errs.append("binary is not symmetric and non-degenerate")
    if in_frame_m(phi_s, rec["frame"]):
        errs.append("binary lies inside the frame")
    z = to_symmetric(apply_local(M.T, phi_s))
    if z is None or be.is_zero(z[0]):
        errs.append("M^T∘binary has the tractable form [0,*,*]")
    elif not all(be.eq(a, be.parse(b)) for a, b in zip(z.values, rec["z"])):
        errs.append("recorded transformed binary is wrong")
    return errs


def bipartite_rewrite_record(psi_s: Signature, M0: LocalMap | None, name: str = "psi_s") -> dict:
    """Theta grid of two copies of psi_s, its partial bipartization, and the
    transform by M0^-1 of that bipartization."""
    be = psi_s.backend
    theta = build_grid([(name, psi_s), (name, psi_s)], [(0, 1, 1, 1), (0, 2, 1, 2), (0, 3, 1, 3)])
    part = insert_equalities_partial(theta, name)
    M = M0 if M0 is not None else constants(be)["I"]
    # L side: psi_s and nothing else; transform by M^-1 gives M^-1∘psi_s | M^T∘=2
    trans = transform_bipartite(part, M.inverse())
    vals = [holant_contract(g) for g in (theta, part, trans)]
    return {
        "grids": [grid_to_dict(g) for g in (theta, part, trans)],
        "M": M.to_strings(),
        "holants": [format_scalar(v) for v in vals],
        "backend": be.name,
    }


def _grids_close(a: SignatureGrid, b: SignatureGrid) -> bool:
    return (
        a.vertices == b.vertices and a.edges == b.edges and a.dangling == b.dangling
        and a.bipartition == b.bipartition and set(a.signatures) == set(b.signatures)
        and all(a.signatures[k].close(b.signatures[k]) for k in a.signatures)
    )


def _check_bipartite(rec: dict, F_backend: Backend) -> list[str]:
    be = F_backend if rec.get("backend") == F_backend.name else FLOAT
    grids = [grid_from_dict(d, be) for d in rec["grids"]]
    vals = [holant_contract(g) for g in grids]
    errs = []
    M = LocalMap(be.array([[be.parse(t) for t in row] for row in rec["M"]], (2, 2)), be)
    name = grids[0].vertices[0] if grids[0].vertices else ""
    try:
        part = insert_equalities_partial(grids[0], name)
        trans = transform_bipartite(part, M.inverse())
        if not (_grids_close(part, grids[1]) and _grids_close(trans, grids[2])):
            errs.append("rewrite grids do not follow from the theta grid and M")
    except HolantError as exc:
        errs.append(f"rewrite cannot be replayed: {exc}")
    if not (be.eq(vals[0], vals[1]) and be.eq(vals[0], vals[2])):
        errs.append("Holant changed across the bipartite rewrite")
    if not all(be.eq(v, be.parse(s)) for v, s in zip(vals, rec["holants"])):
        errs.append("recorded Holant values are wrong")
    if grids[1].bipartition is None:
        errs.append("partial bipartization carries no labels")
    return errs


# --- witness -----------------------------------------------------------------------

@dataclass
class Step:
    kind: str
    name: str
    gadget: SignatureGrid | None
    output: Signature | None
    properties: dict = field(default_factory=dict)
    note: str = ""
    data: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"kind": self.kind, "name": self.name, "properties": self.properties, "note": self.note}
        if self.gadget is not None:
            out["gadget"] = grid_to_dict(self.gadget)
        if self.output is not None:
            out["output"] = self.output.to_strings()
        if self.data:
            out["data"] = self.data
        return out


@dataclass
class HardnessWitness:
    F: list
    steps: list
    final: dict
    backend: Backend

    def to_json(self) -> dict:
        fin = dict(self.final)
        for key in ("ternary", "binary"):
            if isinstance(fin.get(key), Signature):
                fin[key] = fin[key].to_strings()
        return {
            "backend": self.backend.name,
            "F": [f.to_strings() for f in self.F],
            "steps": [s.to_json() for s in self.steps],
            "final": fin,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "HardnessWitness":
        be = get_backend(doc["backend"])

        def sig(vals):
            return Signature(be.array([be.parse(v) for v in vals]), be)

        steps = []
        for s in doc["steps"]:
            steps.append(Step(
                s["kind"], s["name"],
                grid_from_dict(s["gadget"], be) if "gadget" in s else None,
                sig(s["output"]) if "output" in s else None,
                dict(s.get("properties", {})), s.get("note", ""), dict(s.get("data", {})),
            ))
        fin = dict(doc["final"])
        for key in ("ternary", "binary"):
            if fin.get(key) is not None:
                fin[key] = sig(fin[key])
        return cls([sig(f) for f in doc["F"]], steps, fin, be)

    def transcript(self) -> str:
        lines = [f"hardness witness over {len(self.F)} signature(s), backend {self.backend.name}"]
        for k, s in enumerate(self.steps):
            out = f" -> {s.output!r}" if s.output is not None else ""
            lines.append(f"  step {k} [{s.kind}] {s.name}{out}")
            if s.note:
                lines.append(f"      {s.note}")
        lines.append(f"  final: {self.final.get('theorem')} on a {self.final.get('class')}-class ternary")
        return "\n".join(lines)


@dataclass
class WitnessReport:
    passed: bool
    results: list  # (step index or 'final', kind, ok, message)
    warnings: list

    @property
    def first_failure(self):
        return next((r for r in self.results if not r[2]), None)

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "results": [{"step": r[0], "kind": r[1], "ok": r[2], "message": r[3]} for r in self.results],
            "warnings": self.warnings,
        }


_PROPERTY_TESTS = {
    "symmetric": lambda s: to_symmetric(s) is not None,
    "nondegenerate": lambda s: not s.is_zero() and not is_degenerate(s),
    "genuinely_entangled": lambda s: not s.is_zero() and is_genuinely_entangled(s),
    "entangled2": lambda s: s.arity == 2 and not s.is_zero() and is_entangled2(s),
    "class": lambda s: classify3(s).tag,
    "in_KM": lambda s: in_frame_m(s, "K"),
    "in_KXM": lambda s: in_frame_m(s, "KX"),
    "arity": lambda s: s.arity,
}


def verify_witness(w: HardnessWitness, F=None) -> WitnessReport:
    """Re-contract every gadget and re-test every claimed property."""
    results = []
    warnings = []
    be = w.backend
    if not w.steps:
        warnings.append("empty step list: nothing to verify")
        return WitnessReport(True, [], warnings)
    if F is not None:
        same = len(F) == len(w.F) and all(a.backend.name == b.backend.name and a.close(b) for a, b in zip(F, w.F))
        if not same:
            results.append(("input", "input", False, "witness signature set differs from the input"))
    known: dict[str, Signature] = {f"F[{i}]": f for i, f in enumerate(w.F)}
    for nm in FREE:
        known[nm] = free_unary(nm, be)
    known["=2"] = from_symmetric([1, 0, 1], be)
    for k, st in enumerate(w.steps):
        msg = _verify_step(st, known, w, be)
        results.append((k, st.kind, msg is None, msg or "ok"))
        if st.output is not None:
            known[st.name] = st.output
    msgs = _verify_final(w, known, be)
    results.append(("final", w.final.get("theorem", "?"), not msgs, "; ".join(msgs) if msgs else "ok"))
    passed = all(r[2] for r in results)
    return WitnessReport(passed, results, warnings)


def _verify_step(st: Step, known: dict, w: HardnessWitness, be: Backend) -> str | None:
    if st.kind == "bipartite-rewrite":
        errs = _check_bipartite(st.data, be)
        src = st.data.get("source")
        if src not in known:
            errs.append(f"rewrite refers to unknown signature {src!r}")
        else:
            g0 = grid_from_dict(st.data["grids"][0], be if st.data.get("backend") == be.name else FLOAT)
            s0 = next(iter(g0.signatures.values()))
            ref = known[src] if s0.backend.name == be.name else known[src].with_backend(FLOAT)
            if not s0.close(ref):
                errs.append("rewrite grid does not use the final ternary")
        return "; ".join(errs) if errs else None
    if st.gadget is None or st.output is None:
        return "step has no gadget or no output"
    for name, s in st.gadget.signatures.items():
        ref = known.get(name)
        if ref is None:
            return f"gadget uses unknown signature {name!r}"
        if ref.backend.name != s.backend.name or not s.close(ref):
            return f"gadget signature {name!r} does not match its source"
    try:
        got = gadget_signature(st.gadget)
    except HolantError as exc:
        return f"gadget does not contract: {exc}"
    if got.arity != st.output.arity or proportional(got, st.output) is None:
        return "gadget contraction is not proportional to the claimed output"
    for prop, claimed in st.properties.items():
        test = _PROPERTY_TESTS.get(prop)
        if test is None:
            return f"unknown property {prop!r}"
        if test(st.output) != claimed:
            return f"claimed property {prop}={claimed!r} fails"
    return None


def _verify_final(w: HardnessWitness, known: dict, be: Backend) -> list[str]:
    fin = w.final
    errs = []
    tern = fin.get("ternary")
    if not isinstance(tern, Signature):
        return ["final ternary missing"]
    src = fin.get("ternary_source")
    if src not in known or not known[src].close(tern):
        errs.append("final ternary is not the output of a recorded step")
    if to_symmetric(tern) is None:
        errs.append("final ternary is not symmetric")
    if tern.is_zero() or is_degenerate(tern):
        errs.append("final ternary is degenerate")
    cls = classify3(tern).tag
    if cls != fin.get("class"):
        errs.append(f"final ternary class is {cls}, claimed {fin.get('class')}")
    theorem = fin.get("theorem")
    rec = fin.get("record", {})
    if theorem == "GHZ-state theorem":
        if cls != "GHZ":
            errs.append("GHZ-state theorem needs a GHZ-class ternary")
        errs += _check_ghz_record(tern, rec, w.F)
    elif theorem == "W-state lemma":
        if cls != "W":
            errs.append("W-state lemma needs a W-class ternary")
        errs += _check_w_record(tern, rec)
    elif theorem == "binary/ternary theorem":
        phi = fin.get("binary")
        bsrc = fin.get("binary_source")
        if not isinstance(phi, Signature):
            errs.append("binary missing")
        else:
            if bsrc not in known or not known[bsrc].close(phi):
                errs.append("final binary is not the output of a recorded step")
            if cls != "W" or not in_frame_m(tern, rec.get("frame", "K")):
                errs.append("binary/ternary theorem needs a W ternary inside the frame")
            errs += _check_bt_record(tern, phi, rec)
    else:
        errs.append(f"unknown theorem {theorem!r}")
    return errs


# --- the pipeline ---------------------------------------------------------------

def _preconditions(F, seed):
    if _star_verdict(F, seed) is not None:
        raise HolantError("signature set is tractable for Holant*: no hardness witness exists")
    if affine_forms(F) is not None:
        raise HolantError("signature set is affine: no hardness witness exists")


def build_hardness_witness(F, seed: int = 0, check: bool = True) -> HardnessWitness:
    F = list(F)
    if not F:
        raise HolantError("empty signature set")
    be = F[0].backend
    for f in F:
        f.require_nonzero()
    if check:
        _preconditions(F, seed)
    steps: list[Step] = []
    names = [f"F[{i}]" for i in range(len(F))]

    # (1) a ternary from a multipartite factor
    src = None
    for i, f in enumerate(F):
        facs = connected_factors(f)
        big = [(s, ws) for s, ws in facs if len(ws) >= 3]
        if big:
            src = (i, f, big[0])
            break
    if src is None:
        raise HolantError("no signature carries multipartite entanglement")
    i, f, (h, hw) = src
    chain = find_triple_projection(h, seed)
    assign = _pin_other_factors(f, hw)
    hlabels = list(hw)
    for wire, kind in chain.steps:
        label = hlabels[wire - 1]
        assign[label] = kind
        hlabels = hlabels[: wire - 1] + hlabels[wire:]
    survivors = [hw[s - 1] for s in chain.survivors]
    g = projection_gadget(names[i], f, assign, survivors)
    psi = gadget_signature(g)
    ent = classify3(psi).tag
    steps.append(Step("projection-chain", "psi", g, psi,
                      {"genuinely_entangled": True, "class": ent, "arity": 3},
                      f"project {names[i]} down to a genuinely entangled ternary"))

    # (2) a symmetric non-degenerate ternary
    psi_s_name = "psi"
    if to_symmetric(psi) is not None and not is_degenerate(psi):
        psi_s = psi
    elif ent == "GHZ":
        res = symmetrize_ghz(psi, "psi")
        cand = res.first_good()
        if cand is None:
            psi_s = psi
        else:
            psi_s = cand.output
            psi_s_name = "psi_s"
            steps.append(Step("symmetrization", psi_s_name, cand.gadget, psi_s,
                              {"symmetric": True, "nondegenerate": True, "class": cand.ent_class},
                              f"GHZ triangle, external wire {cand.role}"))
    else:
        frame = _needs_binary(psi)
        phi = None
        if frame is not None:
            bg = binary_outside_km_gadget(F, frame)
            phi = bg.output
            steps.append(Step("binary-extraction", "phi", bg.gadget, phi,
                              {"entangled2": True, f"in_{frame}M": False},
                              f"binary outside {frame}∘M from {names[bg.source]}"))
        res = symmetrize_w(psi, phi, ("psi", "phi", "psi'"))
        if res.pre_gadget is not None:
            steps.append(Step("symmetrization", "psi'", res.pre_gadget, res.pre_output,
                              {"class": "W", "in_KM": False, "in_KXM": False},
                              "binary glued onto the ternary to leave the frame"))
        psi_s = res.output
        psi_s_name = "psi_s"
        steps.append(Step("symmetrization", psi_s_name, res.gadget, psi_s,
                          {"symmetric": True, "nondegenerate": True, "class": res.ent_class},
                          f"W triangle, external wire {res.role}"))

    # (3) the final theorem
    cls = classify3(psi_s).tag
    final = {"ternary": psi_s, "ternary_source": psi_s_name, "class": cls}
    M0 = None
    if cls == "GHZ":
        rec = ghz_theorem_record(psi_s, F, seed)
        final.update(theorem="GHZ-state theorem", record=rec)
        if rec["decomposition_exact"]:
            M0 = LocalMap(be.array([[be.parse(s) for s in row] for row in rec["M0"]], (2, 2)), be)
    else:
        frame = _needs_binary(psi_s)
        if frame is None:
            final.update(theorem="W-state lemma", record=w_lemma_record(psi_s))
        else:
            bg = binary_outside_km_gadget(F, frame)
            steps.append(Step("binary-extraction", "phi_b", bg.gadget, bg.output,
                              {"entangled2": True, f"in_{frame}M": False},
                              f"binary outside {frame}∘M from {names[bg.source]}"))
            sw = symmetric_binary_outside_km(psi_s, bg.output, frame, (psi_s_name, "phi_b"))
            steps.append(Step("binary-extraction", "phi_s", sw.gadget, sw.output,
                              {"symmetric": True, "entangled2": True, f"in_{frame}M": False},
                              f"sandwich gadget pinned with {sw.pin}; v' = {format_scalar(sw.v_prime)}"))
            rec = binary_ternary_record(psi_s, sw.output, frame)
            final.update(theorem="binary/ternary theorem", record=rec, binary=sw.output, binary_source="phi_s")
            M0 = LocalMap(be.array([[be.parse(s) for s in row] for row in rec["M"]], (2, 2)), be)

    # (4) the bipartite rewrite that hands the ternary to the cited theorem
    try:
        data = bipartite_rewrite_record(psi_s, M0)
    except InexactError:
        data = bipartite_rewrite_record(psi_s, None)
    data["source"] = psi_s_name
    steps.append(Step("bipartite-rewrite", "rewrite", None, None, {}, "partial bipartization then transform", data))

    w = HardnessWitness(F, steps, final, be)
    report = verify_witness(w, F)
    if not report.passed:
        raise WitnessError(f"witness failed verification: {report.first_failure}")
    return w
