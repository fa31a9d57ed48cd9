"""Command-line front end: ``holant <subcommand> ...``.

Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

from . import __version__
from .dichotomy import classify_csp, classify_holant_plus, classify_holant_star
from .entclass import classify3, find_pair_projection, find_triple_projection, is_genuinely_entangled
from .errors import GridError, HolantError, TheoremViolation
from .fasteval import eval_auto
from .gadgetry import build_hardness_witness, verify_witness
from .gridnet import grid_from_dict, grid_to_dict, holant_bruteforce, holant_contract
from .holo import complex_qr, is_orthogonal, solve_ata_propto_x, transform_bipartite, transform_orthogonal
from .scalars import format_scalar, get_backend
from .sigcore import LocalMap, Signature, connected_factors, constants, from_symmetric, parse_signature_literal


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    backend: str = "exact"
    eps: float = 1e-9
    seed: int = 0
    edge_budget: int = 24
    arity_cap: int = 20
    format: str = "text"

    def to_json(self) -> dict:
        d = asdict(self)
        d.pop("format")
        return d


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--backend", choices=["exact", "float"], default=None)
    common.add_argument("--eps", type=float, default=1e-9)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--edge-budget", type=int, default=24)
    common.add_argument("--arity-cap", type=int, default=20)
    common.add_argument("--format", choices=["json", "text"], default="text")

    p = _Parser(prog="holant", description="Holant evaluation, classification and witnesses.")
    p.add_argument("--version", action="version", version=f"holant {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def sigsrc(sp):
        sp.add_argument("source", nargs="?", help="JSON file: grid or signature list")
        sp.add_argument("--sym", action="append", default=[], help="symmetric signature, e.g. 0,1,0,0")
        sp.add_argument("--vals", action="append", default=[], help="full coefficient list, index order")

    sp = sub.add_parser("eval", parents=[common], help="Holant of a closed grid")
    sp.add_argument("grid")
    sp.add_argument("--method", choices=["auto", "brute", "contract", "fast"], default="auto")
    sp.add_argument("--timing", action="store_true", help="include wall time in JSON output")

    sp = sub.add_parser("classify", parents=[common], help="dichotomy verdict for a signature set")
    sigsrc(sp)
    sp.add_argument("--mode", choices=["star", "csp", "plus"], default="plus")

    sp = sub.add_parser("entclass", parents=[common], help="entanglement class of a signature")
    sigsrc(sp)

    sp = sub.add_parser("project", parents=[common], help="projection chain to a ternary or a pair")
    sigsrc(sp)
    sp.add_argument("--pair", help="two wires i,j to keep entangled")

    sp = sub.add_parser("witness", parents=[common], help="hardness witness and its verification")
    sigsrc(sp)

    sp = sub.add_parser("transform", parents=[common], help="holographic transform of a grid")
    sp.add_argument("grid")
    sp.add_argument("--matrix", required=True)

    sp = sub.add_parser("qr", parents=[common], help="complex QR and the A^T A ∝ X solver")
    sp.add_argument("--matrix", required=True)
    sp.add_argument("--side", choices=["upper", "lower"], default="upper")

    sp = sub.add_parser("selftest", parents=[common], help="run the invariant suites")
    sp.add_argument("--quick", action="store_true")
    return p


# --- input helpers -----------------------------------------------------------

def _load_json(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise GridError(f"invalid JSON: {exc.msg}", f"{path} line {exc.lineno} col {exc.colno}") from None


def _split(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _signatures(args, be) -> list[Signature]:
    out = []
    if args.source:
        doc = _load_json(args.source)
        if isinstance(doc, dict) and "vertices" in doc:
            g = grid_from_dict(doc, be)
            out.extend(g.signatures[n] for n in sorted(g.signatures))
        else:
            items = doc.get("signatures") if isinstance(doc, dict) else doc
            if not isinstance(items, list):
                raise GridError("expected a list of signature literals", "$")
            for k, obj in enumerate(items):
                if not isinstance(obj, dict):
                    raise GridError("signature literal must be an object", f"$[{k}]")
                out.append(parse_signature_literal(obj, be))
    for s in args.sym:
        out.append(from_symmetric([be.parse(t) for t in _split(s)], be))
    for s in args.vals:
        out.append(Signature(be.array([be.parse(t) for t in _split(s)]), be))
    if not out:
        raise UsageError("no signatures given (file, --sym or --vals)")
    return out


def _one_signature(args, be) -> Signature:
    sigs = _signatures(args, be)
    if len(sigs) != 1:
        raise UsageError(f"expected one signature, got {len(sigs)}")
    return sigs[0]


def _matrix(text: str, be) -> LocalMap:
    named = constants(be)
    if text in named:
        return named[text]
    rows = [r for r in text.split(";") if r.strip()]
    vals = [be.parse(t) for r in rows for t in _split(r)]
    if len(rows) != 2 or len(vals) != 4:
        raise UsageError("matrix must be 2x2, rows separated by ';', e.g. '1,1;i,-i'")
    return LocalMap(be.array(vals, (2, 2)), be)


# --- subcommands ---------------------------------------------------------------

def cmd_eval(args, cfg, be):
    grid = grid_from_dict(_load_json(args.grid), be)
    t0 = time.perf_counter()
    route = args.method
    if args.method == "brute":
        val = holant_bruteforce(grid, max_edges=cfg.edge_budget)
    elif args.method == "contract":
        val = holant_contract(grid, cap=cfg.arity_cap)
    else:
        val, route = eval_auto(grid, seed=cfg.seed)
        if args.method == "fast" and route == "fallback":
            raise HolantError("no fast evaluator covers this grid")
    secs = time.perf_counter() - t0
    out = {"value": format_scalar(val), "route": route, "edges": grid.num_edges}
    if args.timing:
        out["seconds"] = round(secs, 6)
    text = f"{format_scalar(val)}\n(route {route}, {grid.num_edges} edges, {secs:.3f}s)"
    return out, text


def cmd_classify(args, cfg, be):
    F = _signatures(args, be)
    if args.mode == "star":
        v = classify_holant_star(F, seed=cfg.seed)
    elif args.mode == "csp":
        v = classify_csp(F)
    else:
        v = classify_holant_plus(F, seed=cfg.seed)
    out = v.to_json()
    lines = [f"{v.outcome} ({args.mode})"]
    if v.reason is not None:
        lines.append(f"family: {v.reason.tag}")
    if v.witness is not None:
        rep = verify_witness(v.witness, F)
        out["witness_verified"] = rep.passed
        lines.append(v.witness.transcript())
        lines.append(f"witness verified: {rep.passed}")
    return out, "\n".join(lines)


def cmd_entclass(args, cfg, be):
    f = _one_signature(args, be)
    f.require_nonzero()
    fac = connected_factors(f)
    out = {
        "arity": f.arity,
        "genuinely_entangled": is_genuinely_entangled(f),
        "factors": [list(w) for _, w in fac],
    }
    if f.arity == 3:
        c = classify3(f)
        out["class"] = c.tag
        if c.split:
            out["split"] = c.split
    label = out.get("class", "genuinely entangled" if out["genuinely_entangled"] else "separable")
    return out, f"{label}; factors on wires {out['factors']}"


def cmd_project(args, cfg, be):
    f = _one_signature(args, be)
    if args.pair:
        ij = [int(t) for t in _split(args.pair)]
        if len(ij) != 2:
            raise UsageError("--pair takes two wires i,j")
        chain = find_pair_projection(f, ij[0], ij[1])
    else:
        chain = find_triple_projection(f, seed=cfg.seed)
    out = chain.to_json()
    steps = ", ".join(f"wire {w} <- {k.name}" for w, k in chain.steps) or "none"
    return out, f"steps: {steps}\nsurvivors: {list(chain.survivors)}\nresidual: {chain.residual!r}"


def cmd_witness(args, cfg, be):
    F = _signatures(args, be)
    w = build_hardness_witness(F, seed=cfg.seed)
    rep = verify_witness(w, F)
    out = {"witness": w.to_json(), "verification": rep.to_json()}
    lines = [w.transcript(), f"verified: {rep.passed}"]
    for step, kind, ok, msg in rep.results:
        lines.append(f"  [{'ok' if ok else 'FAIL'}] {step} {kind}: {msg}")
    return out, "\n".join(lines)


def cmd_transform(args, cfg, be):
    grid = grid_from_dict(_load_json(args.grid), be)
    M = _matrix(args.matrix, be)
    if grid.bipartition is not None:
        new, how = transform_bipartite(grid, M), "bipartite"
    elif is_orthogonal(M):
        new, how = transform_orthogonal(grid, M), "orthogonal"
    else:
        raise HolantError("grid has no bipartition and the matrix is not orthogonal")
    out = {"kind": how, "grid": grid_to_dict(new)}
    return out, json.dumps(grid_to_dict(new), sort_keys=True, indent=1)


def cmd_qr(args, cfg, be):
    M = _matrix(args.matrix, be)
    r = complex_qr(M, args.side)
    ata = solve_ata_propto_x(M)
    out = {
        "Q": r.Q.to_strings(), "R": r.R.to_strings(), "kind": r.kind, "side": r.side,
        "ata": None if ata is None else {"form": ata.form, "D": ata.D.to_strings()},
    }
    text = f"Q ({r.kind}) = {r.Q.to_strings()}\nR = {r.R.to_strings()}\nA^T A ∝ X: {ata.form if ata else 'no'}"
    return out, text


def cmd_selftest(args, cfg, be):
    from .selftest import run_selftest

    res = run_selftest(cfg.seed, args.quick)
    out = {"quick": args.quick, "suites": res, "passed": all(r["passed"] for r in res)}
    lines = [f"{'PASS' if r['passed'] else 'FAIL'} {r['suite']} ({r['cases']} cases, {r['failures']} failures)"
             + (f" {r['error']}" if "error" in r else "") for r in res]
    return out, "\n".join(lines)


COMMANDS = {
    "eval": cmd_eval, "classify": cmd_classify, "entclass": cmd_entclass, "project": cmd_project,
    "witness": cmd_witness, "transform": cmd_transform, "qr": cmd_qr, "selftest": cmd_selftest,
}


def _emit(doc: dict, fmt: str, text: str | None, stream=None):
    stream = stream or sys.stdout
    if fmt == "json":
        stream.write(json.dumps(doc, sort_keys=True, indent=1) + "\n")
    elif text is not None:
        stream.write(text + "\n")


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    fmt = "json" if any(a == "json" and argv[k - 1] == "--format" for k, a in enumerate(argv) if k) \
        or "--format=json" in argv else "text"
    command = next((a for a in argv if a in COMMANDS), None)
    try:
        args = _parser().parse_args(argv)
    except UsageError as exc:
        _emit({"command": command, "error": {"type": "UsageError", "message": str(exc)}, "exit_code": 2},
              fmt, None)
        if fmt != "json":
            sys.stderr.write(f"holant: usage error: {exc}\n")
        return 2
    backend = args.backend or os.environ.get("HOLANT_BACKEND", "exact")
    cfg = RunConfig(backend, args.eps, args.seed, args.edge_budget, args.arity_cap, args.format)
    head = {"command": args.command, "config": cfg.to_json()}
    try:
        be = get_backend(backend, args.eps)
        out, text = COMMANDS[args.command](args, cfg, be)
    except UsageError as exc:
        _emit({**head, "error": {"type": "UsageError", "message": str(exc)}, "exit_code": 2}, fmt, None)
        if fmt != "json":
            sys.stderr.write(f"holant: usage error: {exc}\n")
        return 2
    except (HolantError, ValueError, ZeroDivisionError) as exc:
        err = {"type": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, GridError) and exc.location:
            err["location"] = exc.location
        if isinstance(exc, TheoremViolation):
            err["payload"] = exc.payload
        _emit({**head, "error": err, "exit_code": 1}, fmt, None)
        if fmt != "json":
            sys.stderr.write(f"holant: {err['type']}: {err['message']}\n")
        return 1
    _emit({**head, "result": out}, cfg.format, text)
    if args.command == "selftest" and not out["passed"]:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
