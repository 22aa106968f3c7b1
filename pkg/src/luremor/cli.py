"""Command-line frontend: ``luremor <subcommand> ...``.

Reports go to stdout as JSON with floats written to 17 significant digits,
so repeated runs are byte-identical. Plot data (Nyquist/Bode loci,
trajectories) goes to CSV files in ``--out`` or, when the flag is absent, in
the directory named by ``LUREMOR_OUT_DIR``.

Exit status: 0 when every check passes, 2 when an analysis check fails,
1 on errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from . import balanced_truncation as bt
from . import dominance
from .errors import (CertificateInvalid, DimensionMismatch, LureMorError, ParseError,
                     UnknownNonlinearityKind)
from .heatflow import HeatflowSpec, build_heatflow, reproduce_paper
from .lure import KINDS, LureModel, StaticNonlinearity, detect_limit_cycle, simulate
from .statespace import StateSpace, classify_modes

OUT_ENV = "LUREMOR_OUT_DIR"
EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


# -- model files --------------------------------------------------------------

def _matrix(doc: dict, key: str) -> np.ndarray:
    if key not in doc:
        raise ParseError(f"model file lacks field {key!r}")
    value = doc[key]
    if not isinstance(value, list) or not all(isinstance(r, list) for r in value):
        raise ParseError(f"field {key!r} must be a list of rows")
    widths = {len(r) for r in value}
    if len(widths) > 1:
        raise DimensionMismatch(f"field {key!r} has rows of unequal length {sorted(widths)}")
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"field {key!r} has non-numeric entries") from exc
    if arr.ndim != 2:
        arr = arr.reshape(len(value), 0)
    return arr


def _parse_phi(doc) -> StaticNonlinearity:
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ParseError("field 'phi' must be an object with a 'kind'")
    kind = doc["kind"]
    if kind not in KINDS:
        raise UnknownNonlinearityKind(f"unknown nonlinearity kind {kind!r}; expected one of {KINDS}")
    try:
        if kind == "shifted":
            if "base" in doc:
                base = _parse_phi(doc["base"])
            else:
                base = StaticNonlinearity.scaled_tanh(float(doc["gain"]))
            return StaticNonlinearity.shifted(base, float(doc.get("offset", 0.0)))
        return StaticNonlinearity(kind, gain=float(doc["gain"]))
    except KeyError as exc:
        raise ParseError(f"field 'phi' of kind {kind!r} lacks {exc.args[0]!r}") from None


def parse_model(doc: dict):
    """Build a model from an already decoded JSON document.

    Returns a :class:`LureModel` when both ``channels`` and ``phi`` are present,
    otherwise a :class:`StateSpace`.
    """
    if not isinstance(doc, dict):
        raise ParseError("model file must hold a JSON object")
    A, B, C = (_matrix(doc, k) for k in "ABC")
    if A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"field 'A' must be square, got {A.shape[0]}x{A.shape[1]}")
    n = A.shape[0]
    if B.shape[0] != n:
        raise DimensionMismatch(f"field 'B' has {B.shape[0]} rows, expected {n}")
    if C.shape[1] != n:
        raise DimensionMismatch(f"field 'C' has {C.shape[1]} columns, expected {n}")
    if "channels" not in doc or "phi" not in doc:
        return StateSpace(A, B, C)

    ch = doc["channels"]
    if not isinstance(ch, dict) or set(ch) != {"u", "w", "y", "z"}:
        raise ParseError("field 'channels' must map exactly u, w, y, z to indices")
    idx = {}
    for name, limit, field_name in (("u", B.shape[1], "B"), ("w", B.shape[1], "B"),
                                    ("y", C.shape[0], "C"), ("z", C.shape[0], "C")):
        k = ch[name]
        if not isinstance(k, int) or isinstance(k, bool):
            raise ParseError(f"channel {name!r} must be an integer index")
        if not 0 <= k < limit:
            raise DimensionMismatch(f"channel {name!r}={k} is out of range for field "
                                    f"{field_name!r} with {limit} entries")
        idx[name] = k
    lin = StateSpace(A, B[:, [idx["u"], idx["w"]]], C[[idx["y"], idx["z"]], :])
    return LureModel(lin, _parse_phi(doc["phi"]))


def load_model(path):
    """Read a model file; see :func:`parse_model` for the layout."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}") from exc
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from exc
    return parse_model(doc)


def model_to_dict(model) -> dict:
    if isinstance(model, LureModel):
        doc = model.linear.to_dict()
        doc["channels"] = {"u": 0, "w": 1, "y": 0, "z": 1}
        doc["phi"] = model.phi.to_dict()
        return doc
    return model.to_dict()


def dump_model(model, path):
    with open(path, "w") as fh:
        fh.write(dumps(model_to_dict(model)))
        fh.write("\n")


# -- JSON output --------------------------------------------------------------

def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, HeatflowSpec):
        return {"n": obj.n, "kappa": obj.kappa, "kp": obj.kp}
    return obj


def _emit(obj, indent: int, level: int, out: list):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (k, v) in enumerate(obj.items()):
            out.append(pad + json.dumps(k) + ": ")
            _emit(v, indent, level + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, list):
        if not obj:
            out.append("[]")
            return
        if all(not isinstance(v, (dict, list)) for v in obj):
            out.append("[")
            for i, v in enumerate(obj):
                _emit(v, indent, level, out)
                if i < len(obj) - 1:
                    out.append(", ")
            out.append("]")
            return
        out.append("[\n")
        for i, v in enumerate(obj):
            out.append(pad)
            _emit(v, indent, level + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "]")
    elif isinstance(obj, float):
        # non-finite values have no JSON literal
        out.append(format(obj, ".17g") if math.isfinite(obj) else "null")
    else:
        out.append(json.dumps(obj))


def dumps(obj, indent: int = 1) -> str:
    """JSON text with every float written as ``format(x, '.17g')``."""
    out: list[str] = []
    _emit(_plain(obj), indent, 0, out)
    return "".join(out)


# -- subcommands --------------------------------------------------------------

def _out_dir(args):
    d = args.out or os.environ.get(OUT_ENV)
    if d:
        os.makedirs(d, exist_ok=True)
    return d


def _parse_x0(spec: str | None, n: int) -> np.ndarray:
    """``zeros``, ``e<k>[:value]`` (1-based unit vector) or comma-separated values."""
    if spec is None:
        x0 = np.zeros(n)
        x0[0] = 1e-3
        return x0
    spec = spec.strip()
    if spec == "zeros":
        return np.zeros(n)
    if spec.startswith("e"):
        head, _, value = spec[1:].partition(":")
        try:
            k = int(head)
            v = float(value) if value else 1.0
        except ValueError:
            raise ParseError(f"bad --x0 spec {spec!r}") from None
        if not 1 <= k <= n:
            raise DimensionMismatch(f"--x0 unit vector index {k} outside 1..{n}")
        x0 = np.zeros(n)
        x0[k - 1] = v
        return x0
    try:
        x0 = np.array([float(t) for t in spec.split(",")])
    except ValueError:
        raise ParseError(f"bad --x0 spec {spec!r}") from None
    if x0.size != n:
        raise DimensionMismatch(f"--x0 has {x0.size} entries, model has {n} states")
    return x0


def cmd_reduce(args) -> tuple[dict, int]:
    model = load_model(args.model)
    if isinstance(model, LureModel):
        reduced, res = bt.reduce_dominant_lure(model, args.rate, args.order, args.tol)
    else:
        reduced, res = bt.reduce_dominant(model, args.rate, args.order, args.tol)
    report = {
        "command": "reduce",
        "rate": args.rate,
        "order": res.order,
        "p": res.dominant_order,
        "hsv": res.hsv,
        "error_bound": res.error_bound,
        "reduced": model_to_dict(reduced),
    }
    if args.output:
        dump_model(reduced, args.output)
        report["output"] = args.output
    return report, EXIT_OK


def cmd_analyze(args) -> tuple[dict, int]:
    model = load_model(args.model)
    lin = model.zw if isinstance(model, LureModel) else model
    norm = dominance.hinf_p_norm(lin, args.rate, tol=args.hinf_tol)
    modes = classify_modes(model.linear if isinstance(model, LureModel) else model,
                           args.rate, args.tol)
    report = {
        "command": "analyze",
        "rate": args.rate,
        "channel": "zw" if isinstance(model, LureModel) else "full",
        "norm": norm.gamma,
        "p": norm.p,
        "peak_frequency": norm.peak_frequency,
        "modes": {"p_dominant": modes.p_dominant, "n_nondominant": modes.n_nondominant,
                  "boundary_count": modes.boundary_count},
    }
    code = EXIT_OK
    sector = args.sector
    if sector is None and isinstance(model, LureModel):
        sector = model.phi.sector
    if sector is not None:
        if lin.m != 1 or lin.l != 1:
            raise LureMorError("--sector needs a Lure model or a SISO system")
        alpha, beta = sector
        circle = dominance.circle_criterion(lin, args.rate, alpha, beta)
        report["circle"] = circle.to_dict()
        if not circle.passed:
            code = EXIT_FAIL
        out = _out_dir(args)
        if out:
            path = os.path.join(out, "nyquist.csv")
            dominance.write_nyquist_csv(path, circle.omega, circle.locus)
            report["artifacts"] = [path]
    return report, code


def cmd_certify(args) -> tuple[dict, int]:
    model = load_model(args.model)
    lin = model.linear if isinstance(model, LureModel) else model
    try:
        cert = dominance.dominance_certificate(lin, args.rate)
    except CertificateInvalid as exc:
        return {"command": "certify", "rate": args.rate, "pass": False, "reason": str(exc)}, EXIT_FAIL
    return {
        "command": "certify",
        "rate": args.rate,
        "pass": True,
        "p": cert.p,
        "inertia": cert.inertia,
        "epsilon": cert.epsilon,
        "residual_max_eig": cert.residual_max_eig,
        "P": cert.P,
    }, EXIT_OK


def cmd_simulate(args) -> tuple[dict, int]:
    model = load_model(args.model)
    if not isinstance(model, LureModel):
        raise LureMorError("simulate needs a Lure model (fields 'channels' and 'phi')")
    x0 = _parse_x0(args.x0, model.n)
    traj = simulate(model, x0, u=args.u, t_end=args.tend, dt=args.dt)
    lc = detect_limit_cycle(traj, transient_fraction=args.transient)
    report = {
        "command": "simulate",
        "t_end": args.tend,
        "dt": args.dt,
        "steps": int(traj.times.size - 1),
        "final_state_norm": float(np.linalg.norm(traj.states[-1])),
        "limit_cycle": {"periodic": lc.periodic, "period": lc.period,
                        "amplitude": lc.amplitude, "crossings": lc.crossings},
    }
    out = _out_dir(args)
    if out:
        path = os.path.join(out, "trajectory.csv")
        traj.to_csv(path, include_states=args.states)
        report["artifacts"] = [path]
    return report, EXIT_OK


def _orders(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"orders must be comma-separated integers, got {text!r}")


def cmd_heatflow(args) -> tuple[dict, int]:
    spec = HeatflowSpec(n=args.n, kappa=args.kappa, kp=args.kp)
    out = _out_dir(args)
    if args.emit_model:
        dump_model(build_heatflow(spec), args.emit_model)
    sim_orders = () if args.no_simulate else None
    rep = reproduce_paper(args.orders, spec, rate=args.rate, simulate_orders=sim_orders,
                          t_end=args.tend, dt=args.dt, out_dir=out)
    print(f"heatflow pipeline: {rep.wall_time:.2f} s", file=sys.stderr)
    report = rep.to_dict()
    report.pop("wall_time")  # keeps stdout reproducible byte for byte
    report["command"] = "heatflow"
    report["epsilons"] = rep.epsilons
    if args.emit_model:
        report["model_file"] = args.emit_model
    ok = rep.circle["pass"] and all(o["theorem1"]["conclusion"] for o in rep.orders)
    return report, EXIT_OK if ok else EXIT_FAIL


# -- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="luremor", description=__doc__.splitlines()[0],
                                     formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, model=True):
        if model:
            p.add_argument("model", help="JSON model file")
        p.add_argument("--out", help=f"directory for CSV artifacts (default: ${OUT_ENV})")

    p = sub.add_parser("reduce", help="dominance-preserving balanced truncation", formatter_class=fmt)
    common(p)
    p.add_argument("--rate", type=float, required=True, help="rate lambda")
    p.add_argument("--order", type=int, required=True, help="total reduced order nu")
    p.add_argument("--tol", type=float, default=None,
                   help="boundary tolerance (default 1e-9 * (1 + spectral radius))")
    p.add_argument("--output", help="write the reduced model to this JSON file")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("analyze", help="H-infinity,p norm and circle criterion", formatter_class=fmt)
    common(p)
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--sector", type=float, nargs=2, metavar=("ALPHA", "BETA"),
                   help="sector for the circle criterion (default: that of phi)")
    p.add_argument("--tol", type=float, default=None, help="boundary tolerance")
    p.add_argument("--hinf-tol", type=float, default=1e-9, help="relative norm accuracy")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("certify", help="quadratic dominance certificate", formatter_class=fmt)
    common(p)
    p.add_argument("--rate", type=float, required=True)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("simulate", help="RK4 simulation of the closed loop", formatter_class=fmt)
    common(p)
    p.add_argument("--tend", type=float, default=5.0)
    p.add_argument("--dt", type=float, default=1e-4)
    p.add_argument("--x0", help="'zeros', 'e<k>[:value]' or comma-separated values "
                                "(default e1:1e-3)")
    p.add_argument("--u", type=float, default=0.0, help="constant exogenous input")
    p.add_argument("--transient", type=float, default=0.5,
                   help="fraction of samples discarded before limit-cycle detection")
    p.add_argument("--states", action="store_true", help="include states in the trajectory CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("heatflow", help="heat-flow benchmark", formatter_class=fmt)
    common(p, model=False)
    p.add_argument("--n", type=int, default=29)
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--kp", type=float, default=20.0)
    p.add_argument("--orders", type=_orders, default=[3, 4, 5])
    p.add_argument("--rate", type=float, default=12.0)
    p.add_argument("--tend", type=float, default=5.0)
    p.add_argument("--dt", type=float, default=1e-4)
    p.add_argument("--no-simulate", action="store_true", help="skip the closed-loop simulations")
    p.add_argument("--emit-model", metavar="PATH", help="also write the heat-flow model file")
    p.set_defaults(func=cmd_heatflow)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.perf_counter()
    try:
        report, code = args.func(args)
    except (LureMorError, ValueError, OSError) as exc:
        print(f"luremor {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    sys.stdout.write(dumps(report) + "\n")
    sys.stdout.flush()
    if args.command != "heatflow":
        print(f"luremor {args.command}: {time.perf_counter() - start:.2f} s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
