"""``aprank`` command-line interface.

Every run writes a JSON report with the command, version, seed, inputs and
outputs.  Wall-clock timings and the thread count live under the report's
``run`` key; everything else is reproducible from the seed.  Exit status is
0 on success, 2 when an algorithm fails its contract (search exhausted,
budget exceeded, ...) and 1 on usage or input errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import secrets
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, _parallel
from . import io as aio
from .apps import InstanceSpec, bench_csv, bench_suite, estimate_linf, generate_instance
from .energy import certify, decompose_energy
from .errors import (
    AprankError, BudgetExceededError, FrankWolfeError, RankDeficiencyError, SearchFailure,
    ShapeMismatchError, SparsifyFailure,
)
from .frankwolfe import FWConfig, audit_trace, fw_decompose
from .norms import linf_lower, lr_norm, parse_norm_kind, sample_sphere
from .search import SearchConfig, covering_oracle, sample_size_bound, covering_size, COVERING_BUDGET
from .sparsify import SparsifyConfig, linf_upper, maurey_sparsify, nuclear_upper
from .tensor import Decomposition, evaluate, hs_norm, materialize

log = logging.getLogger("aprank")

CONTRACT_ERRORS = (SearchFailure, SparsifyFailure, FrankWolfeError, BudgetExceededError,
                   RankDeficiencyError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------
# argument types
# --------------------------------------------------------------------------

def _positive_float(text):
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not x > 0 or not math.isfinite(x):
        raise argparse.ArgumentTypeError(f"must be a positive finite number, got {text}")
    return x


def _positive_int(text):
    try:
        k = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if k < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {k}")
    return k


def _seed(text):
    try:
        k = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be a non-negative integer, got {text!r}") from None
    if k < 0:
        raise argparse.ArgumentTypeError(f"seed must be non-negative, got {k}")
    return k


def _r_value(text):
    try:
        r = parse_norm_kind(text if text.lower().startswith(("l", "inf")) else "l" + text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    if r == "hs":
        raise argparse.ArgumentTypeError("--r takes a number >= 2 or 'inf'")
    return r


def _norm_kind(text):
    try:
        parse_norm_kind(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return text


def _angle(text):
    if text.lower() in ("off", "none"):
        return None
    if text.lower() == "on":
        return 0.8
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("angle filter takes a cosine in [0, 1] or 'off'") from None
    if not 0.0 <= x <= 1.0:
        raise argparse.ArgumentTypeError(f"angle filter cosine must lie in [0, 1], got {x}")
    return x


def _point(text):
    try:
        return [float(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"-x takes comma-separated numbers, got {text!r}") from None


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("-i", "--input", help="input tensor or decomposition JSON")
    common.add_argument("-o", "--output", help="primary output file")
    common.add_argument("--report", help="report JSON path (default: <output>.report.json, "
                                         "or stderr without --output)")
    common.add_argument("--seed", type=_seed, help="random seed (default: drawn and reported)")
    common.add_argument("--threads", type=_positive_int,
                        help="worker threads (default: $APRANK_THREADS or 1)")
    common.add_argument("--samples", type=_positive_int, default=100_000,
                        help="sphere samples per batch or estimate (default 100000)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = _Parser(prog="aprank", description="Certified low-rank approximation of symmetric tensors.")
    p.add_argument("--version", action="version", version=f"aprank {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", parents=[common], help="random planted instance")
    g.add_argument("--m", type=int, default=10, help="planted rank (default 10)")
    g.add_argument("--n", type=_positive_int, default=4, help="number of variables (default 4)")
    g.add_argument("--two-d", type=int, default=4, help="even degree (default 4)")
    g.add_argument("--epsilon", type=float, default=0.3, help="offset scale (default 0.3)")
    g.add_argument("--planted", help="also write the planted decomposition here")

    d = sub.add_parser("decompose", parents=[common], help="low-rank approximation")
    d.add_argument("--method", choices=("energy", "maurey", "fw"), default="energy")
    d.add_argument("--epsilon", type=_positive_float, required=True)
    d.add_argument("--r", type=_r_value, default=4, help="L_r norm for energy (default 4)")
    d.add_argument("--retries", type=_positive_int, help="search batches / Maurey redraws")
    d.add_argument("--angle-filter", type=_angle, default=0.8,
                   help="reject witnesses with |cos| >= this against chosen vectors "
                        "('on' = 0.8, 'off' disables)")
    d.add_argument("--c1", type=_positive_float, default=3.0,
                   help="constant in the sample-size bound (reported only)")
    d.add_argument("--norm", type=_norm_kind, default="hs", help="Maurey acceptance norm")
    d.add_argument("--t2", type=_positive_float, help="override the type-2 constant (Maurey)")
    d.add_argument("--nuclear", type=_positive_float, help="nuclear-norm guess (Frank-Wolfe)")
    d.add_argument("--lmo", choices=("sample", "cover"), default="sample")
    d.add_argument("--eta", type=_positive_float, default=0.02, help="covering resolution")
    d.add_argument("--max-iters", type=_positive_int, help="Frank-Wolfe iteration cap")
    d.add_argument("--trace", help="Frank-Wolfe trace CSV path")

    s = sub.add_parser("sparsify", parents=[common], help="Maurey sparsification")
    s.add_argument("--norm", type=_norm_kind, default="hs", help="hs | l<r> | linf")
    s.add_argument("--epsilon", type=_positive_float, required=True)
    s.add_argument("--retries", type=_positive_int, default=16)
    s.add_argument("--t2", type=_positive_float, help="override the type-2 constant")
    s.add_argument("--eta", type=_positive_float, default=0.05, help="covering resolution for linf")

    nm = sub.add_parser("norm", parents=[common], help="norm of a tensor")
    nm.add_argument("--kind", type=_norm_kind, default="hs", help="hs | l<r> | linf-lower | linf")
    nm.add_argument("--eta", type=_positive_float, default=0.05, help="covering resolution for linf")

    e = sub.add_parser("estimate-linf", parents=[common], help="bracket the sup norm")
    e.add_argument("--epsilon", type=_positive_float, default=0.1)
    e.add_argument("--retries", type=_positive_int, default=16)

    ev = sub.add_parser("eval", parents=[common], help="evaluate at points")
    ev.add_argument("-x", "--point", type=_point, action="append", required=True,
                    help="comma-separated point; repeatable")

    b = sub.add_parser("bench", parents=[common], help="run a benchmark table")
    b.add_argument("--config", required=True, help="bench JSON with a 'specs' list")
    return p


# --------------------------------------------------------------------------
# commands; each returns (inputs, outputs, stdout line)
# --------------------------------------------------------------------------

def _require_input(args):
    if not args.input:
        raise UsageError(f"{args.command} needs --input")
    return args.input


def _write_output(args, obj, inputs):
    if args.output:
        aio.save(obj, args.output)
        inputs["output"] = args.output


def cmd_generate(args):
    spec = InstanceSpec(args.m, args.n, args.two_d, args.epsilon, args.seed)
    f, planted = generate_instance(spec)
    inputs = spec.to_dict()
    _write_output(args, f, inputs)
    if args.planted:
        aio.save(planted, args.planted)
    outputs = {"dim": spec.dimension, "hs_norm": hs_norm(f), "planted_terms": len(planted)}
    if not args.output:
        return inputs, outputs, aio.dumps(f).rstrip()
    return inputs, outputs, f"wrote {args.output} (dimension {spec.dimension})"


def cmd_decompose(args):
    path = _require_input(args)
    obj = aio.load(path)
    inputs = {"input": path, "method": args.method, "epsilon": args.epsilon}
    if args.method == "maurey":
        if not isinstance(obj, Decomposition):
            raise UsageError("--method maurey needs a decomposition input")
        cfg = SparsifyConfig(args.norm, args.epsilon, seed=args.seed,
                             max_retries=args.retries or 16, type2_override=args.t2,
                             samples=args.samples, eta=args.eta)
        return _sparsify(args, obj, cfg, inputs)
    f = materialize(obj) if isinstance(obj, Decomposition) else obj
    if args.method == "energy":
        cfg = SearchConfig(sample_size=args.samples, max_retries=args.retries or 20,
                           seed=args.seed, c1=args.c1, angle_cos_threshold=args.angle_filter)
        inputs.update(r=_json_r(args.r), samples=args.samples, angle_filter=args.angle_filter)
        D, state = decompose_energy(f, args.r, args.epsilon, cfg)
        outputs = {"rank": len(D), "loops": state.loops, "loop_bound": state.loop_bound(args.epsilon),
                   "residual_norm": state.residual_r_norm, "residual_history": state.residual_history,
                   "hs_norm_sq": state.hs_norm_sq}
        if args.r != math.inf:
            bound, saturated = sample_size_bound(f.n, f.d, args.r, 3.0, args.c1)
            outputs["theory_sample_size"] = {"t": 3.0, "value": bound, "saturated": saturated}
            est = certify(f, D, args.r, seed=args.seed + 1, samples=args.samples)
            outputs["certified_residual"] = est.to_dict()
        _write_output(args, D, inputs)
        return inputs, outputs, f"rank {len(D)}, residual L_{args.r} norm {state.residual_r_norm:.6g}"
    # Frank-Wolfe
    c = args.nuclear
    if c is None:
        if not isinstance(obj, Decomposition):
            raise UsageError("--method fw on a tensor input needs --nuclear (an upper bound "
                             "on the nuclear norm)")
        c = nuclear_upper(obj)
    cfg = FWConfig(args.epsilon, c, lmo=args.lmo, max_iters=args.max_iters, seed=args.seed,
                   eta=args.eta, samples=args.samples)
    inputs.update(nuclear=c, lmo=args.lmo, eta=args.eta, max_iters=cfg.iteration_budget())
    D, trace = fw_decompose(f, cfg)
    if args.trace:
        Path(args.trace).write_text(trace.to_csv())
    outputs = {"rank": len(D), "iterations": trace.iterations, "hs_error": hs_norm(f - materialize(D)),
               "audit": audit_trace(trace)}
    _write_output(args, D, inputs)
    return inputs, outputs, f"rank {len(D)}, HS error {outputs['hs_error']:.6g}"


def _json_r(r):
    return "inf" if r == math.inf else r


def _sparsify(args, D, cfg, inputs):
    inputs.update(norm=cfg.norm, t2=cfg.type2_override, retries=cfg.max_retries)
    out, draws = maurey_sparsify(D, cfg)
    hs_err = hs_norm(materialize(D) - materialize(out))
    outputs = {"terms_in": len(D), "terms_out": len(out), "draws": draws,
               "nuclear_upper": nuclear_upper(D), "hs_error": hs_err}
    _write_output(args, out, inputs)
    return inputs, outputs, f"{len(D)} -> {len(out)} terms after {draws} draw(s)"


def cmd_sparsify(args):
    path = _require_input(args)
    D = aio.load_decomposition(path)
    cfg = SparsifyConfig(args.norm, args.epsilon, seed=args.seed, max_retries=args.retries,
                         type2_override=args.t2, samples=args.samples, eta=args.eta)
    return _sparsify(args, D, cfg, {"input": path, "epsilon": args.epsilon})


def cmd_norm(args):
    path = _require_input(args)
    obj = aio.load(path)
    f = materialize(obj) if isinstance(obj, Decomposition) else obj
    kind = args.kind.lower()
    inputs = {"input": path, "kind": kind}
    if kind == "hs":
        v = hs_norm(f)
        return inputs, {"value": v, "method": "exact"}, repr(v)
    if kind == "linf-lower":
        X = sample_sphere(f.n, args.samples, args.seed, stream=(51,))
        v = linf_lower(f, X)
        inputs["samples"] = args.samples
        return inputs, {"value": v, "method": "sampled-max"}, repr(v)
    r = parse_norm_kind(kind)
    if r == math.inf:
        inputs["eta"] = args.eta
        if covering_size(f.n, f.d, args.eta) <= COVERING_BUDGET:
            _, lo, hi = covering_oracle(f, args.eta)
            method = "covering"
        else:
            X = sample_sphere(f.n, args.samples, args.seed, stream=(51,))
            lo = linf_lower(f, X)
            D = obj if isinstance(obj, Decomposition) else None
            if D is None:
                raise BudgetExceededError("covering net too large; pass a decomposition input "
                                          "for a Barvinok upper bound")
            hi = linf_upper(D, SparsifyConfig("linf", 1.0, eta=args.eta))
            method = "sampled-max+barvinok"
        return inputs, {"lower": lo, "upper": hi, "method": method}, f"{lo!r} {hi!r}"
    est = lr_norm(f, r, samples=args.samples, seed=args.seed, stream=(52,))
    inputs["samples"] = args.samples
    return inputs, est.to_dict(), repr(est.value)


def cmd_estimate_linf(args):
    path = _require_input(args)
    D = aio.load_decomposition(path)
    iv = estimate_linf(D, args.epsilon, seed=args.seed, samples=args.samples,
                       max_retries=args.retries)
    inputs = {"input": path, "epsilon": args.epsilon}
    return inputs, iv.to_dict(), f"{iv.lower!r} {iv.upper!r}"


def cmd_eval(args):
    path = _require_input(args)
    obj = aio.load(path)
    vals = []
    for x in args.point:
        if len(x) != obj.n:
            raise ShapeMismatchError(f"point {x} has length {len(x)}, the input has n={obj.n}")
        vals.append(float(obj(x)) if isinstance(obj, Decomposition) else float(evaluate(obj, x)))
    return {"input": path, "points": args.point}, {"values": vals}, "\n".join(repr(v) for v in vals)


def cmd_bench(args):
    try:
        cfg = json.loads(Path(args.config).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read {args.config}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{args.config}: malformed JSON ({exc})") from None
    if not isinstance(cfg, dict) or not isinstance(cfg.get("specs"), list):
        raise UsageError(f"{args.config}: expected an object with a 'specs' list")
    try:
        specs = [InstanceSpec(**s) for s in cfg["specs"]]
    except (TypeError, ValueError) as exc:
        raise UsageError(f"{args.config}: bad spec ({exc})") from None
    method = cfg.get("method", "energy")
    r = cfg.get("r", 4)
    r = math.inf if r == "inf" else r
    rows = bench_suite(specs, method, r, cfg.get("epsilon"),
                       samples=cfg.get("samples", args.samples), seed=args.seed)
    seconds = [row.pop("seconds") for row in rows]
    if args.output:
        text = bench_csv(rows) if args.output.endswith(".csv") else json.dumps(rows, indent=1) + "\n"
        Path(args.output).write_text(text)
    failed = sum(row["status"] != "ok" for row in rows)
    inputs = {"config": args.config, "method": method, "r": _json_r(r), "output": args.output}
    return inputs, {"rows": rows, "failed": failed}, bench_csv(rows).rstrip(), {"row_seconds": seconds}


COMMANDS = {
    "generate": cmd_generate, "decompose": cmd_decompose, "sparsify": cmd_sparsify,
    "norm": cmd_norm, "estimate-linf": cmd_estimate_linf, "eval": cmd_eval, "bench": cmd_bench,
}


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

def _write_report(args, report):
    text = json.dumps(report, indent=1, default=_json_default) + "\n"
    dest = args.report or (args.output + ".report.json" if getattr(args, "output", None) else None)
    if dest:
        Path(dest).write_text(text)
    else:
        sys.stderr.write(text)


def _json_default(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="aprank: %(levelname)s: %(message)s")
    if args.seed is None:
        args.seed = secrets.randbits(32)
        log.warning("no --seed given; using %d", args.seed)
    _parallel.set_threads(args.threads)
    report = {"command": args.command, "version": __version__, "seed": args.seed}
    start = time.perf_counter()
    status = 0
    extra_run = {}
    try:
        result = COMMANDS[args.command](args)
        inputs, outputs, line = result[:3]
        if len(result) > 3:
            extra_run = result[3]
        report.update(status="ok", inputs=inputs, outputs=outputs)
        if line:
            print(line)
    except CONTRACT_ERRORS as exc:
        status = 2
        report.update(status="failed", error=f"{type(exc).__name__}: {exc}")
        _attach_partial(args, exc, report)
        print(f"aprank: {type(exc).__name__}: {exc}", file=sys.stderr)
    except (UsageError, aio.FormatError, ShapeMismatchError, ValueError) as exc:
        print(f"aprank: error: {exc}", file=sys.stderr)
        return 1
    except AprankError as exc:
        status = 2
        report.update(status="failed", error=f"{type(exc).__name__}: {exc}")
        print(f"aprank: {type(exc).__name__}: {exc}", file=sys.stderr)
    report["run"] = {"seconds": time.perf_counter() - start, "threads": _parallel.get_threads(),
                     **extra_run}
    _write_report(args, report)
    return status


def _attach_partial(args, exc, report):
    """Keep whatever the failed algorithm produced in the report."""
    for name in ("partial", "best", "decomposition"):
        partial = getattr(exc, name, None)
        if isinstance(partial, Decomposition):
            report["partial"] = aio.to_dict(partial)
            break
    if getattr(exc, "best_error", None) is not None:
        report["best_error"] = exc.best_error


if __name__ == "__main__":
    sys.exit(main())
