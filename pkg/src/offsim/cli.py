"""Command-line interface for the offload simulator.

Subcommands:
  bench        run a size sweep across offload paths, emit CSV or JSON
  calibrate    solve the cost model for a targets file, write params JSON
  gemm-verify  run one seeded GEMM on a path and check it against the
               reference kernel (nonzero exit on mismatch)
  matmul       multiply two matrix files through the runtime; used by
               external bindings
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bench import (
    DEFAULT_SEED,
    CalibrationTargets,
    benchmark_matrices,
    calibrate,
    emit,
    load_params,
    load_targets,
    params_to_dict,
    run_sweep,
)
from .gemm import (
    GemmProblem,
    Matrix,
    dot_scale,
    gemm_offloaded,
    gemm_reference,
    max_relative_error,
)
from .runtime import OffloadPath, OffloadSession, breakdown_to_seconds

VERIFY_TOLERANCE = 1e-12


def _read_json(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _resolve_params(args):
    if getattr(args, "config", None):
        return load_params(_read_json(args.config))
    if getattr(args, "targets", None):
        return calibrate(load_targets(_read_json(args.targets)))
    return calibrate()


def _write_text(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _breakdown_payload(breakdown, params, path: OffloadPath) -> dict:
    return {
        "path": path.value,
        "data_copy_cycles": breakdown.data_copy_cycles,
        "fork_join_cycles": breakdown.fork_join_cycles,
        "compute_cycles": breakdown.compute_cycles,
        "total_cycles": breakdown.total_cycles,
        "fell_back": breakdown.fell_back,
        "seconds": breakdown_to_seconds(breakdown, params),
    }


def cmd_bench(args) -> int:
    params = _resolve_params(args)
    sizes = [int(s) for s in args.sizes.split(",") if s]
    paths = [OffloadPath.parse(p) for p in args.paths.split(",") if p]
    rows = run_sweep(sizes, paths, params, seed=args.seed)
    _write_text(emit(rows, args.format), args.out)
    return 0


def cmd_calibrate(args) -> int:
    targets = (load_targets(_read_json(args.targets))
               if args.targets else CalibrationTargets())
    params = calibrate(targets)
    text = json.dumps(params_to_dict(params), indent=2) + "\n"
    _write_text(text, args.out)
    return 0


def cmd_gemm_verify(args) -> int:
    params = _resolve_params(args)
    path = OffloadPath.parse(args.path)
    a, b = benchmark_matrices(args.size, args.seed)
    problem = GemmProblem(m=args.size, n=args.size, k=args.size)

    session = OffloadSession(params)
    if path is not OffloadPath.HOST_ONLY:
        session.boot()
    result, breakdown = gemm_offloaded(problem, a, b, None, path, session)
    reference = gemm_reference(problem, a, b)
    err = max_relative_error(result, reference, floor=dot_scale(problem, a, b))

    if args.dump_dir:
        dump = Path(args.dump_dir)
        dump.mkdir(parents=True, exist_ok=True)
        a.to_file(dump / "a.bin")
        b.to_file(dump / "b.bin")
        result.to_file(dump / "result.bin")
        payload = _breakdown_payload(breakdown, params, path)
        payload["max_relative_error"] = err
        (dump / "breakdown.json").write_text(json.dumps(payload, indent=2) + "\n")

    if err > VERIFY_TOLERANCE:
        print(f"FAIL size={args.size} path={path.value} "
              f"max relative error {err:.3e} > {VERIFY_TOLERANCE:.0e}")
        return 1
    print(f"OK size={args.size} path={path.value} max relative error {err:.3e}")
    return 0


def cmd_matmul(args) -> int:
    params = _resolve_params(args)
    path = OffloadPath.parse(args.path)
    a = Matrix.from_file(args.a)
    b = Matrix.from_file(args.b)
    if a.cols != b.rows:
        print(f"shape mismatch: {a.rows}x{a.cols} @ {b.rows}x{b.cols}")
        return 2
    problem = GemmProblem(m=a.rows, n=b.cols, k=a.cols)

    session = OffloadSession(params)
    if path is not OffloadPath.HOST_ONLY:
        session.boot()
    result, breakdown = gemm_offloaded(problem, a, b, None, path, session)
    result.to_file(args.out)
    if args.breakdown_out:
        payload = _breakdown_payload(breakdown, params, path)
        Path(args.breakdown_out).write_text(json.dumps(payload, indent=2) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="offsim",
                                     description="GEMM offload simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bench", help="run a size sweep across offload paths")
    p.add_argument("--sizes", default="32,64,128",
                   help="comma-separated square problem sizes")
    p.add_argument("--paths", default="host,copy,zerocopy",
                   help="comma-separated paths: host,copy,zerocopy")
    p.add_argument("--config", help="cost-model params JSON")
    p.add_argument("--targets", help="calibration targets JSON")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--seed", type=lambda v: int(v, 0), default=DEFAULT_SEED)
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("calibrate", help="solve the cost model for targets")
    p.add_argument("--targets", help="calibration targets JSON")
    p.add_argument("--out", help="params JSON output (default stdout)")
    p.set_defaults(fn=cmd_calibrate)

    p = sub.add_parser("gemm-verify",
                       help="check one offloaded GEMM against the reference")
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--path", default="copy")
    p.add_argument("--seed", type=lambda v: int(v, 0), default=DEFAULT_SEED)
    p.add_argument("--config", help="cost-model params JSON")
    p.add_argument("--targets", help="calibration targets JSON")
    p.add_argument("--dump-dir",
                   help="write a.bin, b.bin, result.bin and breakdown.json here")
    p.set_defaults(fn=cmd_gemm_verify)

    p = sub.add_parser("matmul", help="multiply two matrix files (alpha=1, beta=0)")
    p.add_argument("--a", required=True, help="left operand matrix file")
    p.add_argument("--b", required=True, help="right operand matrix file")
    p.add_argument("--path", default="host")
    p.add_argument("--config", help="cost-model params JSON")
    p.add_argument("--targets", help="calibration targets JSON")
    p.add_argument("--out", required=True, help="result matrix file")
    p.add_argument("--breakdown-out", help="breakdown JSON output")
    p.set_defaults(fn=cmd_matmul)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
