"""Benchmark harness: cost-model calibration, size sweeps, table emission.

calibrate() solves the cost model in closed form so that the simulated
offload reproduces the target ratios (speedup over host, data-copy
fraction, per-page mapping advantage) at the anchor problem size.
run_sweep() then measures breakdowns across sizes and paths, and emit()
renders deterministic CSV or JSON.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .cluster import ClusterConfig, execution_cost
from .gemm import GemmProblem, Matrix, plan_tiles
from .runtime import CostModelParams, OffloadPath, OffloadSession, host_gemm_cycles

DEFAULT_SEED = 0x5EED

CSV_HEADER = ("size,path,data_copy_cycles,fork_join_cycles,"
              "compute_cycles,total_cycles,seconds,speedup_vs_host")


class InfeasibleTargets(ValueError):
    """Cluster compute alone exceeds the non-copy budget at the anchor."""


@dataclass
class CalibrationTargets:
    """Ratios the calibrated model must reproduce at the anchor size."""

    target_speedup: float = 2.71
    target_copy_fraction: float = 0.47
    target_map_advantage: float = 7.5
    anchor_size: int = 128

    def __post_init__(self):
        for name in ("target_speedup", "target_copy_fraction",
                     "target_map_advantage"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.target_copy_fraction >= 1:
            raise ValueError("target_copy_fraction must be below 1")
        if self.anchor_size < 1:
            raise ValueError("anchor_size must be at least 1")


@dataclass
class SweepRow:
    size: int
    path: OffloadPath
    data_copy_cycles: int
    fork_join_cycles: int
    compute_cycles: int
    total_cycles: int
    seconds: float
    speedup_vs_host: float


SweepResult = list  # list[SweepRow]


def calibrate(targets: CalibrationTargets | None = None,
              cfg: ClusterConfig | None = None,
              fixed: dict | None = None) -> CostModelParams:
    """Solve the cost model against the targets at the anchor problem.

    The anchor is a square float64 GEMM with beta = 0: its copy traffic
    is A and B in plus C out.  Copy throughput and the fork/join charge
    come from the speedup and copy-fraction targets; the per-page
    mapping cost is the one-page copy cost divided by the mapping
    advantage.  Raises InfeasibleTargets when the cluster's compute
    already exceeds the non-copy budget.
    """
    targets = targets if targets is not None else CalibrationTargets()
    cfg = cfg if cfg is not None else ClusterConfig()
    fixed = dict(fixed or {})
    host_flops = fixed.pop("host_flops_per_cycle", 0.25)
    page_size = fixed.pop("page_size", 4096)
    clock_hz = fixed.pop("clock_hz", 50e6)
    if fixed:
        raise ValueError(f"unknown fixed parameters: {sorted(fixed)}")

    s = targets.anchor_size
    problem = GemmProblem(m=s, n=s, k=s, alpha=1.0, beta=0.0)
    host_total = int(math.ceil(2 * s**3 / host_flops))
    total_offload = host_total / targets.target_speedup
    data_copy = targets.target_copy_fraction * total_offload

    copy_bytes = 3 * s * s * 8  # A and B in, C out
    copy_rate = copy_bytes / data_copy

    plan = plan_tiles(problem, cfg)
    compute = execution_cost(plan, problem, cfg).total_cycles

    fork_join = int(round(total_offload - data_copy - compute))
    if fork_join <= 0:
        raise InfeasibleTargets(
            f"anchor compute of {compute} cycles leaves no fork/join budget "
            f"(total offload target {total_offload:.0f}, copy {data_copy:.0f})")

    page_copy_cycles = math.ceil(page_size / copy_rate)
    per_page = max(1, int(round(page_copy_cycles / targets.target_map_advantage)))

    return CostModelParams(
        host_copy_bytes_per_cycle=copy_rate,
        fork_join_cycles=fork_join,
        iommu_map_cycles_per_page=per_page,
        host_flops_per_cycle=host_flops,
        page_size=page_size,
        clock_hz=clock_hz,
    )


def benchmark_matrices(size: int, seed: int = DEFAULT_SEED) -> tuple[Matrix, Matrix]:
    """Seeded square operands, uniform in [-1, 1], stable per (seed, size)."""
    rng = np.random.default_rng([seed, size])
    a = Matrix.from_array(rng.uniform(-1.0, 1.0, size=(size, size)))
    b = Matrix.from_array(rng.uniform(-1.0, 1.0, size=(size, size)))
    return a, b


def run_sweep(sizes, paths, params: CostModelParams,
              cfg: ClusterConfig | None = None,
              seed: int = DEFAULT_SEED) -> list[SweepRow]:
    """Measure every (size, path) point with a fresh session per point.

    Rows come back sorted by size then path order, so output is stable
    no matter how callers schedule the points.
    """
    cfg = cfg if cfg is not None else ClusterConfig()
    sizes = sorted(set(int(s) for s in sizes))
    if any(s < 1 for s in sizes):
        raise ValueError("sweep sizes must be at least 1")
    order = {p: i for i, p in enumerate(OffloadPath)}
    paths = sorted(set(paths), key=order.__getitem__)

    rows = []
    for size in sizes:
        a, b = benchmark_matrices(size, seed)
        problem = GemmProblem(m=size, n=size, k=size, alpha=1.0, beta=0.0)
        host_total = host_gemm_cycles(problem, params)
        for path in paths:
            session = OffloadSession(params, cfg)
            if path is not OffloadPath.HOST_ONLY:
                session.boot()
            _, breakdown = session.offload_gemm(problem, a, b, None, path)
            speedup = (1.0 if path is OffloadPath.HOST_ONLY
                       else host_total / breakdown.total_cycles)
            rows.append(SweepRow(
                size=size,
                path=path,
                data_copy_cycles=breakdown.data_copy_cycles,
                fork_join_cycles=breakdown.fork_join_cycles,
                compute_cycles=breakdown.compute_cycles,
                total_cycles=breakdown.total_cycles,
                seconds=breakdown.total_cycles / params.clock_hz,
                speedup_vs_host=speedup,
            ))
    return rows


def emit(results: list[SweepRow], format: str = "csv") -> str:
    """Render sweep rows as CSV or JSON with a stable field order."""
    if format == "csv":
        out = io.StringIO()
        out.write(CSV_HEADER + "\n")
        for r in results:
            out.write(f"{r.size},{r.path.value},{r.data_copy_cycles},"
                      f"{r.fork_join_cycles},{r.compute_cycles},{r.total_cycles},"
                      f"{r.seconds!r},{r.speedup_vs_host!r}\n")
        return out.getvalue()
    if format == "json":
        payload = []
        for r in results:
            d = asdict(r)
            d["path"] = r.path.value
            payload.append(d)
        return json.dumps(payload, indent=2) + "\n"
    raise ValueError(f"unknown format {format!r} (expected csv or json)")


# -- JSON config files --------------------------------------------------

def _load_dataclass(cls, data: dict, label: str):
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ValueError(f"unknown {label} keys: {unknown}")
    return cls(**data)


def load_params(data: dict) -> CostModelParams:
    return _load_dataclass(CostModelParams, data, "cost-model")


def load_targets(data: dict) -> CalibrationTargets:
    return _load_dataclass(CalibrationTargets, data, "calibration-target")


def params_to_dict(params: CostModelParams) -> dict:
    return asdict(params)
