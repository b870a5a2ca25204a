"""Functional-plus-timing model of the accelerator cluster.

Eight worker cores with fused multiply-add units execute GEMM tiles out
of the L1 scratchpad while a DMA engine refills it from external memory.
Timing assumes perfect double-buffer overlap: the steady state costs
max(FPU work, DMA streaming), plus a fixed startup charge per DMA
transfer and a barrier per tile step.  The numerical result never
depends on any timing parameter.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class ClusterConfig:
    """Cluster geometry and rate constants.

    flops_per_core_per_cycle defaults to 2: one fused multiply-add
    retired per core per cycle.  clock_hz is used only when converting
    cycle counts to seconds for reporting.
    """

    num_cores: int = 8
    l1_spm_bytes: int = 128 * 1024
    flops_per_core_per_cycle: float = 2.0
    dma_bytes_per_cycle: float = 8.0
    dma_startup_cycles: int = 64
    barrier_cycles: int = 32
    clock_hz: float = 50e6

    def __post_init__(self):
        if self.num_cores < 1:
            raise ValueError("num_cores must be at least 1")
        if self.l1_spm_bytes <= 0:
            raise ValueError("l1_spm_bytes must be positive")
        if not self.flops_per_core_per_cycle > 0:
            raise ValueError("flops_per_core_per_cycle must be positive")
        if not self.dma_bytes_per_cycle > 0:
            raise ValueError("dma_bytes_per_cycle must be positive")
        if self.dma_startup_cycles < 0 or self.barrier_cycles < 0:
            raise ValueError("cycle constants may not be negative")


@dataclass
class DeviceImage:
    """Accelerator kernel binary resident in L2 before the first offload."""

    size_bytes: int
    kernel_ids: list[str] = field(default_factory=lambda: ["dgemm"])

    def __post_init__(self):
        if self.size_bytes <= 0:
            raise ValueError("image size must be positive")
        if not self.kernel_ids:
            raise ValueError("device image must list at least one kernel")


class Direction(enum.Enum):
    IN = "in"
    OUT = "out"


@dataclass
class DmaTransfer:
    nbytes: int
    direction: Direction = Direction.IN


class PlanInfeasible(ValueError):
    """Tile plan does not fit the configured L1 scratchpad."""


def dma_cost(t: DmaTransfer, cfg: ClusterConfig) -> int:
    """Cycles for one DMA transfer: fixed startup plus streaming time."""
    if t.nbytes < 0:
        raise ValueError("transfer size may not be negative")
    return cfg.dma_startup_cycles + int(math.ceil(t.nbytes / cfg.dma_bytes_per_cycle))


def barrier_cost(cfg: ClusterConfig) -> int:
    """Cycles for one cluster-wide barrier, paid once per tile step."""
    return cfg.barrier_cycles


@dataclass
class ClusterCost:
    """Cycle and traffic accounting for one tiled GEMM execution."""

    fpu_cycles: int
    dma_stream_cycles: int
    num_transfers: int
    tile_steps: int
    bytes_in: int
    bytes_out: int
    dma_startup_total: int
    barrier_total: int
    total_cycles: int


def _ranges(dim: int, tile: int):
    return [(s, min(s + tile, dim)) for s in range(0, dim, tile)]


def execution_cost(plan, problem, cfg: ClusterConfig) -> ClusterCost:
    """Analytic cost of executing ``plan`` on ``problem``.

    Walks the same tile schedule as execute_tiles, so its byte counters
    are the exact ones the functional path reports.  Edge tiles are
    clamped to the matrix borders and counted at their actual size.
    """
    m, n, k = problem.m, problem.n, problem.k
    rate = cfg.dma_bytes_per_cycle
    read_c = problem.beta != 0.0

    stream = 0
    transfers = 0
    bytes_in = 0
    bytes_out = 0
    steps = 0
    for i0, i1 in _ranges(m, plan.tm):
        for j0, j1 in _ranges(n, plan.tn):
            c_bytes = (i1 - i0) * (j1 - j0) * 8
            if read_c:
                bytes_in += c_bytes
                stream += int(math.ceil(c_bytes / rate))
                transfers += 1
            for l0, l1 in _ranges(k, plan.tk):
                a_bytes = (i1 - i0) * (l1 - l0) * 8
                b_bytes = (l1 - l0) * (j1 - j0) * 8
                bytes_in += a_bytes + b_bytes
                stream += int(math.ceil(a_bytes / rate)) + int(math.ceil(b_bytes / rate))
                transfers += 2
                steps += 1
            bytes_out += c_bytes
            stream += int(math.ceil(c_bytes / rate))
            transfers += 1

    flops = 2 * m * n * k
    fpu = int(math.ceil(flops / (cfg.num_cores * cfg.flops_per_core_per_cycle)))
    startup_total = cfg.dma_startup_cycles * transfers
    barrier_total = cfg.barrier_cycles * steps
    total = max(fpu, stream) + startup_total + barrier_total
    return ClusterCost(
        fpu_cycles=fpu,
        dma_stream_cycles=stream,
        num_transfers=transfers,
        tile_steps=steps,
        bytes_in=bytes_in,
        bytes_out=bytes_out,
        dma_startup_total=startup_total,
        barrier_total=barrier_total,
        total_cycles=total,
    )


@dataclass
class TileExecution:
    result: np.ndarray
    compute_cycles: int
    dma_bytes_in: int
    dma_bytes_out: int


def execute_tiles(plan, problem, a, b, c_in, cfg: ClusterConfig) -> TileExecution:
    """Run C <- alpha*A*B + beta*C tile by tile on the cluster model.

    Operands are float64 arrays already resident in device-visible
    memory (the runtime stages or maps them).  Each C tile accumulates
    its k-tiles in ascending order; the schedule is fixed, so the result
    is deterministic and identical for every data-sharing path.
    """
    m, n, k = problem.m, problem.n, problem.k
    if plan.l1_footprint_bytes > cfg.l1_spm_bytes:
        raise PlanInfeasible(
            f"plan footprint {plan.l1_footprint_bytes} exceeds L1 of {cfg.l1_spm_bytes}"
        )
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != (m, k) or b.shape != (k, n):
        raise ValueError("operand shapes do not match the problem")
    read_c = problem.beta != 0.0
    if read_c:
        if c_in is None:
            raise ValueError("beta != 0 requires the C operand")
        c_in = np.asarray(c_in, dtype=np.float64)
        if c_in.shape != (m, n):
            raise ValueError("C shape does not match the problem")

    out = np.zeros((m, n), dtype=np.float64)
    for i0, i1 in _ranges(m, plan.tm):
        for j0, j1 in _ranges(n, plan.tn):
            acc = np.zeros((i1 - i0, j1 - j0), dtype=np.float64)
            for l0, l1 in _ranges(k, plan.tk):
                acc += a[i0:i1, l0:l1] @ b[l0:l1, j0:j1]
            if problem.alpha == 0.0:
                tile = np.zeros_like(acc)
            else:
                tile = problem.alpha * acc
            if read_c:
                tile = tile + problem.beta * c_in[i0:i1, j0:j1]
            out[i0:i1, j0:j1] = tile

    cost = execution_cost(plan, problem, cfg)
    return TileExecution(
        result=out,
        compute_cycles=cost.total_cycles,
        dma_bytes_in=cost.bytes_in,
        dma_bytes_out=cost.bytes_out,
    )
