"""Cycle-approximate simulator of float64 GEMM offload on a heterogeneous SoC.

A host core hands matrix multiplications to an eight-core accelerator
cluster with a software-managed scratchpad, either by copying operands
into device DRAM or by mapping host pages for zero-copy access.  The
runtime reports a three-region cycle breakdown (data copy, fork/join,
compute) calibrated against target speedup and copy-fraction ratios.
"""

from .bench import (
    CSV_HEADER,
    DEFAULT_SEED,
    CalibrationTargets,
    InfeasibleTargets,
    SweepRow,
    benchmark_matrices,
    calibrate,
    emit,
    load_params,
    load_targets,
    params_to_dict,
    run_sweep,
)
from .cluster import (
    ClusterConfig,
    ClusterCost,
    DeviceImage,
    Direction,
    DmaTransfer,
    PlanInfeasible,
    TileExecution,
    barrier_cost,
    dma_cost,
    execute_tiles,
    execution_cost,
)
from .gemm import (
    GemmProblem,
    Matrix,
    NoFeasiblePlan,
    TilePlan,
    dot_scale,
    gemm_offloaded,
    gemm_reference,
    make_plan,
    max_relative_error,
    plan_tiles,
    tile_footprint_bytes,
)
from .memory import (
    DEFAULT_ALIGNMENT,
    DEFAULT_REGION_SIZES,
    Allocation,
    AllocationError,
    ConfigurationError,
    MemoryModel,
    MemRegion,
    OutOfDeviceMemory,
    PageMapping,
    RegionKind,
    alloc,
    bulk_copy,
    free,
    map_pages,
)
from .runtime import (
    CostModelParams,
    DeviceNotBooted,
    DeviceState,
    DoubleBoot,
    OffloadPath,
    OffloadSession,
    TimeBreakdown,
    boot_device,
    breakdown_to_seconds,
    host_gemm_cycles,
)

__version__ = "0.1.0"
