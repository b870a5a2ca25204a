"""Host-side offload runtime: device boot, data movement, fork/join accounting.

An OffloadSession owns one platform instance (memory model, cluster,
device state) and runs GEMM offloads over one of three data paths:

* HOST_ONLY:  the reference kernel on the host, no device involved.
* COPY:       operands staged into device DRAM by bulk copies, results
              copied back.
* ZERO_COPY:  the device reads and writes host memory in place through
              page mappings; only the mapping cost is paid.

Every offload returns a TimeBreakdown whose three regions (data copy,
fork/join, compute) sum exactly to the total.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .cluster import ClusterConfig, DeviceImage, execute_tiles
from .gemm import GemmProblem, Matrix, gemm_reference, plan_tiles
from .memory import (
    DEFAULT_REGION_SIZES,
    MemoryModel,
    MemRegion,
    OutOfDeviceMemory,
    RegionKind,
    alloc,
    bulk_copy,
    free,
    map_pages,
)


class OffloadPath(enum.Enum):
    HOST_ONLY = "host"
    COPY = "copy"
    ZERO_COPY = "zerocopy"

    @classmethod
    def parse(cls, name: str) -> "OffloadPath":
        for p in cls:
            if p.value == name:
                return p
        raise ValueError(f"unknown offload path {name!r} "
                         f"(expected one of {[p.value for p in cls]})")


@dataclass
class CostModelParams:
    """Calibrated host-side cost constants.

    The copy throughput, fork/join charge and per-page mapping cost are
    calibration outputs; host_flops_per_cycle anchors the cycle scale
    and clock_hz only converts cycles to seconds for reporting.
    """

    host_copy_bytes_per_cycle: float
    fork_join_cycles: int
    iommu_map_cycles_per_page: int
    host_flops_per_cycle: float = 0.25
    page_size: int = 4096
    clock_hz: float = 50e6

    def __post_init__(self):
        for name in ("host_copy_bytes_per_cycle", "fork_join_cycles",
                     "iommu_map_cycles_per_page", "host_flops_per_cycle",
                     "page_size", "clock_hz"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.page_size & (self.page_size - 1):
            raise ValueError("page_size must be a power of two")


@dataclass
class TimeBreakdown:
    """Per-offload cycle counts split into the three runtime regions."""

    data_copy_cycles: int
    fork_join_cycles: int
    compute_cycles: int
    total_cycles: int
    fell_back: bool = False  # device memory exhausted, ran on the host

    @classmethod
    def make(cls, data_copy: int, fork_join: int, compute: int,
             fell_back: bool = False) -> "TimeBreakdown":
        return cls(data_copy, fork_join, compute,
                   data_copy + fork_join + compute, fell_back)


@dataclass
class DeviceState:
    booted: bool = False
    image: DeviceImage | None = None
    l2_image_allocation: object = None


class DeviceNotBooted(RuntimeError):
    pass


class DoubleBoot(RuntimeError):
    pass


def boot_device(image: DeviceImage, state: DeviceState, mem: MemoryModel) -> DeviceState:
    """Load the kernel image into L2 and mark the device live.

    Booting twice is an error; the image stays resident for the life of
    the session.
    """
    if state.booted:
        raise DoubleBoot("device is already booted")
    l2 = mem.region(RegionKind.L2_SPM)
    if image.size_bytes > l2.size:
        raise OutOfDeviceMemory(
            f"image of {image.size_bytes} bytes exceeds L2 of {l2.size}")
    state.l2_image_allocation = alloc(l2, image.size_bytes)
    state.image = image
    state.booted = True
    return state


def host_gemm_cycles(problem: GemmProblem, params: CostModelParams) -> int:
    """Host-only GEMM time: 2*m*n*k flops at the host throughput."""
    return int(math.ceil(2 * problem.m * problem.n * problem.k
                         / params.host_flops_per_cycle))


def breakdown_to_seconds(b: TimeBreakdown, params: CostModelParams) -> dict:
    hz = params.clock_hz
    return {
        "data_copy": b.data_copy_cycles / hz,
        "fork_join": b.fork_join_cycles / hz,
        "compute": b.compute_cycles / hz,
        "total": b.total_cycles / hz,
    }


class OffloadSession:
    """One host + device pairing with exclusive platform state.

    Sessions are independent and may be moved between threads, but a
    single session must not be shared concurrently.
    """

    def __init__(self, params: CostModelParams,
                 cluster: ClusterConfig | None = None,
                 region_sizes: dict | None = None):
        self.params = params
        self.cluster = cluster if cluster is not None else ClusterConfig()
        sizes = dict(DEFAULT_REGION_SIZES)
        sizes[RegionKind.L1_SPM] = self.cluster.l1_spm_bytes
        if region_sizes:
            sizes.update(region_sizes)
        self.mem = MemoryModel()
        for kind in (RegionKind.HOST_DRAM, RegionKind.DEV_DRAM,
                     RegionKind.L2_SPM, RegionKind.L1_SPM):
            self.mem.region_create(kind, sizes[kind])
        self.device = DeviceState()

    def boot(self, image: DeviceImage | None = None) -> DeviceState:
        return boot_device(image or DeviceImage(size_bytes=64 * 1024),
                           self.device, self.mem)

    # -- staging helpers -------------------------------------------------

    def _host(self) -> MemRegion:
        return self.mem.region(RegionKind.HOST_DRAM)

    def _stage_host(self, payload: bytes):
        region = self._host()
        a = alloc(region, len(payload))
        region.write(a.offset, payload)
        return a

    def _read_matrix(self, region: MemRegion, offset: int, rows: int, cols: int) -> Matrix:
        payload = region.read(offset, rows * cols * 8)
        return Matrix.from_packed(rows, cols, payload)

    # -- the offload entry point -----------------------------------------

    def offload_gemm(self, problem: GemmProblem, a: Matrix, b: Matrix,
                     c: Matrix | None = None, path: OffloadPath = OffloadPath.HOST_ONLY,
                     plan=None):
        """Run one GEMM over the chosen path.

        Returns (result matrix, TimeBreakdown).  When device DRAM cannot
        hold the staged operands the offload falls back to the host and
        the breakdown carries fell_back=True.
        """
        problem.check_shapes(a, b, c)
        if problem.beta != 0.0 and c is None:
            raise ValueError("beta != 0 requires the C operand")
        if path is OffloadPath.HOST_ONLY:
            return self._run_host(problem, a, b, c, fell_back=False)
        if not self.device.booted:
            raise DeviceNotBooted("boot the device before offloading")
        if "dgemm" not in self.device.image.kernel_ids:
            raise RuntimeError("device image lacks the dgemm kernel")
        if plan is None:
            plan = plan_tiles(problem, self.cluster)
        if path is OffloadPath.COPY:
            return self._run_copy(problem, a, b, c, plan)
        if path is OffloadPath.ZERO_COPY:
            return self._run_zero_copy(problem, a, b, c, plan)
        raise ValueError(f"unsupported path {path}")

    def _run_host(self, problem, a, b, c, fell_back: bool):
        result = gemm_reference(problem, a, b, c)
        compute = host_gemm_cycles(problem, self.params)
        return result, TimeBreakdown.make(0, 0, compute, fell_back=fell_back)

    def _operand_bytes(self, problem, a, b, c):
        a_pack = a.pack()
        b_pack = b.pack()
        if problem.beta != 0.0:
            c_pack = c.pack()
        else:
            c_pack = bytes(problem.m * problem.n * 8)
        return a_pack, b_pack, c_pack

    def _run_copy(self, problem, a, b, c, plan):
        host = self._host()
        dev = self.mem.region(RegionKind.DEV_DRAM)
        a_pack, b_pack, c_pack = self._operand_bytes(problem, a, b, c)
        host_allocs = [self._stage_host(p) for p in (a_pack, b_pack, c_pack)]
        dev_allocs = []
        try:
            for payload in (a_pack, b_pack, c_pack):
                dev_allocs.append(alloc(dev, len(payload)))
        except OutOfDeviceMemory:
            for da in dev_allocs:
                free(dev, da)
            for ha in host_allocs:
                free(host, ha)
            return self._run_host(problem, a, b, c, fell_back=True)

        ha, hb, hc = host_allocs
        da, db, dc = dev_allocs
        copy_cycles = 0
        copy_cycles += bulk_copy(host, ha.offset, dev, da.offset, ha.size, self.params)
        copy_cycles += bulk_copy(host, hb.offset, dev, db.offset, hb.size, self.params)
        if problem.beta != 0.0:
            copy_cycles += bulk_copy(host, hc.offset, dev, dc.offset, hc.size, self.params)

        am = self._read_matrix(dev, da.offset, problem.m, problem.k).as_array()
        bm = self._read_matrix(dev, db.offset, problem.k, problem.n).as_array()
        cm = (self._read_matrix(dev, dc.offset, problem.m, problem.n).as_array()
              if problem.beta != 0.0 else None)
        run = execute_tiles(plan, problem, am, bm, cm, self.cluster)
        dev.write(dc.offset, run.result.tobytes(order="F"))

        copy_cycles += bulk_copy(dev, dc.offset, host, hc.offset, hc.size, self.params)
        result = self._read_matrix(host, hc.offset, problem.m, problem.n)

        for da_ in dev_allocs:
            free(dev, da_)
        for ha_ in host_allocs:
            free(host, ha_)
        breakdown = TimeBreakdown.make(copy_cycles, self.params.fork_join_cycles,
                                       run.compute_cycles)
        return result, breakdown

    def _run_zero_copy(self, problem, a, b, c, plan):
        host = self._host()
        a_pack, b_pack, c_pack = self._operand_bytes(problem, a, b, c)
        host_allocs = [self._stage_host(p) for p in (a_pack, b_pack, c_pack)]
        ha, hb, hc = host_allocs

        maps = [map_pages(host, h.offset, h.size, self.params) for h in host_allocs]
        map_cycles = sum(m.cost_cycles for m in maps)
        ma, mb, mc = maps

        am = Matrix.from_packed(problem.m, problem.k, ma.read(0, ma.nbytes)).as_array()
        bm = Matrix.from_packed(problem.k, problem.n, mb.read(0, mb.nbytes)).as_array()
        cm = (Matrix.from_packed(problem.m, problem.n, mc.read(0, mc.nbytes)).as_array()
              if problem.beta != 0.0 else None)
        run = execute_tiles(plan, problem, am, bm, cm, self.cluster)
        # the device writes C straight through the mapping, no copy back
        mc.write(0, run.result.tobytes(order="F"))

        result = self._read_matrix(host, hc.offset, problem.m, problem.n)
        for ha_ in host_allocs:
            free(host, ha_)
        breakdown = TimeBreakdown.make(map_cycles, self.params.fork_join_cycles,
                                       run.compute_cycles)
        return result, breakdown
