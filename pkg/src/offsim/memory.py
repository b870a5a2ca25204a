"""Byte-addressed model of the platform memory hierarchy.

Four region kinds exist: host DRAM and device DRAM (two disjoint
partitions of one external DRAM range), a dual-port L2 scratchpad that
holds device code and constants, and the cluster-local L1 scratchpad.
Device-visible regions are carved up by a first-fit allocator with a
coalescing free list.  Shared data reaches the accelerator either by
bulk copy into device DRAM or by page mappings that expose host memory
in place, each with its own cycle cost.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

KIB = 1024
MIB = 1024 * 1024

DEFAULT_ALIGNMENT = 64


class RegionKind(enum.Enum):
    HOST_DRAM = "host_dram"
    DEV_DRAM = "dev_dram"
    L2_SPM = "l2_spm"
    L1_SPM = "l1_spm"


#: Region sizes used when the caller does not configure them.
DEFAULT_REGION_SIZES = {
    RegionKind.HOST_DRAM: 256 * MIB,
    RegionKind.DEV_DRAM: 64 * MIB,
    RegionKind.L2_SPM: 1 * MIB,
    RegionKind.L1_SPM: 128 * KIB,
}


class ConfigurationError(ValueError):
    """Invalid platform configuration (duplicate region, bad size, ...)."""


class OutOfDeviceMemory(RuntimeError):
    """No free gap large enough; callers fall back to host execution."""


class AllocationError(ValueError):
    """Bad allocator usage: double free or free of an unknown handle."""


@dataclass
class Allocation:
    """A live placement inside one region."""

    region_kind: RegionKind
    offset: int
    size: int
    alignment: int


@dataclass
class MemRegion:
    """One addressable region with a functional byte store.

    ``base`` positions the region in a single abstract address space so
    that regions never overlap; all reads and writes are region-relative.
    """

    kind: RegionKind
    base: int
    size: int
    backing: np.ndarray
    # allocator state: live allocations by offset, free gaps sorted by offset
    _live: dict[int, Allocation] = field(default_factory=dict, repr=False)
    _free: list[list[int]] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if not self._free:
            self._free = [[0, self.size]]

    def _check_range(self, offset: int, nbytes: int):
        if offset < 0 or nbytes < 0 or offset + nbytes > self.size:
            raise ValueError(
                f"range [{offset}, {offset + nbytes}) out of bounds for "
                f"{self.kind.value} of {self.size} bytes"
            )

    def read(self, offset: int, nbytes: int) -> bytes:
        self._check_range(offset, nbytes)
        return bytes(self.backing[offset : offset + nbytes])

    def write(self, offset: int, data) -> None:
        buf = np.frombuffer(bytes(data), dtype=np.uint8)
        self._check_range(offset, len(buf))
        self.backing[offset : offset + len(buf)] = buf

    @property
    def live_allocations(self) -> list[Allocation]:
        return [self._live[o] for o in sorted(self._live)]


@dataclass
class PageMapping:
    """IO page-table entries granting the device in-place access to host memory."""

    region: MemRegion
    offset: int
    nbytes: int
    page_size: int
    page_count: int
    cost_cycles: int

    def read(self, rel_offset: int, nbytes: int) -> bytes:
        if rel_offset < 0 or rel_offset + nbytes > self.nbytes:
            raise ValueError("read outside mapped range")
        return self.region.read(self.offset + rel_offset, nbytes)

    def write(self, rel_offset: int, data) -> None:
        data = bytes(data)
        if rel_offset < 0 or rel_offset + len(data) > self.nbytes:
            raise ValueError("write outside mapped range")
        self.region.write(self.offset + rel_offset, data)


class MemoryModel:
    """Owns the regions of one simulated platform instance.

    Regions are placed back to back in the abstract address space in
    creation order, so creating HOST_DRAM first and DEV_DRAM second
    yields the two adjacent DRAM partitions.  Single-threaded mutation
    per instance; instances are independent.
    """

    def __init__(self):
        self.regions: dict[RegionKind, MemRegion] = {}
        self._next_base = 0

    def region_create(self, kind: RegionKind, size: int) -> MemRegion:
        if kind in self.regions:
            raise ConfigurationError(f"region {kind.value} already exists")
        if size <= 0:
            raise ConfigurationError(f"region size must be positive, got {size}")
        region = MemRegion(
            kind=kind,
            base=self._next_base,
            size=size,
            backing=np.zeros(size, dtype=np.uint8),
        )
        self._next_base += size
        self.regions[kind] = region
        return region

    def region(self, kind: RegionKind) -> MemRegion:
        return self.regions[kind]


def alloc(region: MemRegion, size: int, align: int = DEFAULT_ALIGNMENT) -> Allocation:
    """First-fit allocation at the lowest aligned offset that fits.

    Raises OutOfDeviceMemory when no gap can hold the request; the
    offload runtime treats that as a cue to run on the host instead.
    """
    if size <= 0:
        raise ValueError(f"allocation size must be positive, got {size}")
    if align < 1 or (align & (align - 1)) != 0:
        raise ValueError(f"alignment must be a power of two, got {align}")
    for gap in region._free:
        start, length = gap
        candidate = -(-start // align) * align
        if candidate + size <= start + length:
            _carve(region, gap, candidate, size)
            a = Allocation(region.kind, candidate, size, align)
            region._live[candidate] = a
            return a
    raise OutOfDeviceMemory(
        f"no gap of {size} bytes (align {align}) in {region.kind.value}"
    )


def _carve(region: MemRegion, gap: list[int], offset: int, size: int):
    start, length = gap
    end = start + length
    idx = region._free.index(gap)
    region._free.pop(idx)
    pieces = []
    if offset > start:
        pieces.append([start, offset - start])
    if offset + size < end:
        pieces.append([offset + size, end - (offset + size)])
    region._free[idx:idx] = pieces


def free(region: MemRegion, a: Allocation) -> None:
    """Return an allocation's bytes to the free list, coalescing neighbours."""
    live = region._live.get(a.offset)
    if live is not a:
        raise AllocationError(
            f"free of unknown or already-freed allocation at offset {a.offset}"
        )
    del region._live[a.offset]
    _insert_gap(region, a.offset, a.size)


def _insert_gap(region: MemRegion, offset: int, size: int):
    gaps = region._free
    i = 0
    while i < len(gaps) and gaps[i][0] < offset:
        i += 1
    gaps.insert(i, [offset, size])
    # coalesce with successor, then predecessor
    if i + 1 < len(gaps) and gaps[i][0] + gaps[i][1] == gaps[i + 1][0]:
        gaps[i][1] += gaps[i + 1][1]
        gaps.pop(i + 1)
    if i > 0 and gaps[i - 1][0] + gaps[i - 1][1] == gaps[i][0]:
        gaps[i - 1][1] += gaps[i][1]
        gaps.pop(i)


def bulk_copy(
    src: MemRegion,
    src_offset: int,
    dst: MemRegion,
    dst_offset: int,
    nbytes: int,
    params,
) -> int:
    """Copy bytes between regions and return the host cycles spent.

    Cost is ceil(nbytes / host_copy_bytes_per_cycle).  Overlapping
    ranges are rejected: offload staging buffers never alias.
    """
    if nbytes == 0:
        return 0
    src._check_range(src_offset, nbytes)
    dst._check_range(dst_offset, nbytes)
    if src is dst:
        lo, hi = min(src_offset, dst_offset), max(src_offset, dst_offset)
        if lo + nbytes > hi:
            raise ValueError("bulk_copy ranges may not overlap")
    dst.backing[dst_offset : dst_offset + nbytes] = src.backing[
        src_offset : src_offset + nbytes
    ]
    return int(math.ceil(nbytes / params.host_copy_bytes_per_cycle))


def map_pages(region: MemRegion, offset: int, nbytes: int, params) -> PageMapping:
    """Create IO page-table entries over a host range.

    The device then reads and writes those bytes in place; nothing is
    staged into device DRAM.  Cost is one fixed charge per page.
    """
    if region.kind is not RegionKind.HOST_DRAM:
        raise ValueError(f"page mappings require HOST_DRAM, got {region.kind.value}")
    if nbytes <= 0:
        raise ValueError("cannot map an empty range")
    region._check_range(offset, nbytes)
    page_count = -(-nbytes // params.page_size)
    cost = int(math.ceil(page_count * params.iommu_map_cycles_per_page))
    return PageMapping(
        region=region,
        offset=offset,
        nbytes=nbytes,
        page_size=params.page_size,
        page_count=page_count,
        cost_cycles=cost,
    )
