#!/usr/bin/env python3
"""Calibrate the cost model and print the runtime-breakdown table.

Runs the size sweep over all three offload paths and reports the
headline ratios: copy-path speedup, data-copy fraction, zero-copy
speedup, and the per-byte data-movement advantage of page mapping.
"""

import argparse

from offsim import CalibrationTargets, OffloadPath, calibrate, emit, run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="32,64,128")
    ap.add_argument("--anchor", type=int, default=128)
    ap.add_argument("--seed", type=lambda v: int(v, 0), default=0x5EED)
    args = ap.parse_args()

    sizes = [int(s) for s in args.sizes.split(",")]
    targets = CalibrationTargets(anchor_size=args.anchor)
    params = calibrate(targets)
    print(f"calibrated: copy rate {params.host_copy_bytes_per_cycle:.6f} B/cycle, "
          f"fork/join {params.fork_join_cycles} cycles, "
          f"{params.iommu_map_cycles_per_page} cycles/page\n")

    rows = run_sweep(sizes, list(OffloadPath), params, seed=args.seed)
    print(emit(rows, "csv"))

    by = {(r.size, r.path): r for r in rows}
    copy = by[(args.anchor, OffloadPath.COPY)]
    zc = by[(args.anchor, OffloadPath.ZERO_COPY)]
    print(f"copy-path speedup at {args.anchor}:      {copy.speedup_vs_host:.3f}x")
    print(f"data-copy fraction at {args.anchor}:     "
          f"{copy.data_copy_cycles / copy.total_cycles:.3f}")
    print(f"zero-copy speedup at {args.anchor}:      {zc.speedup_vs_host:.3f}x")
    print(f"mapping advantage (per byte moved): "
          f"{copy.data_copy_cycles / zc.data_copy_cycles:.3f}x")


if __name__ == "__main__":
    main()
