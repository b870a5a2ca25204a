"""End-to-end checks of the simulator's headline numbers and invariants.

Each test covers one acceptance criterion and prints a single
PASS/FAIL line (visible with pytest -s or in captured output).
"""

import time

import numpy as np
import pytest

from offsim import (
    ClusterConfig,
    GemmProblem,
    Matrix,
    NoFeasiblePlan,
    OffloadPath,
    OffloadSession,
    OutOfDeviceMemory,
    RegionKind,
    MemoryModel,
    alloc,
    calibrate,
    dot_scale,
    execute_tiles,
    free,
    gemm_reference,
    max_relative_error,
    plan_tiles,
    run_sweep,
)
from conftest import IntervalOracle


def report(criterion, ok, detail):
    print(f"criterion {criterion} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def sweep():
    start = time.perf_counter()
    params = calibrate()
    rows = run_sweep([32, 64, 128], list(OffloadPath), params)
    elapsed = time.perf_counter() - start
    return params, rows, elapsed


def row(rows, size, path):
    return next(r for r in rows if r.size == size and r.path is path)


def test_criterion_1_copy_speedup(sweep):
    params, rows, elapsed = sweep
    speedup = row(rows, 128, OffloadPath.COPY).speedup_vs_host
    ok = abs(speedup - 2.71) <= 0.05 and elapsed < 5.0
    report(1, ok, f"copy speedup at 128 = {speedup:.4f} (target 2.71 +/- 0.05), "
                  f"sweep took {elapsed:.2f}s (< 5s)")


def test_criterion_2_copy_fraction(sweep):
    _, rows, _ = sweep
    r = row(rows, 128, OffloadPath.COPY)
    fraction = r.data_copy_cycles / r.total_cycles
    ok = abs(fraction - 0.47) <= 0.02
    report(2, ok, f"data-copy fraction at 128 = {fraction:.4f} (target 0.47 +/- 0.02)")


def test_criterion_3_zero_copy_speedup(sweep):
    _, rows, _ = sweep
    speedup = row(rows, 128, OffloadPath.ZERO_COPY).speedup_vs_host
    ok = 4.4 <= speedup <= 4.8
    report(3, ok, f"zero-copy speedup at 128 = {speedup:.4f} (band 4.4 to 4.8)")


def test_criterion_4_mapping_advantage(sweep):
    _, rows, _ = sweep
    copied = row(rows, 128, OffloadPath.COPY).data_copy_cycles
    mapped = row(rows, 128, OffloadPath.ZERO_COPY).data_copy_cycles
    # both paths move the same 393,216 shared bytes, so the per-byte
    # cost ratio is the cycle ratio
    ratio = copied / mapped
    ok = abs(ratio / 7.5 - 1) <= 0.03
    report(4, ok, f"per-byte movement cost ratio copy/zerocopy = {ratio:.4f} "
                  f"(target 7.5 +/- 3%)")


def test_criterion_5_numerical_oracle_suite():
    params = calibrate()
    session = OffloadSession(params)
    session.boot()
    rng = np.random.default_rng(0x5EED)
    worst = 0.0
    for _ in range(200):
        m, n, k = (int(d) for d in rng.integers(1, 161, size=3))
        alpha = float(rng.choice([1.0, 1.0, -0.5, 2.0]))
        beta = float(rng.choice([0.0, 0.0, 1.0, -1.0]))
        problem = GemmProblem(m=m, n=n, k=k, alpha=alpha, beta=beta)
        a = Matrix.from_array(rng.uniform(-1, 1, (m, k)))
        b = Matrix.from_array(rng.uniform(-1, 1, (k, n)))
        c = Matrix.from_array(rng.uniform(-1, 1, (m, n))) if beta != 0.0 else None
        reference = gemm_reference(problem, a, b, c)
        scale = dot_scale(problem, a, b, c)
        outputs = {}
        for path in OffloadPath:
            result, _ = session.offload_gemm(problem, a, b, c, path)
            worst = max(worst, max_relative_error(result, reference, floor=scale))
            outputs[path] = result.as_array().tobytes()
        assert outputs[OffloadPath.COPY] == outputs[OffloadPath.ZERO_COPY]
    ok = worst <= 1e-12
    report(5, ok, f"200 random problems, all paths: worst relative error "
                  f"{worst:.3e} (<= 1e-12); copy == zerocopy bitwise")


def test_criterion_6_allocator_trace():
    steps = 10000
    size = 256 * 1024
    region = MemoryModel().region_create(RegionKind.DEV_DRAM, size)
    oracle = IntervalOracle(size)
    rng = np.random.default_rng(0xA110C)
    handles = {}
    failures = 0
    for step in range(steps):
        if handles and rng.random() < 0.45:
            offset = int(rng.choice(sorted(handles)))
            free(region, handles.pop(offset))
            oracle.free(offset)
        else:
            req = int(rng.integers(1, 8192))
            align = int(rng.choice([1, 8, 64, 256, 4096]))
            try:
                a = alloc(region, req, align)
                got = a.offset
                handles[a.offset] = a
            except OutOfDeviceMemory:
                got = None
                failures += 1
            expected = oracle.alloc(req, align)
            assert got == expected, f"step {step}: {got} != {expected}"
        occupancy = [(a.offset, a.size) for a in region.live_allocations]
        assert occupancy == oracle.occupancy(), f"step {step}"
    report(6, True, f"{steps}-step trace matches the interval oracle exactly "
                    f"({len(handles)} live at end, {failures} rejected allocs)")


def test_criterion_7_accounting_invariants(sweep):
    _, rows, _ = sweep
    sums_ok = all(r.total_cycles == r.data_copy_cycles + r.fork_join_cycles
                  + r.compute_cycles for r in rows)

    cfg = ClusterConfig()
    traffic_ok = True
    rng = np.random.default_rng(7)
    for size in (128, 100):
        problem = GemmProblem(m=size, n=size, k=size)
        plan = plan_tiles(problem, cfg)
        run = execute_tiles(plan, problem, rng.uniform(-1, 1, (size, size)),
                            rng.uniform(-1, 1, (size, size)), None, cfg)
        traffic_ok &= (run.dma_bytes_in == plan.bytes_in
                       and run.dma_bytes_out == plan.bytes_out)

    small = row(rows, 64, OffloadPath.COPY)
    large = row(rows, 128, OffloadPath.COPY)
    compute_ratio = large.compute_cycles / small.compute_cycles
    copy_ratio = large.data_copy_cycles / small.data_copy_cycles
    scaling_ok = abs(compute_ratio / 8 - 1) <= 0.05 and abs(copy_ratio / 4 - 1) <= 0.05

    ok = sums_ok and traffic_ok and scaling_ok
    report(7, ok, f"regions sum exactly ({sums_ok}); measured DMA bytes match plan "
                  f"counters at 128 and 100 ({traffic_ok}); 64->128 compute x"
                  f"{compute_ratio:.3f} vs 8, copy x{copy_ratio:.3f} vs 4")


def test_criterion_8_planner_bound():
    problem = GemmProblem(m=96, n=96, k=96)
    default_plan = plan_tiles(problem, ClusterConfig())
    default_ok = ((default_plan.tm, default_plan.tn, default_plan.tk) == (64, 64, 32)
                  and default_plan.l1_footprint_bytes == 98304)

    rng = np.random.default_rng(0x11)
    bound_ok = True
    feasible = infeasible = 0
    for _ in range(300):
        l1 = int(rng.integers(2 * 1024, 1024 * 1024 + 1))
        try:
            plan = plan_tiles(problem, ClusterConfig(l1_spm_bytes=l1))
            feasible += 1
            bound_ok &= plan.l1_footprint_bytes <= l1
        except NoFeasiblePlan:
            infeasible += 1

    ok = default_ok and bound_ok and feasible > 0
    report(8, ok, f"default plan (64,64,32) footprint 98304 ({default_ok}); "
                  f"footprint <= L1 over {feasible} feasible / {infeasible} "
                  f"infeasible random L1 sizes ({bound_ok})")
