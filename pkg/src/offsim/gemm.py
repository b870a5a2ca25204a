"""GEMM surface: operand types, reference kernel, and the tile planner.

Matrices follow the BLAS convention: column-major storage with a
leading dimension at least the row count.  The reference kernel is a
plain dot-product loop and serves as the numerical oracle for every
offloaded path; the planner picks scratchpad-feasible tile shapes by
arithmetic intensity.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

#: Candidate tile edge lengths searched by the planner.
TILE_CANDIDATES = (8, 16, 32, 64, 128)

_HEADER = struct.Struct("<QQ")


class NoFeasiblePlan(ValueError):
    """The L1 scratchpad cannot hold even the smallest candidate tiling."""


@dataclass
class Matrix:
    """Column-major float64 matrix with explicit leading dimension."""

    rows: int
    cols: int
    leading_dimension: int
    data: np.ndarray  # flat, length leading_dimension * cols

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("matrix dimensions must be positive")
        if self.leading_dimension < self.rows:
            raise ValueError("leading dimension must be at least the row count")
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)
        if self.data.size != self.leading_dimension * self.cols:
            raise ValueError("element count must equal leading_dimension * cols")

    @classmethod
    def zeros(cls, rows: int, cols: int, leading_dimension: int | None = None) -> "Matrix":
        ld = leading_dimension if leading_dimension is not None else rows
        return cls(rows, cols, ld, np.zeros(ld * cols, dtype=np.float64))

    @classmethod
    def from_array(cls, arr, leading_dimension: int | None = None) -> "Matrix":
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("expected a 2-D array")
        rows, cols = arr.shape
        ld = leading_dimension if leading_dimension is not None else rows
        m = cls.zeros(rows, cols, ld)
        m.as_array()[:, :] = arr
        return m

    def as_array(self) -> np.ndarray:
        """Logical rows x cols view (shared storage, padding excluded)."""
        full = self.data.reshape(self.cols, self.leading_dimension).T
        return full[: self.rows, :]

    def pack(self) -> bytes:
        """Contiguous column-major bytes of the logical matrix, padding stripped."""
        return self.as_array().tobytes(order="F")

    @classmethod
    def from_packed(cls, rows: int, cols: int, payload: bytes) -> "Matrix":
        values = np.frombuffer(payload, dtype="<f8")
        if values.size != rows * cols:
            raise ValueError("payload length does not match the dimensions")
        return cls(rows, cols, rows, values.copy())

    def to_bytes(self) -> bytes:
        """Serialize to the on-disk format: LE u64 rows, u64 cols, column-major f64."""
        return _HEADER.pack(self.rows, self.cols) + self.pack()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "Matrix":
        if len(blob) < _HEADER.size:
            raise ValueError("truncated matrix blob")
        rows, cols = _HEADER.unpack_from(blob)
        return cls.from_packed(rows, cols, blob[_HEADER.size :])

    def to_file(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def from_file(cls, path) -> "Matrix":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


@dataclass
class GemmProblem:
    """C <- alpha * A @ B + beta * C with A (m x k), B (k x n), C (m x n)."""

    m: int
    n: int
    k: int
    alpha: float = 1.0
    beta: float = 0.0

    def __post_init__(self):
        if min(self.m, self.n, self.k) < 1:
            raise ValueError("problem dimensions must be at least 1")

    def check_shapes(self, a: Matrix, b: Matrix, c: Matrix | None):
        if (a.rows, a.cols) != (self.m, self.k):
            raise ValueError(f"A must be {self.m}x{self.k}, got {a.rows}x{a.cols}")
        if (b.rows, b.cols) != (self.k, self.n):
            raise ValueError(f"B must be {self.k}x{self.n}, got {b.rows}x{b.cols}")
        if c is not None and (c.rows, c.cols) != (self.m, self.n):
            raise ValueError(f"C must be {self.m}x{self.n}, got {c.rows}x{c.cols}")


@dataclass
class TilePlan:
    """Scratchpad tiling of a GEMM with analytic DMA traffic counters.

    bytes_in / bytes_out count edge tiles at their clamped size and are
    exactly what the cluster reports; bytes_in_bound counts every tile
    at full size and upper-bounds the exact figure.
    """

    tm: int
    tn: int
    tk: int
    double_buffered: bool
    l1_footprint_bytes: int
    tile_steps: int
    bytes_in: int
    bytes_out: int
    bytes_in_bound: int


def tile_footprint_bytes(tm: int, tn: int, tk: int, double_buffered: bool = True) -> int:
    """Resident SPM bytes: A and B tiles (shadowed when double buffering) plus the C tile."""
    factor = 2 if double_buffered else 1
    return factor * (tm * tk + tk * tn) * 8 + tm * tn * 8


def _buffered_working_set(tm: int, tn: int, tk: int) -> int:
    # Double buffering shadows every SPM buffer, C included, so the C
    # write-back DMA also overlaps compute.
    return 2 * (tm * tk + tk * tn + tm * tn) * 8


def make_plan(problem: GemmProblem, tm: int, tn: int, tk: int,
              double_buffered: bool = True) -> TilePlan:
    ni = -(-problem.m // tm)
    nj = -(-problem.n // tn)
    nl = -(-problem.k // tk)
    steps = ni * nj * nl
    c_in = 8 * problem.m * problem.n if problem.beta != 0.0 else 0
    exact_in = 8 * (nj * problem.m * problem.k + ni * problem.k * problem.n) + c_in
    bound_in = steps * (tm * tk + tk * tn) * 8 + c_in
    return TilePlan(
        tm=tm,
        tn=tn,
        tk=tk,
        double_buffered=double_buffered,
        l1_footprint_bytes=tile_footprint_bytes(tm, tn, tk, double_buffered),
        tile_steps=steps,
        bytes_in=exact_in,
        bytes_out=8 * problem.m * problem.n,
        bytes_in_bound=bound_in,
    )


def plan_tiles(problem: GemmProblem, cfg) -> TilePlan:
    """Pick the double-buffered candidate tiling with the best arithmetic intensity.

    Feasibility requires the fully shadowed working set (two copies of
    the A, B and C tiles) to fit in L1.  Intensity is flops per byte of
    per-step A/B refill traffic; ties fall to the larger C tile, then
    the deeper k tile.
    """
    best = None
    best_key = None
    for tm in TILE_CANDIDATES:
        for tn in TILE_CANDIDATES:
            for tk in TILE_CANDIDATES:
                if _buffered_working_set(tm, tn, tk) > cfg.l1_spm_bytes:
                    continue
                intensity = Fraction(2 * tm * tn * tk, (tm * tk + tk * tn) * 8)
                key = (intensity, tm * tn, tk)
                if best_key is None or key > best_key:
                    best_key = key
                    best = (tm, tn, tk)
    if best is None:
        raise NoFeasiblePlan(
            f"no candidate tiling fits an L1 of {cfg.l1_spm_bytes} bytes"
        )
    return make_plan(problem, *best)


def gemm_reference(problem: GemmProblem, a: Matrix, b: Matrix,
                   c: Matrix | None = None) -> Matrix:
    """Naive reference GEMM, the oracle for every offloaded kernel.

    Each output element is one dot product over k, computed row by row
    and column by column in a fixed order.  beta == 0 never reads C,
    alpha == 0 never reads A or B (BLAS convention).
    """
    problem.check_shapes(a, b, c)
    if problem.beta != 0.0 and c is None:
        raise ValueError("beta != 0 requires the C operand")
    am = a.as_array()
    bm = b.as_array()
    out = np.zeros((problem.m, problem.n), dtype=np.float64)
    if problem.alpha != 0.0:
        for i in range(problem.m):
            row = am[i, :]
            for j in range(problem.n):
                out[i, j] = problem.alpha * np.dot(row, bm[:, j])
    if problem.beta != 0.0:
        out += problem.beta * c.as_array()
    return Matrix.from_array(out)


def gemm_offloaded(problem: GemmProblem, a: Matrix, b: Matrix, c: Matrix | None,
                   path, session):
    """Run the heterogeneous kernel through an offload session.

    Plans the tiling for the session's cluster, then delegates; returns
    the result matrix and the cycle breakdown.
    """
    plan = plan_tiles(problem, session.cluster)
    return session.offload_gemm(problem, a, b, c, path, plan=plan)


def max_relative_error(result: Matrix, reference: Matrix, floor: float = 0.0) -> float:
    """Largest per-element relative deviation between two matrices.

    Each difference is normalized by max(|x|, |y|, floor).  Callers
    comparing reassociated GEMM kernels pass the accumulation scale
    (dot_scale below) as the floor: without it, elements produced by
    cancelling sums make the plain ratio unbounded no matter how
    accurate the kernel is.
    """
    x = result.as_array()
    y = reference.as_array()
    denom = np.maximum(np.maximum(np.abs(x), np.abs(y)), floor)
    denom = np.maximum(denom, np.finfo(np.float64).tiny)
    err = np.abs(x - y) / denom
    err[(x == y)] = 0.0
    return float(err.max())


def dot_scale(problem: GemmProblem, a: Matrix, b: Matrix,
              c: Matrix | None = None) -> float:
    """Per-element accumulation scale of C <- alpha*A*B + beta*C.

    Bounds the magnitude the k-term dot products sum over, which is the
    right normalizer for forward error of a reassociated kernel.
    """
    scale = abs(problem.alpha) * problem.k * (
        float(np.abs(a.as_array()).max()) * float(np.abs(b.as_array()).max()))
    if problem.beta != 0.0 and c is not None:
        scale += abs(problem.beta) * float(np.abs(c.as_array()).max())
    return scale
