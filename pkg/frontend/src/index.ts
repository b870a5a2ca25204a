/* TypeScript client for the offsim command line tool.
 *
 * A Session drives float64 matrix multiplies through the simulator's
 * `matmul` subcommand and keeps the timing breakdown of the most recent
 * call.  Matrices cross the process boundary in the simulator's binary
 * file format (u64 rows, u64 cols, then column-major float64, all
 * little endian); this module converts to and from row-major
 * number[][] at that boundary, so results are bit-identical to what
 * the simulator computed.
 */

import { spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

export const OFFLOAD_PATHS = ["host", "copy", "zerocopy"] as const;
export type OffloadPath = (typeof OFFLOAD_PATHS)[number];

/** One runtime region of a breakdown, in device cycles and wall seconds. */
export interface PhaseTime {
  cycles: number;
  seconds: number;
}

/** Timing split of the last offload, mirroring the simulator's report. */
export interface Breakdown {
  data_copy: PhaseTime;
  fork_join: PhaseTime;
  compute: PhaseTime;
  total: PhaseTime;
  fell_back: boolean;
}

const HEADER_BYTES = 16;

export function parsePath(value: string): OffloadPath {
  if ((OFFLOAD_PATHS as readonly string[]).includes(value)) {
    return value as OffloadPath;
  }
  throw new Error(
    `unknown offload path '${value}' (expected one of ${OFFLOAD_PATHS.join(", ")})`,
  );
}

/** Serialize a row-major matrix into the simulator's file format. */
export function encodeMatrix(values: ReadonlyArray<ReadonlyArray<number>>): Buffer {
  const rows = values.length;
  if (rows === 0) throw new Error("matrix needs at least one row");
  const cols = values[0].length;
  if (cols === 0) throw new Error("matrix needs at least one column");
  for (const row of values) {
    if (row.length !== cols) {
      throw new Error(`ragged matrix: row of length ${row.length}, expected ${cols}`);
    }
  }
  const buf = Buffer.alloc(HEADER_BYTES + 8 * rows * cols);
  buf.writeBigUInt64LE(BigInt(rows), 0);
  buf.writeBigUInt64LE(BigInt(cols), 8);
  let off = HEADER_BYTES;
  for (let j = 0; j < cols; j++) {
    for (let i = 0; i < rows; i++) {
      buf.writeDoubleLE(values[i][j], off);
      off += 8;
    }
  }
  return buf;
}

/** Parse a matrix file back into a row-major array of rows. */
export function decodeMatrix(buf: Buffer): number[][] {
  if (buf.length < HEADER_BYTES) {
    throw new Error(`matrix file too short: ${buf.length} bytes`);
  }
  const rows = Number(buf.readBigUInt64LE(0));
  const cols = Number(buf.readBigUInt64LE(8));
  const expected = HEADER_BYTES + 8 * rows * cols;
  if (rows < 1 || cols < 1 || buf.length !== expected) {
    throw new Error(
      `matrix file is ${buf.length} bytes, expected ${expected} for ${rows}x${cols}`,
    );
  }
  const out: number[][] = Array.from({ length: rows }, () => new Array<number>(cols));
  let off = HEADER_BYTES;
  for (let j = 0; j < cols; j++) {
    for (let i = 0; i < rows; i++) {
      out[i][j] = buf.readDoubleLE(off);
      off += 8;
    }
  }
  return out;
}

function cliCommand(): string[] {
  const env = process.env.OFFSIM_BIN;
  if (env && env.trim()) return env.trim().split(/\s+/);
  return ["python3", "-m", "offsim.cli"];
}

/** Run one simulator subcommand, throwing on a nonzero exit. */
export function runCli(args: string[]): { stdout: string; stderr: string } {
  const [head, ...rest] = cliCommand();
  const proc = spawnSync(head, [...rest, ...args], {
    encoding: "utf8",
    maxBuffer: 1 << 26,
  });
  if (proc.error) throw proc.error;
  if (proc.status !== 0) {
    const detail = (proc.stderr || proc.stdout || "").trim();
    throw new Error(`offsim ${args[0]} exited with ${proc.status}: ${detail}`);
  }
  return { stdout: proc.stdout, stderr: proc.stderr };
}

function parseBreakdown(text: string): Breakdown {
  const raw = JSON.parse(text) as Record<string, unknown>;
  const seconds = (raw.seconds ?? {}) as Record<string, number>;
  const phase = (name: "data_copy" | "fork_join" | "compute" | "total"): PhaseTime => ({
    cycles: Number(raw[`${name}_cycles`]),
    seconds: Number(seconds[name]),
  });
  return {
    data_copy: phase("data_copy"),
    fork_join: phase("fork_join"),
    compute: phase("compute"),
    total: phase("total"),
    fell_back: Boolean(raw.fell_back),
  };
}

/**
 * Handle to the simulator with a sticky offload path and cost model.
 *
 * `configFile` is passed straight through as the CLI's `--config`, so
 * a session reads exactly the same params JSON that `offsim bench` and
 * `offsim gemm-verify` accept; without it the simulator calibrates its
 * defaults.
 */
export class Session {
  private path: OffloadPath;
  private readonly configFile?: string;
  private breakdown?: Breakdown;

  constructor(path: string = "host", configFile?: string) {
    this.path = parsePath(path);
    this.configFile = configFile;
  }

  currentPath(): OffloadPath {
    return this.path;
  }

  setPath(path: string): void {
    this.path = parsePath(path);
  }

  /** Compute a @ b (alpha=1, beta=0) on the session's offload path. */
  matmul(a: number[][], b: number[][]): number[][] {
    const left = encodeMatrix(a);
    const right = encodeMatrix(b);
    if (a[0].length !== b.length) {
      throw new Error(
        `shape mismatch: ${a.length}x${a[0].length} @ ${b.length}x${b[0].length}`,
      );
    }
    const dir = mkdtempSync(join(tmpdir(), "offsim-"));
    try {
      const aPath = join(dir, "a.bin");
      const bPath = join(dir, "b.bin");
      const outPath = join(dir, "result.bin");
      const bdPath = join(dir, "breakdown.json");
      writeFileSync(aPath, left);
      writeFileSync(bPath, right);
      const args = [
        "matmul",
        "--a", aPath,
        "--b", bPath,
        "--path", this.path,
        "--out", outPath,
        "--breakdown-out", bdPath,
      ];
      if (this.configFile) args.push("--config", this.configFile);
      runCli(args);
      const result = decodeMatrix(readFileSync(outPath));
      this.breakdown = parseBreakdown(readFileSync(bdPath, "utf8"));
      return result;
    } finally {
      rmSync(dir, { recursive: true, force: true });
    }
  }

  /** Breakdown of the most recent matmul; throws if none has run. */
  lastBreakdown(): Breakdown {
    if (!this.breakdown) {
      throw new Error("no matmul has completed in this session yet");
    }
    return this.breakdown;
  }
}
