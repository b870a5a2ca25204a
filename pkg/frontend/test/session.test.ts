import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import {
  type Breakdown,
  Session,
  decodeMatrix,
  encodeMatrix,
  runCli,
} from "../src/index.js";

function withTempDir<T>(fn: (dir: string) => T): T {
  const dir = mkdtempSync(join(tmpdir(), "offsim-test-"));
  try {
    return fn(dir);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}

function naiveMatmul(a: number[][], b: number[][]): number[][] {
  const m = a.length;
  const k = b.length;
  const n = b[0].length;
  const out: number[][] = Array.from({ length: m }, () => new Array<number>(n).fill(0));
  for (let i = 0; i < m; i++) {
    for (let j = 0; j < n; j++) {
      let acc = 0;
      for (let l = 0; l < k; l++) acc += a[i][l] * b[l][j];
      out[i][j] = acc;
    }
  }
  return out;
}

/** Deterministic non-repeating test values in roughly [-1, 1]. */
function patternMatrix(rows: number, cols: number, salt: number): number[][] {
  const out: number[][] = [];
  for (let i = 0; i < rows; i++) {
    const row: number[] = [];
    for (let j = 0; j < cols; j++) {
      row.push(((((i * cols + j + salt) * 2654435761) % 1024) - 512) / 512);
    }
    out.push(row);
  }
  return out;
}

describe("matrix files", () => {
  it("round-trips values through the column-major layout", () => {
    const m = [
      [1.5, -2.25, 3],
      [4, 5.125, -6],
    ];
    const buf = encodeMatrix(m);
    expect(Number(buf.readBigUInt64LE(0))).toBe(2);
    expect(Number(buf.readBigUInt64LE(8))).toBe(3);
    const payload = [0, 1, 2, 3, 4, 5].map((n) => buf.readDoubleLE(16 + 8 * n));
    expect(payload).toEqual([1.5, 4, -2.25, 5.125, 3, -6]);
    expect(decodeMatrix(buf)).toEqual(m);
  });

  it("preserves negative zero and extreme magnitudes", () => {
    const m = [[-0, 5e-324, 1.7976931348623157e308, -1e-300]];
    const back = decodeMatrix(encodeMatrix(m));
    expect(Object.is(back[0][0], -0)).toBe(true);
    expect(back[0][1]).toBe(5e-324);
    expect(back[0][2]).toBe(1.7976931348623157e308);
    expect(back[0][3]).toBe(-1e-300);
  });

  it("rejects ragged and empty inputs", () => {
    expect(() => encodeMatrix([])).toThrow(/at least one row/);
    expect(() => encodeMatrix([[]])).toThrow(/at least one column/);
    expect(() => encodeMatrix([[1], [2, 3]])).toThrow(/ragged/);
  });

  it("rejects truncated files", () => {
    expect(() => decodeMatrix(Buffer.alloc(8))).toThrow(/too short/);
    const buf = encodeMatrix([[1, 2], [3, 4]]);
    expect(() => decodeMatrix(buf.subarray(0, buf.length - 8))).toThrow(/expected/);
  });
});

describe("session basics", () => {
  it("rejects unknown offload paths", () => {
    expect(() => new Session("turbo")).toThrow(/unknown offload path/);
    const s = new Session("host");
    expect(() => s.setPath("turbo")).toThrow(/unknown offload path/);
    expect(s.currentPath()).toBe("host");
    s.setPath("zerocopy");
    expect(s.currentPath()).toBe("zerocopy");
  });

  it("errors when no matmul has run yet", () => {
    expect(() => new Session("copy").lastBreakdown()).toThrow(/no matmul/);
  });

  it("rejects mismatched operand shapes without spawning", () => {
    const s = new Session("host");
    const a = patternMatrix(2, 3, 1);
    const b = patternMatrix(2, 2, 2);
    expect(() => s.matmul(a, b)).toThrow(/shape mismatch/);
  });

  it("multiplies by the identity exactly", () => {
    const eye = Array.from({ length: 4 }, (_, i) =>
      Array.from({ length: 4 }, (_, j) => (i === j ? 1 : 0)),
    );
    const b = [
      [3.5, -1.25, 2],
      [0.125, 7, -8.5],
      [9, 0.0625, -3],
      [2.5, -4.75, 6],
    ];
    const s = new Session("copy");
    expect(s.matmul(eye, b)).toEqual(b);
  });

  it("matches an in-test triple loop at 4x4", () => {
    const a = patternMatrix(4, 4, 3);
    const b = patternMatrix(4, 4, 11);
    const got = new Session("copy").matmul(a, b);
    const want = naiveMatmul(a, b);
    for (let i = 0; i < 4; i++) {
      for (let j = 0; j < 4; j++) {
        const scale = Math.max(1, Math.abs(want[i][j]));
        expect(Math.abs(got[i][j] - want[i][j])).toBeLessThanOrEqual(1e-12 * scale);
      }
    }
  });
});

describe("timing breakdowns", () => {
  it("phases sum to the total and the host path never copies", () => {
    const a = patternMatrix(16, 16, 5);
    const b = patternMatrix(16, 16, 7);
    const s = new Session("host");
    s.matmul(a, b);
    const host = s.lastBreakdown();
    expect(host.data_copy.cycles).toBe(0);
    expect(host.fork_join.cycles).toBe(0);
    expect(host.compute.cycles).toBeGreaterThan(0);
    expect(host.total.cycles).toBe(host.compute.cycles);
    expect(host.fell_back).toBe(false);

    s.setPath("copy");
    s.matmul(a, b);
    const copy = s.lastBreakdown();
    expect(copy.data_copy.cycles).toBeGreaterThan(0);
    expect(copy.fork_join.cycles).toBeGreaterThan(0);
    expect(copy.data_copy.cycles + copy.fork_join.cycles + copy.compute.cycles).toBe(
      copy.total.cycles,
    );
    const secondsSum = copy.data_copy.seconds + copy.fork_join.seconds + copy.compute.seconds;
    expect(Math.abs(secondsSum - copy.total.seconds)).toBeLessThanOrEqual(
      1e-12 * copy.total.seconds,
    );

    s.setPath("zerocopy");
    s.matmul(a, b);
    const zc = s.lastBreakdown();
    expect(zc.data_copy.cycles).toBeGreaterThan(0);
    expect(zc.data_copy.cycles).toBeLessThan(copy.data_copy.cycles);
    expect(zc.compute.cycles).toBe(copy.compute.cycles);
  });

  it("applies a params file passed at construction", () => {
    withTempDir((dir) => {
      const paramsPath = join(dir, "params.json");
      runCli(["calibrate", "--out", paramsPath]);
      const params = JSON.parse(readFileSync(paramsPath, "utf8"));
      params.clock_hz = 100e6;
      const tweakedPath = join(dir, "fast-clock.json");
      writeFileSync(tweakedPath, JSON.stringify(params));

      const s = new Session("copy", tweakedPath);
      s.matmul(patternMatrix(8, 8, 13), patternMatrix(8, 8, 17));
      const bd = s.lastBreakdown();
      expect(bd.total.seconds).toBe(bd.total.cycles / 100e6);
      expect(bd.data_copy.seconds).toBe(bd.data_copy.cycles / 100e6);
    });
  });
});

describe("simulator fidelity at 128", () => {
  // Dumps seeded inputs and the simulator's own result via gemm-verify,
  // then replays the multiply through the binding on the same path.
  function checkPathFidelity(path: string): Breakdown {
    return withTempDir((dir) => {
      runCli(["gemm-verify", "--size", "128", "--path", path, "--dump-dir", dir]);
      const a = decodeMatrix(readFileSync(join(dir, "a.bin")));
      const b = decodeMatrix(readFileSync(join(dir, "b.bin")));
      const expected = readFileSync(join(dir, "result.bin"));
      const dumped = JSON.parse(readFileSync(join(dir, "breakdown.json"), "utf8"));

      const session = new Session(path);
      const result = session.matmul(a, b);
      expect(encodeMatrix(result).equals(expected)).toBe(true);

      const bd = session.lastBreakdown();
      expect(bd.data_copy.cycles).toBe(dumped.data_copy_cycles);
      expect(bd.fork_join.cycles).toBe(dumped.fork_join_cycles);
      expect(bd.compute.cycles).toBe(dumped.compute_cycles);
      expect(bd.total.cycles).toBe(dumped.total_cycles);
      return bd;
    });
  }

  it("is bitwise equal to the simulator on the host path", () => {
    checkPathFidelity("host");
  });

  it("is bitwise equal on the copy path and reproduces the 0.47 copy fraction", () => {
    const bd = checkPathFidelity("copy");
    const fraction = bd.data_copy.cycles / bd.total.cycles;
    expect(fraction).toBeGreaterThanOrEqual(0.45);
    expect(fraction).toBeLessThanOrEqual(0.49);
  });

  it("is bitwise equal to the simulator on the zerocopy path", () => {
    checkPathFidelity("zerocopy");
  });
});

describe("cli errors", () => {
  it("surfaces simulator failures with their stderr detail", () => {
    expect(() =>
      runCli([
        "matmul",
        "--a", "/nonexistent-a.bin",
        "--b", "/nonexistent-b.bin",
        "--out", "/tmp/offsim-client-never-written.bin",
      ]),
    ).toThrow(/exited with 2.*error:/s);
  });
});
