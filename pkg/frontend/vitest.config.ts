import { defineConfig } from "vitest/config";

// Every matmul shells out to the simulator CLI (a fresh Python process
// importing numpy), so individual tests can take several seconds.
export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    testTimeout: 120_000,
  },
});
