import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "jsdom",
    include: ["e2e/**/*.test.ts"],
    globalSetup: ["e2e/setup.ts"],
    testTimeout: 120_000,
    // one browser-like session against one service; keep runs serial
    fileParallelism: false,
  },
});
