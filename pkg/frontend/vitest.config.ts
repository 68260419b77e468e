import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "jsdom",
    include: ["test/**/*.test.ts"],
    testTimeout: 45_000,
    hookTimeout: 90_000,
    fileParallelism: false,
  },
});
