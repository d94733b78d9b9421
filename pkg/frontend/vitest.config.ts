import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "jsdom",
    include: ["tests/**/*.test.ts"],
    // The e2e test boots a real service process and walks the full ask flow.
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
