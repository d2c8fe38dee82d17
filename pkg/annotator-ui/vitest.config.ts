import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "happy-dom",
    include: ["tests/**/*.test.ts"],
    // e2e spawns the Python service; give it room to start.
    testTimeout: 60_000,
    hookTimeout: 60_000,
  },
});
