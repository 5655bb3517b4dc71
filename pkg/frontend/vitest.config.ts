import { defineConfig } from "vitest/config";

export default defineConfig({
  resolve: {
    // sources import sibling modules by their emitted .js names
    alias: [{ find: /^(\.{1,2}\/.*)\.js$/, replacement: "$1" }],
  },
  test: {
    environment: "node",
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
