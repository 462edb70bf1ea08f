import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    // the contract test generates a phantom and spawns the session service
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
