import { spawn, spawnSync } from "node:child_process";
import { existsSync, mkdirSync } from "node:fs";
import { createServer } from "node:net";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import type { GlobalSetupContext } from "vitest/node";

declare module "vitest" {
  export interface ProvidedContext {
    baseUrl: string;
  }
}

const here = dirname(fileURLToPath(import.meta.url));
const repoRoot = join(here, "..", "..");
const cacheDir = join(here, ".cache");
const checkpoint = join(cacheDir, "demo.pylm");

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.listen(0, "127.0.0.1", () => {
      const addr = srv.address();
      if (addr && typeof addr === "object") {
        const port = addr.port;
        srv.close(() => resolve(port));
      } else {
        srv.close(() => reject(new Error("could not allocate a port")));
      }
    });
  });
}

/** Same recipe as the overfit experiment in the acceptance suite. */
function trainIfMissing(): void {
  if (existsSync(checkpoint)) return;
  mkdirSync(cacheDir, { recursive: true });
  console.log("training the demo checkpoint (one-time, a few minutes)…");
  const r = spawnSync(
    "pinyinlm",
    [
      "train",
      "--corpus", join(repoRoot, "tests", "data", "toy", "overfit_200.txt"),
      "--out", checkpoint,
      "--steps", "600", "--n-layers", "2", "--d-model", "128",
      "--n-heads", "4", "--d-ff", "512", "--variant", "concat",
      "--learning-rate", "3e-4", "--max-positions", "64", "--seed", "0",
    ],
    { stdio: "inherit" },
  );
  if (r.status !== 0) throw new Error(`training failed with status ${r.status}`);
}

export default async function setup({ provide }: GlobalSetupContext): Promise<() => void> {
  trainIfMissing();
  const port = await freePort();
  const proc = spawn(
    "pinyinlm",
    ["serve", "--model", checkpoint, "--host", "127.0.0.1", "--port", String(port)],
    { stdio: "ignore" },
  );
  const baseUrl = `http://127.0.0.1:${port}`;
  const deadline = Date.now() + 60_000;
  for (;;) {
    try {
      const r = await fetch(`${baseUrl}/v1/health`);
      if (r.ok) break;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) {
      proc.kill("SIGKILL");
      throw new Error("service did not come up within 60s");
    }
    await new Promise((resolve) => setTimeout(resolve, 250));
  }
  provide("baseUrl", baseUrl);
  return () => {
    proc.kill("SIGTERM");
  };
}
