import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import type { PredictClient } from "../src/client.js";
import type { PredictRequest, PredictResponse } from "../src/types.js";

/** Body of index.html with the module script stripped, for jsdom mounting. */
export function shellHtml(): string {
  const here = dirname(fileURLToPath(import.meta.url));
  const html = readFileSync(join(here, "..", "index.html"), "utf8");
  const body = html.match(/<body>([\s\S]*)<\/body>/)?.[1];
  if (!body) throw new Error("no <body> in index.html");
  return body.replace(/<script[\s\S]*?<\/script>/, "");
}

interface Deferred {
  req: PredictRequest;
  resolve: (resp: PredictResponse) => void;
  reject: (err: unknown) => void;
}

/** Client whose responses the test resolves by hand, in any order. */
export class FakeClient implements PredictClient {
  pending: Deferred[] = [];
  calls: PredictRequest[] = [];

  predict(req: PredictRequest): Promise<PredictResponse> {
    this.calls.push(structuredClone(req));
    return new Promise((resolve, reject) => {
      this.pending.push({ req: structuredClone(req), resolve, reject });
    });
  }

  resolve(index: number, resp: PredictResponse): void {
    const d = this.pending[index];
    if (!d) throw new Error(`no pending request ${index}`);
    d.resolve(resp);
  }

  reject(index: number, err: unknown): void {
    const d = this.pending[index];
    if (!d) throw new Error(`no pending request ${index}`);
    d.reject(err);
  }
}

export function resp(texts: string[], modelId = "toy@0"): PredictResponse {
  return {
    candidates: texts.map((text, i) => ({ text, score: -0.1 * (i + 1) })),
    model_id: modelId,
    elapsed_ms: 1.0,
  };
}

/** Lets the awaited promise chain inside the composer land. */
export async function flush(): Promise<void> {
  await Promise.resolve();
  await Promise.resolve();
}

export function setValue(el: HTMLInputElement, value: string): void {
  el.value = value;
  el.dispatchEvent(new Event("input", { bubbles: true }));
}

export function pressKey(el: HTMLElement, key: string): void {
  el.dispatchEvent(new KeyboardEvent("keydown", { key, bubbles: true, cancelable: true }));
}

export async function until(
  cond: () => boolean, timeoutMs = 10_000, stepMs = 20,
): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (!cond()) {
    if (Date.now() > deadline) throw new Error("condition not met in time");
    await new Promise((r) => setTimeout(r, stepMs));
  }
}
