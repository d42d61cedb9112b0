import { HttpClient, type FetchFn } from "./client.js";
import { Composer } from "./composer.js";
import { render, type ComposerEls } from "./render.js";
import type { Mode } from "./types.js";

export interface BootOptions {
  baseUrl: string;
  fetchFn?: FetchFn;
  debounceMs?: number;
  topK?: number;
  beamSize?: number;
}

export interface App {
  composer: Composer;
  client: HttpClient;
  els: ComposerEls & {
    health: HTMLElement;
    serviceUrl: HTMLInputElement;
    connect: HTMLButtonElement;
    mode: HTMLSelectElement;
    topK: HTMLInputElement;
    beamSize: HTMLInputElement;
    copy: HTMLButtonElement;
  };
  /** Resolves after the initial health check has rendered (ok or not). */
  ready: Promise<void>;
}

function grab<T extends Element>(doc: Document, id: string): T {
  const el = doc.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as unknown as T;
}

/** Wires the static shell in `doc` to a composer against `opts.baseUrl`. */
export function boot(doc: Document, opts: BootOptions): App {
  const els = {
    context: grab<HTMLInputElement>(doc, "context-box"),
    pinyin: grab<HTMLInputElement>(doc, "pinyin-box"),
    tokens: grab<HTMLElement>(doc, "tokens"),
    strip: grab<HTMLElement>(doc, "strip"),
    status: grab<HTMLElement>(doc, "status"),
    health: grab<HTMLElement>(doc, "health"),
    serviceUrl: grab<HTMLInputElement>(doc, "service-url"),
    connect: grab<HTMLButtonElement>(doc, "connect"),
    mode: grab<HTMLSelectElement>(doc, "mode"),
    topK: grab<HTMLInputElement>(doc, "top-k"),
    beamSize: grab<HTMLInputElement>(doc, "beam-size"),
    copy: grab<HTMLButtonElement>(doc, "copy"),
  };

  const client = new HttpClient(opts.baseUrl, opts.fetchFn);
  const composer = new Composer({
    client,
    debounceMs: opts.debounceMs,
    topK: opts.topK ?? (Number(els.topK.value) || undefined),
    beamSize: opts.beamSize ?? (Number(els.beamSize.value) || undefined),
    mode: (els.mode.value as Mode) || undefined,
    onChange: (state) => render(state, els, handlers),
  });
  const handlers = {
    onPick: (i: number) => composer.selectCandidate(i),
    onRetry: () => composer.retry(),
  };

  els.serviceUrl.value = opts.baseUrl;
  els.topK.value = String(composer.state.top_k);
  els.beamSize.value = String(composer.state.beam_size);
  els.mode.value = composer.state.mode;

  const checkHealth = async (): Promise<void> => {
    els.health.textContent = "connecting…";
    els.health.className = "health pending";
    try {
      const info = await client.health();
      els.health.textContent = `${info.model_id} ready`;
      els.health.className = "health ok";
    } catch (err) {
      els.health.textContent = `service unreachable: ${err instanceof Error ? err.message : err}`;
      els.health.className = "health error";
    }
  };

  els.connect.addEventListener("click", () => {
    client.baseUrl = els.serviceUrl.value.trim().replace(/\/+$/, "");
    void checkHealth();
  });

  els.context.addEventListener("input", () => composer.setContext(els.context.value));
  els.pinyin.addEventListener("input", () => composer.setPinyinText(els.pinyin.value));

  els.pinyin.addEventListener("keydown", (ev: KeyboardEvent) => {
    const stripLen = composer.state.candidates?.candidates.length ?? 0;
    if (ev.key >= "1" && ev.key <= "9" && stripLen > 0) {
      if (composer.selectCandidate(Number(ev.key) - 1)) ev.preventDefault();
      return;
    }
    if (ev.key === "Enter" && stripLen > 0) {
      if (composer.commitHighlighted()) ev.preventDefault();
      return;
    }
    if ((ev.key === "ArrowDown" || ev.key === "Tab") && stripLen > 0) {
      composer.moveHighlight(1);
      ev.preventDefault();
      return;
    }
    if (ev.key === "ArrowUp" && stripLen > 0) {
      composer.moveHighlight(-1);
      ev.preventDefault();
      return;
    }
    if (ev.key === "Escape") {
      composer.clearPinyin();
      ev.preventDefault();
    }
  });

  els.mode.addEventListener("change", () => composer.setMode(els.mode.value as Mode));
  els.topK.addEventListener("change", () => composer.setTopK(Number(els.topK.value)));
  els.beamSize.addEventListener("change", () => composer.setBeamSize(Number(els.beamSize.value)));

  els.copy.addEventListener("click", () => {
    void copyText(doc, composer.state.committed_text).then((ok) => {
      els.copy.textContent = ok ? "copied" : "copy failed";
      setTimeout(() => {
        els.copy.textContent = "copy transcript";
      }, 1200);
    });
  });

  render(composer.state, els, handlers);
  return { composer, client, els, ready: checkHealth() };
}

async function copyText(doc: Document, text: string): Promise<boolean> {
  const clipboard = doc.defaultView?.navigator?.clipboard;
  if (clipboard?.writeText) {
    try {
      await clipboard.writeText(text);
      return true;
    } catch {
      // fall through to the textarea path
    }
  }
  try {
    const ta = doc.createElement("textarea");
    ta.value = text;
    doc.body.appendChild(ta);
    ta.select();
    const ok = doc.execCommand("copy");
    ta.remove();
    return ok;
  } catch {
    return false;
  }
}
