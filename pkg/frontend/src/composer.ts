import { ServiceError, type PredictClient } from "./client.js";
import type { ComposerState, Mode } from "./types.js";

export interface ComposerOptions {
  client: PredictClient;
  /** Wait after the last keystroke before querying. */
  debounceMs?: number;
  topK?: number;
  beamSize?: number;
  mode?: Mode;
  onChange?: (state: ComposerState) => void;
}

/**
 * State machine behind the demo UI, framework-free so tests drive it directly.
 *
 * At most one request matters at a time: every issue captures the current
 * sequence number, every edit bumps it, and a response only lands if its
 * number still matches. A response therefore always corresponds to the
 * (committed_text, pending_pinyin, mode) triple that asked for it.
 */
export class Composer {
  state: ComposerState;
  private client: PredictClient;
  private debounceMs: number;
  private onChange: (s: ComposerState) => void;
  private seq = 0;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private inflight: AbortController | null = null;

  constructor(opts: ComposerOptions) {
    this.client = opts.client;
    this.debounceMs = opts.debounceMs ?? 150;
    this.onChange = opts.onChange ?? (() => {});
    this.state = {
      committed_text: "",
      pending_pinyin: [],
      mode: opts.mode ?? "abbrev",
      top_k: opts.topK ?? 5,
      beam_size: opts.beamSize ?? 16,
      candidates: null,
      highlighted: 0,
      status: { kind: "idle" },
    };
  }

  /** The context is directly editable; any change re-conditions the query. */
  setContext(text: string): void {
    if (text === this.state.committed_text) return;
    this.state.committed_text = text;
    this.scheduleQuery();
  }

  /** Raw text from the pinyin box; tokens are whatever whitespace separates. */
  setPinyinText(raw: string): void {
    const tokens = raw.split(/\s+/).filter(Boolean);
    if (tokens.join(" ") === this.state.pending_pinyin.join(" ")) return;
    this.state.pending_pinyin = tokens;
    this.scheduleQuery();
  }

  setMode(mode: Mode): void {
    if (mode === this.state.mode) return;
    this.state.mode = mode;
    this.queryNow();
  }

  setTopK(k: number): void {
    if (!Number.isFinite(k) || k < 1 || k === this.state.top_k) return;
    this.state.top_k = Math.floor(k);
    this.queryNow();
  }

  setBeamSize(b: number): void {
    if (!Number.isFinite(b) || b < 1 || b === this.state.beam_size) return;
    this.state.beam_size = Math.floor(b);
    this.queryNow();
  }

  /** Appends candidates[i].text to the context and clears the pinyin buffer. */
  selectCandidate(i: number): boolean {
    const resp = this.state.candidates;
    const cand = resp?.candidates[i];
    if (!cand) return false;
    this.invalidate();
    this.state.committed_text += cand.text;
    this.state.pending_pinyin = [];
    this.state.candidates = null;
    this.state.highlighted = 0;
    this.state.status = { kind: "idle" };
    this.emit();
    return true;
  }

  commitHighlighted(): boolean {
    return this.selectCandidate(this.state.highlighted);
  }

  moveHighlight(delta: number): void {
    const n = this.state.candidates?.candidates.length ?? 0;
    if (n === 0) return;
    this.state.highlighted = (this.state.highlighted + delta + n) % n;
    this.emit();
  }

  clearPinyin(): void {
    if (this.state.pending_pinyin.length === 0) return;
    this.state.pending_pinyin = [];
    this.scheduleQuery();
  }

  /** Re-issues the current triple immediately; wired to the retry button. */
  retry(): void {
    this.queryNow();
  }

  private emit(): void {
    this.onChange(this.state);
  }

  /** Orphans any scheduled or in-flight request. */
  private invalidate(): void {
    this.seq += 1;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    if (this.inflight !== null) {
      this.inflight.abort();
      this.inflight = null;
    }
  }

  private scheduleQuery(): void {
    this.invalidate();
    // old strip no longer matches the pair that will be queried
    this.state.candidates = null;
    this.state.highlighted = 0;
    if (this.state.pending_pinyin.length === 0) {
      this.state.status = { kind: "idle" };
      this.emit();
      return;
    }
    this.state.status = { kind: "loading" };
    this.timer = setTimeout(() => {
      this.timer = null;
      void this.issue();
    }, this.debounceMs);
    this.emit();
  }

  private queryNow(): void {
    this.invalidate();
    this.state.candidates = null;
    this.state.highlighted = 0;
    if (this.state.pending_pinyin.length === 0) {
      this.state.status = { kind: "idle" };
      this.emit();
      return;
    }
    this.state.status = { kind: "loading" };
    this.emit();
    void this.issue();
  }

  private async issue(): Promise<void> {
    const mySeq = this.seq;
    const ctrl = new AbortController();
    this.inflight = ctrl;
    try {
      const resp = await this.client.predict(
        {
          context: this.state.committed_text,
          pinyin: [...this.state.pending_pinyin],
          mode: this.state.mode,
          top_k: this.state.top_k,
          beam_size: this.state.beam_size,
        },
        ctrl.signal,
      );
      if (this.seq !== mySeq) return; // a newer edit owns the UI
      this.inflight = null;
      this.state.candidates = resp;
      this.state.highlighted = 0;
      this.state.status = { kind: "idle" };
      this.emit();
    } catch (err) {
      if (this.seq !== mySeq) return; // stale failures stay silent
      this.inflight = null;
      const position =
        err instanceof ServiceError && err.code === "unknown_pinyin"
          ? err.position
          : null;
      const message = err instanceof Error ? err.message : String(err);
      this.state.status = { kind: "error", message, position };
      this.emit();
    }
  }
}
