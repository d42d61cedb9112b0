import type { ComposerState } from "./types.js";

export interface ComposerEls {
  context: HTMLInputElement;
  pinyin: HTMLInputElement;
  tokens: HTMLElement;
  strip: HTMLElement;
  status: HTMLElement;
}

export interface RenderHandlers {
  onPick: (index: number) => void;
  onRetry: () => void;
}

/** Redraws the whole composer from state; candidate order is the service's. */
export function render(state: ComposerState, els: ComposerEls, handlers: RenderHandlers): void {
  if (els.context.value !== state.committed_text) {
    els.context.value = state.committed_text;
  }
  // the pinyin box is only cleared from state, never rewritten mid-typing
  if (state.pending_pinyin.length === 0 && els.pinyin.value.trim() !== "") {
    els.pinyin.value = "";
  }

  renderTokens(state, els.tokens);
  renderStrip(state, els.strip, handlers.onPick);
  renderStatus(state, els.status, handlers.onRetry);
}

function renderTokens(state: ComposerState, el: HTMLElement): void {
  el.textContent = "";
  const bad = state.status.kind === "error" ? state.status.position : null;
  state.pending_pinyin.forEach((token, i) => {
    const span = el.ownerDocument.createElement("span");
    span.className = i === bad ? "tok bad" : "tok";
    span.textContent = token;
    el.appendChild(span);
  });
}

function renderStrip(state: ComposerState, el: HTMLElement, onPick: (i: number) => void): void {
  el.textContent = "";
  const resp = state.candidates;
  if (!resp) return;
  resp.candidates.forEach((cand, i) => {
    const li = el.ownerDocument.createElement("li");
    const label = el.ownerDocument.createElement("strong");
    label.textContent = `${i + 1}.`;
    const text = el.ownerDocument.createElement("span");
    text.className = "cand-text";
    text.textContent = cand.text;
    const score = el.ownerDocument.createElement("span");
    score.className = "cand-score";
    score.textContent = cand.score.toFixed(3);
    li.append(label, " ", text, " ", score);
    if (i === state.highlighted) li.className = "active";
    li.addEventListener("click", () => onPick(i));
    el.appendChild(li);
  });
}

function renderStatus(state: ComposerState, el: HTMLElement, onRetry: () => void): void {
  el.textContent = "";
  el.className = `status ${state.status.kind}`;
  if (state.status.kind === "loading") {
    el.textContent = "…";
    return;
  }
  if (state.status.kind === "error") {
    const msg = el.ownerDocument.createElement("span");
    msg.textContent = state.status.message;
    const retry = el.ownerDocument.createElement("button");
    retry.type = "button";
    retry.className = "retry";
    retry.textContent = "retry";
    retry.addEventListener("click", onRetry);
    el.append(msg, " ", retry);
  }
}
