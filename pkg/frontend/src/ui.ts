/**
 * Thin DOM rendering: ViewState in, elements out.  No planning logic
 * lives here; everything shown is read straight off the view, and the
 * buttons come from `controls`, so what is clickable is exactly what
 * the protocol marks as the operator's to do.
 */

import { SessionClient } from "./client.js";
import { controls, ViewState } from "./state.js";

function el(
  doc: Document,
  tag: string,
  className: string,
  text?: string,
): HTMLElement {
  const node = doc.createElement(tag);
  node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function renderSuggestion(doc: Document, view: ViewState, client: SessionClient): HTMLElement {
  const card = el(doc, "section", "suggestion-card");
  if (view.phase === "done") {
    card.append(el(doc, "h2", "headline", "Cooperation solved"));
  } else if (view.phase === "failed") {
    card.append(
      el(doc, "h2", "headline", `Cooperation failed: ${view.failureReason ?? "unknown"}`),
    );
  } else if (view.suggestion === null) {
    card.append(el(doc, "h2", "headline", "Waiting for the planner"));
  } else if (view.suggestion.agent === "robot") {
    card.append(el(doc, "h2", "headline", `Robot: ${view.suggestion.action}`));
    card.append(el(doc, "p", "binding", "imposed: the robot runs this itself"));
  } else if (view.suggestion.agent === "joint") {
    card.append(el(doc, "h2", "headline", `Together: ${view.suggestion.action}`));
    card.append(el(doc, "p", "binding", "coordinated: confirm once both sides are done"));
  } else {
    card.append(el(doc, "h2", "headline", `Your action: ${view.suggestion.action}`));
    card.append(el(doc, "p", "binding", "suggested: you may pick an alternative instead"));
  }
  const buttons = el(doc, "div", "controls");
  for (const control of controls(view)) {
    const button = doc.createElement("button");
    button.textContent = control.label;
    button.disabled = !control.enabled;
    button.className = `control control-${control.kind}`;
    button.addEventListener("click", () => client.press(control));
    buttons.append(button);
  }
  card.append(buttons);
  return card;
}

function renderRobot(doc: Document, view: ViewState): HTMLElement {
  const box = el(doc, "section", "robot-activity");
  if (view.robot.active) {
    box.append(el(doc, "p", "robot-state", `robot executing ${view.robot.action}`));
  } else {
    box.append(el(doc, "p", "robot-state robot-idle", "robot idle"));
  }
  return box;
}

function renderPallet(doc: Document, view: ViewState): HTMLElement {
  const strip = el(doc, "section", "pallet-strip");
  strip.append(
    el(doc, "p", "pallet-count", `placed ${view.pallet.placed} of ${view.pallet.total}`),
  );
  const row = el(doc, "div", "pallet-slots");
  for (const slot of view.pallet.slots) {
    const cell = el(doc, "span", `slot slot-${slot.kind ?? "empty"}`, slot.node);
    cell.title = slot.arc === null ? "empty" : `${slot.arc} (${slot.kind})`;
    row.append(cell);
  }
  strip.append(row);
  return strip;
}

function renderMetrics(doc: Document, view: ViewState): HTMLElement {
  const panel = el(doc, "section", "metrics-panel");
  const m = view.metrics;
  const fmt = (v: number) => v.toFixed(2);
  panel.append(
    el(
      doc,
      "p",
      "metrics-line",
      m === null
        ? "metrics pending"
        : `T_m ${fmt(m.t_m)}  T_h ${fmt(m.t_h)}  T_r ${fmt(m.t_r)}  T_c ${fmt(m.t_c)}`,
    ),
  );
  return panel;
}

function renderFeed(doc: Document, view: ViewState): HTMLElement {
  const list = el(doc, "section", "event-feed");
  for (const line of view.feed) {
    list.append(el(doc, "p", "feed-line", line));
  }
  return list;
}

/** Replace `root`'s content with a full rendering of the view. */
export function render(root: HTMLElement, view: ViewState, client: SessionClient): void {
  const doc = root.ownerDocument;
  root.textContent = "";
  const status = el(doc, "p", `connection connection-${view.connection}`, view.connection);
  root.append(status);
  if (view.banner !== null) {
    root.append(el(doc, "p", "banner", view.banner));
  }
  if (view.lastError !== null) {
    root.append(
      el(doc, "p", "error-toast", `${view.lastError.code}: ${view.lastError.message}`),
    );
  }
  root.append(renderSuggestion(doc, view, client));
  root.append(renderRobot(doc, view));
  root.append(renderPallet(doc, view));
  root.append(renderMetrics(doc, view));
  root.append(renderFeed(doc, view));
}
