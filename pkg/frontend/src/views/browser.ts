// Composition browser: list, screenshot preview with hover highlighting,
// and the side panel listing every involved feature (GUI-less ones too).

import type {
  AnnotationDoc,
  CompositionDoc,
  CompositionList,
  CompositionSummary,
} from "../api.js";
import { MICRO, hitTest } from "../hittest.js";

// "cached 5m ago" label for stale listings; null when live.
export function stalenessLabel(
  cached: boolean,
  fetchedAt: number,
  nowSeconds: number,
): string | null {
  if (!cached) return null;
  const age = Math.max(0, nowSeconds - fetchedAt);
  if (age < 60) return `cached ${age}s ago`;
  if (age < 3600) return `cached ${Math.floor(age / 60)}m ago`;
  return `cached ${Math.floor(age / 3600)}h ago`;
}

// CSS pixel box for one micro-unit rect over a preview of the given size.
export function highlightBox(
  rect: { x: number; y: number; w: number; h: number },
  width: number,
  height: number,
): { left: number; top: number; width: number; height: number } {
  return {
    left: (rect.x / MICRO) * width,
    top: (rect.y / MICRO) * height,
    width: (rect.w / MICRO) * width,
    height: (rect.h / MICRO) * height,
  };
}

// Features that have no placement are still part of the composition;
// the side panel marks them so nothing installable stays invisible.
export function featurePanelRows(
  comp: CompositionDoc,
): { id: string; version: string; hasUi: boolean }[] {
  const placed = new Set(comp.placements.map((p) => p.feature));
  return comp.feature_refs.map((ref) => ({
    id: ref.id,
    version: ref.version,
    hasUi: placed.has(ref.id),
  }));
}

export function renderCompositionList(
  container: HTMLElement,
  listing: CompositionList,
  selected: string | null,
  onSelect: (comp: CompositionSummary) => void,
  nowSeconds: number,
): void {
  container.innerHTML = "";
  const staleness = stalenessLabel(listing.cached, listing.fetched_at, nowSeconds);
  if (staleness !== null) {
    const banner = document.createElement("div");
    banner.className = "staleness";
    banner.textContent = staleness;
    container.appendChild(banner);
  }
  for (const comp of listing.compositions) {
    const row = document.createElement("button");
    row.className = "composition" + (comp.id === selected ? " selected" : "");
    row.dataset.compId = comp.id;
    row.textContent = `${comp.name} — ${comp.features} features`;
    row.addEventListener("click", () => onSelect(comp));
    container.appendChild(row);
  }
}

export function renderPreview(
  container: HTMLElement,
  screenshotUrl: string,
  annotations: AnnotationDoc[],
): void {
  container.innerHTML = "";
  const frame = document.createElement("div");
  frame.className = "preview-frame";

  const image = document.createElement("img");
  image.className = "preview-image";
  image.src = screenshotUrl;

  const highlight = document.createElement("div");
  highlight.className = "preview-highlight";
  highlight.style.display = "none";

  const caption = document.createElement("div");
  caption.className = "preview-caption";
  caption.textContent = "";

  frame.append(image, highlight);
  container.append(frame, caption);

  frame.addEventListener("mousemove", (event) => {
    const bounds = frame.getBoundingClientRect();
    const xMicro = Math.round(((event.clientX - bounds.left) / bounds.width) * MICRO);
    const yMicro = Math.round(((event.clientY - bounds.top) / bounds.height) * MICRO);
    const hit = hitTest(annotations, xMicro, yMicro);
    if (hit === null) {
      highlight.style.display = "none";
      caption.textContent = "";
      return;
    }
    const box = highlightBox(hit.rect, bounds.width, bounds.height);
    highlight.style.display = "block";
    highlight.style.left = `${box.left}px`;
    highlight.style.top = `${box.top}px`;
    highlight.style.width = `${box.width}px`;
    highlight.style.height = `${box.height}px`;
    caption.textContent = `${hit.part} — ${hit.display_name}`;
  });
  frame.addEventListener("mouseleave", () => {
    highlight.style.display = "none";
    caption.textContent = "";
  });
}

export function renderFeaturePanel(
  container: HTMLElement,
  comp: CompositionDoc,
): void {
  container.innerHTML = "";
  for (const row of featurePanelRows(comp)) {
    const item = document.createElement("div");
    item.className = "feature-row";
    item.textContent = `${row.id} ${row.version}` + (row.hasUi ? "" : " (no UI)");
    container.appendChild(item);
  }
}
