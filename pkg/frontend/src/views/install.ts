// Selective-install dialog: one row per feature in the plan's closure,
// with a classification badge straight off the plan document.

import type { InstallEventDoc, PlanDoc } from "../api.js";

export type RowStatus = "present" | "missing" | "mismatch";

export type InstallRow = {
  id: string;
  required: string;
  status: RowStatus;
  local: string | null; // installed version when status is "mismatch"
};

// The rows are a pure re-arrangement of the plan document — the UI adds
// no classification logic of its own.
export function buildInstallRows(plan: PlanDoc): InstallRow[] {
  const rows: InstallRow[] = [];
  for (const ref of plan.already_present) {
    rows.push({ id: ref.id, required: ref.version, status: "present", local: null });
  }
  for (const ref of plan.missing) {
    rows.push({ id: ref.id, required: ref.version, status: "missing", local: null });
  }
  for (const m of plan.version_mismatch) {
    rows.push({ id: m.id, required: m.required, status: "mismatch", local: m.local });
  }
  rows.sort((a, b) => (a.id < b.id ? -1 : a.id > b.id ? 1 : 0));
  return rows;
}

export function hasConflicts(plan: PlanDoc): boolean {
  return plan.version_mismatch.length > 0;
}

export type InstallDialogHandlers = {
  onPlan: (select: string[]) => void;
  onInstall: (select: string[], withLayout: boolean, force: boolean) => void;
};

export function renderInstallDialog(
  container: HTMLElement,
  selectable: string[], // the composition's feature refs
  plan: PlanDoc,
  handlers: InstallDialogHandlers,
): void {
  container.innerHTML = "";
  const selected = new Set(plan.selected);

  const chooser = document.createElement("div");
  chooser.className = "install-chooser";
  for (const id of selectable) {
    const label = document.createElement("label");
    const box = document.createElement("input");
    box.type = "checkbox";
    box.checked = selected.has(id);
    box.addEventListener("change", () => {
      if (box.checked) selected.add(id);
      else selected.delete(id);
      handlers.onPlan([...selected].sort());
    });
    label.append(box, document.createTextNode(` ${id}`));
    chooser.appendChild(label);
  }

  const table = document.createElement("table");
  table.className = "install-rows";
  for (const row of buildInstallRows(plan)) {
    const tr = document.createElement("tr");
    tr.className = `status-${row.status}`;
    const badge =
      row.status === "mismatch"
        ? `version mismatch (installed ${row.local})`
        : row.status;
    tr.innerHTML = "";
    for (const text of [row.id, row.required, badge]) {
      const td = document.createElement("td");
      td.textContent = text;
      tr.appendChild(td);
    }
    table.appendChild(tr);
  }

  const layoutToggle = document.createElement("label");
  const layoutBox = document.createElement("input");
  layoutBox.type = "checkbox";
  layoutBox.checked = plan.include_composition;
  layoutToggle.append(layoutBox, document.createTextNode(" include perspective layout"));

  const forceToggle = document.createElement("label");
  const forceBox = document.createElement("input");
  forceBox.type = "checkbox";
  forceToggle.append(forceBox, document.createTextNode(" replace mismatched versions"));

  const warning = document.createElement("div");
  warning.className = "conflict-warning";
  if (hasConflicts(plan)) {
    warning.textContent =
      "Some features are installed at older versions; installing " +
      "without the replace option will be refused.";
  }

  const button = document.createElement("button");
  button.className = "install-button";
  button.textContent = "Install";
  button.addEventListener("click", () =>
    handlers.onInstall([...selected].sort(), layoutBox.checked, forceBox.checked),
  );

  const progress = document.createElement("ul");
  progress.className = "install-progress";

  container.append(chooser, table, warning, layoutToggle, forceToggle, button, progress);
}

export function appendInstallProgress(
  container: HTMLElement,
  event: InstallEventDoc,
): void {
  const progress = container.querySelector(".install-progress");
  if (!progress) return;
  const item = document.createElement("li");
  item.textContent = `installed ${event.id} ${event.version} (from ${event.source})`;
  progress.appendChild(item);
}
