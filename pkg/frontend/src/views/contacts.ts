// Contacts pane: live roster with presence and sharing badges.

import type { RosterEntry } from "../api.js";

export type ContactBadges = { presence: string; sharing: string };

export function contactBadges(entry: RosterEntry): ContactBadges {
  return {
    presence: entry.online ? "online" : "offline",
    sharing: entry.sharing ? "sharing" : "not sharing",
  };
}

export function renderContacts(
  container: HTMLElement,
  entries: RosterEntry[],
  selected: string | null,
  onSelect: (user: string) => void,
): void {
  container.innerHTML = "";
  for (const entry of entries) {
    const badges = contactBadges(entry);
    const row = document.createElement("button");
    row.className = "contact" + (entry.user === selected ? " selected" : "");
    row.dataset.user = entry.user;

    const name = document.createElement("span");
    name.className = "contact-name";
    name.textContent = entry.user;

    const presence = document.createElement("span");
    presence.className = `badge ${entry.online ? "online" : "offline"}`;
    presence.textContent = badges.presence;

    const sharing = document.createElement("span");
    sharing.className = `badge ${entry.sharing ? "sharing" : "muted"}`;
    sharing.textContent = badges.sharing;

    row.append(name, presence, sharing);
    row.addEventListener("click", () => onSelect(entry.user));
    container.appendChild(row);
  }
}
