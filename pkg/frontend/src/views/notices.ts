// Dismissible error notices and the disconnected-state banner.

export function showNotice(container: HTMLElement, text: string): void {
  const notice = document.createElement("div");
  notice.className = "notice";
  const message = document.createElement("span");
  message.textContent = text;
  const dismiss = document.createElement("button");
  dismiss.textContent = "×";
  dismiss.addEventListener("click", () => notice.remove());
  notice.append(message, dismiss);
  container.appendChild(notice);
}

export function setReconnectBanner(container: HTMLElement, visible: boolean): void {
  let banner = container.querySelector<HTMLElement>(".reconnect-banner");
  if (!visible) {
    banner?.remove();
    return;
  }
  if (banner) return;
  banner = document.createElement("div");
  banner.className = "reconnect-banner";
  banner.textContent = "Disconnected from the daemon — reconnecting…";
  container.prepend(banner);
}
