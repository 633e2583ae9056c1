// Per-contact chat threads fed by POST /chat and the event stream.

export type ChatMessage = { from: string; text: string; sentAt: number };

export class ChatThreads {
  private threads = new Map<string, ChatMessage[]>();

  append(contact: string, message: ChatMessage): void {
    const thread = this.threads.get(contact) ?? [];
    thread.push(message);
    this.threads.set(contact, thread);
  }

  messages(contact: string): ChatMessage[] {
    return this.threads.get(contact) ?? [];
  }
}

export function renderChat(
  container: HTMLElement,
  contact: string | null,
  threads: ChatThreads,
  onSend: (text: string) => void,
): void {
  container.innerHTML = "";
  if (contact === null) return;

  const log = document.createElement("div");
  log.className = "chat-log";
  for (const message of threads.messages(contact)) {
    const line = document.createElement("div");
    line.className = "chat-line";
    line.textContent = `${message.from}: ${message.text}`;
    log.appendChild(line);
  }

  const form = document.createElement("form");
  form.className = "chat-form";
  const input = document.createElement("input");
  input.type = "text";
  input.placeholder = `message ${contact}`;
  const send = document.createElement("button");
  send.type = "submit";
  send.textContent = "Send";
  form.append(input, send);
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    if (input.value.trim() === "") return;
    onSend(input.value);
    input.value = "";
  });

  container.append(log, form);
  log.scrollTop = log.scrollHeight;
}
