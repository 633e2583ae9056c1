// Single-page wiring: one Api instance, one event socket, and the four
// panes. All state lives server-side; this module only holds view state.

import { Api, ApiError, type CompositionSummary, type EventDoc, type RosterEntry } from "./api.js";
import { renderContacts } from "./views/contacts.js";
import {
  renderCompositionList,
  renderFeaturePanel,
  renderPreview,
} from "./views/browser.js";
import { appendInstallProgress, renderInstallDialog } from "./views/install.js";
import { ChatThreads, renderChat } from "./views/chat.js";
import { setReconnectBanner, showNotice } from "./views/notices.js";

const api = new Api("");
const threads = new ChatThreads();

type ViewState = {
  contacts: RosterEntry[];
  selectedContact: string | null;
  selectedComposition: string | null;
};

const state: ViewState = {
  contacts: [],
  selectedContact: null,
  selectedComposition: null,
};

function pane(id: string): HTMLElement {
  const element = document.getElementById(id);
  if (!element) throw new Error(`missing pane: ${id}`);
  return element;
}

function notify(error: unknown): void {
  const text =
    error instanceof ApiError ? `${error.status}: ${error.message}` : String(error);
  showNotice(pane("notices"), text);
}

async function refreshContacts(): Promise<void> {
  try {
    state.contacts = await api.contacts();
  } catch (error) {
    notify(error);
    return;
  }
  renderContacts(pane("contacts"), state.contacts, state.selectedContact, (user) => {
    state.selectedContact = user;
    state.selectedComposition = null;
    void refreshCompositions();
    renderChatPane();
  });
}

async function refreshCompositions(): Promise<void> {
  const contact = state.selectedContact;
  if (contact === null) return;
  pane("preview").innerHTML = "";
  pane("features").innerHTML = "";
  pane("install").innerHTML = "";
  try {
    const listing = await api.compositions(contact);
    renderCompositionList(
      pane("compositions"),
      listing,
      state.selectedComposition,
      (comp) => void openComposition(comp),
      Math.floor(Date.now() / 1000),
    );
  } catch (error) {
    pane("compositions").innerHTML = "";
    notify(error);
  }
}

async function openComposition(summary: CompositionSummary): Promise<void> {
  const contact = state.selectedContact;
  if (contact === null) return;
  state.selectedComposition = summary.id;
  try {
    const comp = await api.composition(summary.id);
    const annotations = await api.annotations(summary.id);
    renderPreview(pane("preview"), api.screenshotUrl(summary.id), annotations);
    renderFeaturePanel(pane("features"), comp);
    await refreshPlan(comp.feature_refs.map((ref) => ref.id));
  } catch (error) {
    notify(error);
  }
}

async function refreshPlan(select: string[]): Promise<void> {
  const contact = state.selectedContact;
  const compId = state.selectedComposition;
  if (contact === null || compId === null) return;
  try {
    const comp = await api.composition(compId);
    const plan = await api.plan(contact, compId, select);
    renderInstallDialog(
      pane("install"),
      comp.feature_refs.map((ref) => ref.id),
      plan,
      {
        onPlan: (nextSelect) => void refreshPlan(nextSelect),
        onInstall: (chosen, withLayout, force) =>
          void runInstall(chosen, withLayout, force),
      },
    );
  } catch (error) {
    notify(error);
  }
}

async function runInstall(
  select: string[],
  withLayout: boolean,
  force: boolean,
): Promise<void> {
  const contact = state.selectedContact;
  const compId = state.selectedComposition;
  if (contact === null || compId === null) return;
  try {
    await api.install(contact, compId, select, withLayout, force);
    await refreshPlan(select);
  } catch (error) {
    notify(error);
  }
}

function renderChatPane(): void {
  renderChat(pane("chat"), state.selectedContact, threads, (text) => {
    const contact = state.selectedContact;
    if (contact === null) return;
    api
      .chat(contact, text)
      .then(() => {
        threads.append(contact, { from: "me", text, sentAt: Date.now() / 1000 });
        renderChatPane();
      })
      .catch(notify);
  });
}

function onEvent(event: EventDoc): void {
  switch (event.type) {
    case "presence":
      void refreshContacts();
      break;
    case "chat":
      threads.append(event.sender, {
        from: event.sender,
        text: event.text,
        sentAt: event.sent_at,
      });
      renderChatPane();
      break;
    case "install":
      appendInstallProgress(pane("install"), {
        id: event.feature,
        version: event.version,
        source: event.source,
      });
      break;
    case "session":
      if (event.state !== "connected") setReconnectBanner(document.body, true);
      break;
    case "error":
      showNotice(pane("notices"), `${event.code}: ${event.detail}`);
      break;
  }
}

function connectEvents(): void {
  const socket = new WebSocket(api.eventsUrl());
  socket.onopen = () => setReconnectBanner(document.body, false);
  socket.onmessage = (message) => onEvent(JSON.parse(message.data) as EventDoc);
  socket.onclose = () => {
    setReconnectBanner(document.body, true);
    setTimeout(connectEvents, 2000); // events are at-most-once; no replay
  };
}

void refreshContacts();
renderChatPane();
connectEvents();
