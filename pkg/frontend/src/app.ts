/**
 * Chat page wiring. Query flags:
 *   ?ws=ws://host:port   service endpoint (default ws://127.0.0.1:8765)
 *   ?verdict=0           hide the verdict panel (participant view)
 *   ?replay=1            replay the bundled fixture session, no server
 */

import { SilenceCountdown, startTicker } from "./countdown.js";
import { decodeServerLog } from "./protocol.js";
import {
  countdownHtml,
  diagnosisPanelHtml,
  transcriptHtml,
} from "./render.js";
import type { SessionView, ViewEvent } from "./state.js";
import { initialView, latestDiagnosis, reduce } from "./state.js";
import { ListenerClient } from "./ws.js";

const $ = (id: string): HTMLElement => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
};

const params = new URLSearchParams(location.search);
const showVerdict = params.get("verdict") !== "0";
const wsUrl = params.get("ws") ?? "ws://127.0.0.1:8765";

let view: SessionView = initialView;
const countdown = new SilenceCountdown();

function paint(): void {
  $("transcript").innerHTML = transcriptHtml(view.transcript);
  $("transcript").scrollTop = $("transcript").scrollHeight;
  $("diagnosis").innerHTML = diagnosisPanelHtml(latestDiagnosis(view), {
    showVerdict,
  });
  $("status").textContent =
    view.phase === "live"
      ? `session ${view.sessionId ?? ""}`
      : view.phase;
  if (view.lastError) {
    $("status").textContent += ` (error: ${view.lastError.code})`;
  }
}

function paintCountdown(): void {
  const watch = view.phase === "live" ? view.watch : null;
  $("countdown").innerHTML = countdownHtml(
    watch ? countdown.remaining() : null,
    watch,
  );
}

function dispatch(event: ViewEvent): void {
  if (event.kind === "server" && event.message.type === "welcome") {
    countdown.startSession();
  }
  if (event.kind === "server" && event.message.type === "silence_watch") {
    countdown.arm(event.message.deadline_s, event.message.stage);
  }
  view = reduce(view, event);
  paint();
  paintCountdown();
}

function runLive(): void {
  const client = new ListenerClient(wsUrl);
  client.connect({
    onOpen: () => client.hello("browser"),
    onMessage: (message) => dispatch({ kind: "server", message }),
    onClose: () => dispatch({ kind: "closed" }),
  });

  const input = $("input") as HTMLInputElement;
  const send = (): void => {
    const text = input.value.trim();
    if (!text || view.phase !== "live") return;
    client.say(text);
    dispatch({ kind: "sent", text });
    input.value = "";
  };
  $("send").addEventListener("click", send);
  input.addEventListener("keydown", (ev) => {
    if (ev.key === "Enter") send();
  });
  window.addEventListener("beforeunload", () => {
    if (view.phase === "live") client.bye();
    client.close();
  });
}

async function runReplay(): Promise<void> {
  const text = await (await fetch("fixtures/scripted_session.ndjson")).text();
  const messages = decodeServerLog(text);
  let i = 0;
  const step = (): void => {
    const message = messages[i];
    if (message === undefined) {
      dispatch({ kind: "closed" });
      return;
    }
    i += 1;
    dispatch({ kind: "server", message });
    setTimeout(step, 700);
  };
  step();
}

startTicker(paintCountdown);
paint();
if (params.get("replay") === "1") {
  void runReplay();
} else {
  runLive();
}
