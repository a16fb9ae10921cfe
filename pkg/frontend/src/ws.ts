/**
 * WebSocket client for the session service. One canonical JSON message
 * per text frame; the service replies in kind.
 */

import type { ClientMessage, ServerMessage } from "./protocol.js";
import {
  ProtocolError,
  bye,
  decodeServerMessage,
  encodeMessage,
  hello,
  utterance,
} from "./protocol.js";

export interface WsLike {
  onopen: (() => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
  send(data: string): void;
  close(): void;
}

export interface ClientHandlers {
  onMessage: (msg: ServerMessage) => void;
  onOpen?: () => void;
  onClose?: () => void;
  onProtocolError?: (err: ProtocolError) => void;
}

const browserSocket = (url: string): WsLike =>
  new WebSocket(url) as unknown as WsLike;

export class ListenerClient {
  private ws: WsLike | null = null;

  constructor(
    private readonly url: string,
    private readonly openSocket: (url: string) => WsLike = browserSocket,
  ) {}

  connect(handlers: ClientHandlers): void {
    const ws = this.openSocket(this.url);
    this.ws = ws;
    ws.onopen = () => handlers.onOpen?.();
    ws.onclose = () => handlers.onClose?.();
    ws.onerror = () => handlers.onClose?.();
    ws.onmessage = (ev) => {
      if (typeof ev.data !== "string") return;
      try {
        handlers.onMessage(decodeServerMessage(ev.data));
      } catch (exc) {
        if (exc instanceof ProtocolError && handlers.onProtocolError) {
          handlers.onProtocolError(exc);
        } else if (!(exc instanceof ProtocolError)) {
          throw exc;
        }
      }
    };
  }

  hello(client: string): void {
    this.send(hello(client));
  }

  say(text: string, tStart?: number, tEnd?: number): void {
    this.send(utterance(text, tStart, tEnd));
  }

  bye(): void {
    this.send(bye());
  }

  close(): void {
    this.ws?.close();
    this.ws = null;
  }

  private send(msg: ClientMessage): void {
    if (this.ws === null) throw new Error("not connected");
    this.ws.send(encodeMessage(msg));
  }
}
