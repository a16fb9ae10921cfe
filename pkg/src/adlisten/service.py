"""Session orchestration: event loop, timers, network server, persistence.

The deterministic core is SessionRunner: it consumes SessionEvents on a
simulated clock and produces wire messages plus medical-log records, so
every timing property is testable without sleeping. serve() wraps the
runner in a socket server (newline-JSON, with an in-place WebSocket
upgrade for browser clients) driven by a real monotonic clock; chat()
wraps it in a terminal REPL.
"""

from __future__ import annotations

import base64
import datetime as _dt
import io
import queue
import socket
import sys
import threading
import time
import uuid
from dataclasses import dataclass
from importlib import resources as _res
from typing import Callable, Optional, Sequence, Union

from . import listener as _listener
from . import protocol
from .audio import AudioAnalysis, analyze_audio, detect_pauses, load_wav
from .config import ServiceConfig
from .dialogue import (
    DialogueSession,
    Speaker,
    Utterance,
    close_block,
    make_turn_pair,
)
from .ensemble import ModelBundle, Pause, detect_block
from .errors import AdListenError, BindError, ProtocolViolation
from .language import BigramModel, load_corpus, tokenize, train_bigram
from .listener import (
    ActTaggerModel,
    ListenerConfig,
    ListenerState,
    QADatabase,
    TimerExpiredEvent,
    UserUtteranceEvent,
    load_qa_database,
    load_topics,
)
from .medlog import (
    LogRecord,
    SessionSummaryRecord,
    TurnSummary,
    append_medical_log,
    block_record,
    now_iso,
)

# -- session events ------------------------------------------------------


@dataclass(frozen=True)
class SessionStart:
    pass


@dataclass(frozen=True)
class UserUtterance:
    text: str
    t_start: Optional[float] = None
    t_end: Optional[float] = None
    audio_b64: Optional[str] = None


@dataclass(frozen=True)
class Tick:
    now: float


@dataclass(frozen=True)
class SessionEnd:
    pass


SessionEvent = Union[SessionStart, UserUtterance, Tick, SessionEnd]


def assign_times(
    event: UserUtterance, arrival_clock: float, config: ServiceConfig
) -> tuple[float, float]:
    """Fill in missing utterance timings from the arrival clock.

    Explicit timings pass through unchanged; otherwise the utterance ends
    at arrival and its duration is estimated from the word count at the
    configured typing rate, floored at half a second.
    """
    if event.t_start is not None and event.t_end is not None:
        return float(event.t_start), float(event.t_end)
    t_end = float(event.t_end) if event.t_end is not None else float(arrival_clock)
    if event.t_start is not None and float(event.t_start) <= t_end:
        return float(event.t_start), t_end
    words = len(tokenize(event.text))
    duration = max(0.5, words / (config.typing_rate_wpm / 60.0))
    return t_end - duration, t_end


# -- listener resources --------------------------------------------------


@dataclass
class ListenerResources:
    listener_config: ListenerConfig
    qa_db: QADatabase
    bigram: BigramModel
    act_model: Optional[ActTaggerModel] = None


def _packaged(name: str) -> str:
    return str(_res.files("adlisten").joinpath("data", name))


def load_listener_resources(config: ServiceConfig) -> ListenerResources:
    """Load QA database, topics, and bigram corpus (packaged defaults)."""
    qa_db = load_qa_database(config.qa_db_path or _packaged("qa_db.json"))
    topics = load_topics(config.topics_path or _packaged("topics.txt"))
    corpus = load_corpus(config.corpus_path or _packaged("corpus.txt"))
    listener_config = ListenerConfig(
        silence_threshold_s=config.silence_threshold_s,
        wh_threshold=config.wh_threshold,
        topics=topics,
    )
    return ListenerResources(
        listener_config=listener_config,
        qa_db=qa_db,
        bigram=train_bigram(corpus),
    )


# -- the deterministic session core --------------------------------------


class SessionRunner:
    """One session's event loop body: events in, messages and records out.

    Owns the dialogue record, the listener state, and the per-block
    accumulators. All timing comes from the events themselves, so replays
    are bit-deterministic; the network layer supplies real-clock Ticks.
    """

    def __init__(
        self,
        config: ServiceConfig,
        models: ModelBundle,
        resources: ListenerResources,
        session_id: Optional[str] = None,
        record_sink: Optional[Callable[[LogRecord], None]] = None,
        wall_clock: Optional[Callable[[], str]] = None,
    ):
        self.cfg = config
        self.models = models
        self.res = resources
        self.session_id = session_id or uuid.uuid4().hex[:12]
        self.state = ListenerState(config=resources.listener_config)
        self.session = DialogueSession(session_id=self.session_id)
        self.records: list[LogRecord] = []
        self.clock = 0.0
        self.started = False
        self.ended = False
        self._last_audible_end = 0.0
        self._block_pauses: list[Pause] = []
        self._block_audio: dict[int, AudioAnalysis] = {}
        self._block_summaries: list[TurnSummary] = []
        self._finals: list[str] = []
        self._record_sink = record_sink
        self._wall_clock = wall_clock

    # wall_time defaults to the session clock projected onto the epoch,
    # keeping offline replays bit-identical; serve() injects real time
    def _stamp(self) -> str:
        if self._wall_clock is not None:
            return self._wall_clock()
        moment = _dt.datetime.fromtimestamp(self.clock, tz=_dt.timezone.utc)
        return moment.isoformat(timespec="milliseconds")

    def _sink(self, rec: LogRecord) -> None:
        self.records.append(rec)
        if self._record_sink is not None:
            self._record_sink(rec)

    def _watch_message(self) -> list[dict]:
        if self.state.silence_deadline is None:
            return []
        return [
            protocol.silence_watch(
                self.state.silence_deadline, self.state.silence_stage + 1
            )
        ]

    def _robot_duration(self, tokens: Sequence[str]) -> float:
        return max(0.5, len(tokens) / (self.cfg.typing_rate_wpm / 60.0))

    def handle_event(self, event: SessionEvent) -> list[dict]:
        """Advance the session by one event; returns outbound messages."""
        if isinstance(event, SessionStart):
            if self.started:
                raise ProtocolViolation("duplicate session start")
            self.started = True
            self.state.silence_deadline = (
                self.clock + self.state.config.silence_threshold_s
            )
            return [
                protocol.welcome(
                    self.session_id,
                    self.state.config.silence_threshold_s,
                    self.cfg.block_size_pairs,
                )
            ] + self._watch_message()
        if not self.started:
            raise ProtocolViolation("event before session start")
        if self.ended:
            raise ProtocolViolation("event after session end")
        if isinstance(event, SessionEnd):
            return self._handle_end()
        if isinstance(event, Tick):
            return self._handle_tick(event.now)
        return self._handle_utterance(event)

    def _handle_end(self) -> list[dict]:
        self.ended = True
        self.state.silence_deadline = None
        self._sink(
            SessionSummaryRecord(
                wall_time=self._stamp(),
                session_id=self.session_id,
                n_turn_pairs=len(self.session.pairs),
                n_blocks=len(self.session.completed_blocks),
                final_degrees=tuple(self._finals),
                breakdown_flag=self.state.breakdown,
            )
        )
        return []

    def _handle_tick(self, now: float) -> list[dict]:
        if now < self.clock:
            raise ProtocolViolation(f"tick {now} behind session clock {self.clock}")
        msgs = self._fire_due(now)
        self.clock = max(self.clock, now)
        return msgs

    def _fire_due(self, limit: float) -> list[dict]:
        """Emit every silence prompt whose deadline has passed by `limit`."""
        msgs: list[dict] = []
        while (
            not self.state.breakdown
            and self.state.silence_deadline is not None
            and self.state.silence_deadline <= limit
        ):
            deadline = self.state.silence_deadline
            action = _listener.step(
                self.state,
                TimerExpiredEvent(now=deadline),
                self.res.qa_db,
                self.res.bigram,
                self.res.act_model,
            )
            prompt_tokens = tokenize(action.text)
            self._last_audible_end = max(
                self._last_audible_end, deadline + self._robot_duration(prompt_tokens)
            )
            self.clock = max(self.clock, deadline)
            msgs.append(protocol.response(action.response_type.value, action.text))
            if self.state.breakdown:
                # the robot stops re-engaging; silence is no longer watched
                self.state.silence_deadline = None
            msgs.extend(self._watch_message())
        return msgs

    def _handle_utterance(self, event: UserUtterance) -> list[dict]:
        if not event.text.strip():
            raise ProtocolViolation("utterance with empty text")
        t_start, t_end = assign_times(event, self.clock, self.cfg)
        msgs = self._fire_due(t_start)

        action = _listener.step(
            self.state,
            UserUtteranceEvent(raw_text=event.text, t_start=t_start, t_end=t_end),
            self.res.qa_db,
            self.res.bigram,
            self.res.act_model,
        )
        self.clock = t_end

        analysis: Optional[AudioAnalysis] = None
        if event.audio_b64:
            buf = load_wav(io.BytesIO(base64.b64decode(event.audio_b64)))
            analysis = analyze_audio(buf, vad_threshold_db=self.cfg.vad_threshold_db)

        pair_index = len(self.session.pairs)
        human = Utterance(
            speaker=Speaker.HUMAN,
            raw_text=event.text,
            tokens=tuple(tokenize(event.text)),
            t_start=t_start,
            t_end=t_end,
            audio_ref=f"{self.session_id}:{pair_index}" if analysis else None,
        )
        robot_tokens = tuple(tokenize(action.text))
        robot = Utterance(
            speaker=Speaker.ROBOT,
            raw_text=action.text,
            tokens=robot_tokens,
            t_start=t_end,
            t_end=t_end + self._robot_duration(robot_tokens),
        )

        gap = t_start - self._last_audible_end
        if gap >= self.cfg.pause_min_s:
            self._block_pauses.append(Pause(self._last_audible_end, t_start))
        if analysis is not None:
            self._block_audio[pair_index] = analysis
            for begin, end in detect_pauses(
                analysis.frames,
                vad_threshold_db=self.cfg.vad_threshold_db,
                min_pause_s=self.cfg.pause_min_s,
            ):
                self._block_pauses.append(Pause(t_start + begin, t_start + end))

        self.session.add_pair(make_turn_pair(human, robot, pair_index))
        self._block_summaries.append(
            TurnSummary(
                speaker="human", text=human.raw_text, t_start=t_start, t_end=t_end
            )
        )
        self._block_summaries.append(
            TurnSummary(
                speaker="robot",
                text=robot.raw_text,
                t_start=robot.t_start,
                t_end=robot.t_end,
                response_type=action.response_type.value,
            )
        )
        self._last_audible_end = max(self._last_audible_end, robot.t_end)
        msgs.append(protocol.response(action.response_type.value, action.text))

        block = close_block(self.session)
        if block is not None:
            base = block.block_index * len(block.pairs)
            audio_by_pos = {
                idx - base: a
                for idx, a in self._block_audio.items()
                if 0 <= idx - base < len(block.pairs)
            }
            verdict = detect_block(
                block,
                self.models,
                audio_by_pair=audio_by_pos,
                pauses=tuple(self._block_pauses),
            )
            msgs.append(protocol.diagnosis_message(verdict))
            self._sink(
                block_record(
                    session_id=self.session_id,
                    verdict=verdict,
                    turn_summaries=tuple(self._block_summaries),
                    breakdown_flag=self.state.breakdown,
                    wall_time=self._stamp(),
                )
            )
            self._finals.append(verdict.final.wire_name)
            self._block_pauses = []
            self._block_audio = {}
            self._block_summaries = []

        msgs.extend(self._watch_message())
        return msgs


def run_session(
    events: Sequence[SessionEvent],
    config: ServiceConfig,
    models: Optional[ModelBundle] = None,
    resources: Optional[ListenerResources] = None,
    session_id: str = "offline",
) -> tuple[list[dict], list[LogRecord]]:
    """Replay an event stream deterministically.

    Returns all outbound wire messages and the medical-log records the
    session produced. The stream must begin with SessionStart and end
    with SessionEnd.
    """
    if not events or not isinstance(events[0], SessionStart):
        raise ProtocolViolation("stream must begin with SessionStart")
    if not isinstance(events[-1], SessionEnd):
        raise ProtocolViolation("stream must end with SessionEnd")
    runner = SessionRunner(
        config=config,
        models=models if models is not None else ModelBundle.zero(),
        resources=resources if resources is not None else load_listener_resources(config),
        session_id=session_id,
    )
    messages: list[dict] = []
    for event in events:
        messages.extend(runner.handle_event(event))
    return messages, runner.records


# -- external feature files ----------------------------------------------


def load_external_features(path: str) -> dict[str, "AcousticFeatureVector"]:
    """Utterance-id -> feature-vector map from a headed CSV.

    The first column is the utterance id; every row must carry the same
    number of feature values. A duplicate id is last-wins and warned
    about. Supplied vectors replace the built-in signal features.
    """
    import csv as _csv
    import warnings

    import numpy as np

    from .audio import AcousticFeatureVector
    from .errors import DimMismatch, FeatureParseError

    out: dict[str, AcousticFeatureVector] = {}
    expected: Optional[int] = None
    with open(path, newline="", encoding="utf-8") as fh:
        reader = _csv.reader(fh)
        header = next(reader, None)
        if not header or len(header) < 2:
            raise FeatureParseError("header row with an id column required", line=1)
        expected = len(header) - 1
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) - 1 != expected:
                raise DimMismatch(
                    f"line {line_no}: {len(row) - 1} values, header names {expected}"
                )
            try:
                values = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise FeatureParseError(str(exc), line=line_no) from exc
            key = row[0].strip()
            if key in out:
                warnings.warn(f"duplicate feature id {key!r}; keeping the later row")
            out[key] = AcousticFeatureVector(
                values=np.asarray(values, dtype=np.float64)
            )
    return out


# -- transports ----------------------------------------------------------


class _RawTransport:
    """Newline-delimited JSON over a plain socket."""

    def __init__(self, conn: socket.socket, initial: bytes = b""):
        self.conn = conn
        self.assembler = protocol.LineAssembler()
        self._pending = list(self.assembler.feed(initial)) if initial else []

    def settimeout(self, t: Optional[float]) -> None:
        self.conn.settimeout(t)

    def recv_lines(self) -> list[bytes]:
        """Blocks up to the socket timeout; [] on timeout, EOF raises."""
        if self._pending:
            out, self._pending = self._pending, []
            return out
        try:
            data = self.conn.recv(65536)
        except (socket.timeout, BlockingIOError, InterruptedError):
            return []
        if not data:
            raise ConnectionResetError("client closed the connection")
        return list(self.assembler.feed(data))

    def send_message(self, msg: dict) -> None:
        self.conn.sendall(protocol.encode_message(msg))

    def close(self) -> None:
        try:
            self.conn.close()
        except OSError:
            pass


_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"


def _ws_accept_key(client_key: str) -> str:
    import hashlib

    digest = hashlib.sha1((client_key + _WS_GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


class _WsTransport:
    """Minimal RFC 6455 server endpoint: text frames carry one message each."""

    def __init__(self, conn: socket.socket, head: bytes):
        self.conn = conn
        self._buffer = bytearray(head)
        self._closed = False
        self._handshake()
        self._fragments = bytearray()

    def _read_more(self) -> None:
        data = self.conn.recv(65536)
        if not data:
            raise ConnectionResetError("client closed the connection")
        self._buffer.extend(data)

    def _handshake(self) -> None:
        self.conn.settimeout(5.0)
        while b"\r\n\r\n" not in self._buffer:
            self._read_more()
        raw, _, rest = bytes(self._buffer).partition(b"\r\n\r\n")
        self._buffer = bytearray(rest)
        headers = {}
        for line in raw.decode("latin-1").split("\r\n")[1:]:
            name, _, value = line.partition(":")
            headers[name.strip().lower()] = value.strip()
        key = headers.get("sec-websocket-key")
        if not key or "websocket" not in headers.get("upgrade", "").lower():
            raise ProtocolViolation("malformed websocket upgrade request")
        reply = (
            "HTTP/1.1 101 Switching Protocols\r\n"
            "Upgrade: websocket\r\n"
            "Connection: Upgrade\r\n"
            f"Sec-WebSocket-Accept: {_ws_accept_key(key)}\r\n\r\n"
        )
        self.conn.sendall(reply.encode("latin-1"))

    def settimeout(self, t: Optional[float]) -> None:
        self.conn.settimeout(t)

    def _try_frame(self) -> Optional[tuple[int, bytes]]:
        """Parse one frame from the buffer, or None if incomplete."""
        buf = self._buffer
        if len(buf) < 2:
            return None
        fin = buf[0] & 0x80
        opcode = buf[0] & 0x0F
        masked = buf[1] & 0x80
        length = buf[1] & 0x7F
        offset = 2
        if length == 126:
            if len(buf) < 4:
                return None
            length = int.from_bytes(buf[2:4], "big")
            offset = 4
        elif length == 127:
            if len(buf) < 10:
                return None
            length = int.from_bytes(buf[2:10], "big")
            offset = 10
        mask = b""
        if masked:
            if len(buf) < offset + 4:
                return None
            mask = bytes(buf[offset : offset + 4])
            offset += 4
        if len(buf) < offset + length:
            return None
        payload = bytes(buf[offset : offset + length])
        del buf[: offset + length]
        if mask:
            payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
        if not fin and opcode in (0, 1, 2):
            self._fragments.extend(payload)
            return (0xFF, b"")  # continuation pending
        if opcode == 0:
            payload = bytes(self._fragments) + payload
            self._fragments.clear()
            opcode = 1
        return (opcode, payload)

    def recv_lines(self) -> list[bytes]:
        out: list[bytes] = []
        while True:
            frame = self._try_frame()
            if frame is None:
                if out:
                    return out
                try:
                    self._read_more()
                except (socket.timeout, BlockingIOError, InterruptedError):
                    return out
                continue
            opcode, payload = frame
            if opcode == 0xFF:
                continue
            if opcode == 8:  # close
                self._send_raw(0x88, b"")
                raise ConnectionResetError("websocket close")
            if opcode == 9:  # ping
                self._send_raw(0x8A, payload)
                continue
            if opcode in (1, 2):
                for piece in payload.split(b"\n"):
                    if piece.strip():
                        out.append(piece)

    def _send_raw(self, first_byte: int, payload: bytes) -> None:
        header = bytearray([first_byte])
        n = len(payload)
        if n < 126:
            header.append(n)
        elif n < 1 << 16:
            header.append(126)
            header.extend(n.to_bytes(2, "big"))
        else:
            header.append(127)
            header.extend(n.to_bytes(8, "big"))
        self.conn.sendall(bytes(header) + payload)

    def send_message(self, msg: dict) -> None:
        self._send_raw(0x81, protocol.encode_message(msg).rstrip(b"\n"))

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            try:
                self._send_raw(0x88, b"")
            except OSError:
                pass
        try:
            self.conn.close()
        except OSError:
            pass


def _open_transport(conn: socket.socket):
    """Sniff the first bytes: an HTTP GET means a WebSocket upgrade."""
    conn.settimeout(5.0)
    head = conn.recv(4)
    if not head:
        raise ConnectionResetError("client closed before speaking")
    if head.startswith(b"GET"):
        return _WsTransport(conn, head)
    return _RawTransport(conn, initial=head)


# -- the network server --------------------------------------------------

_ERROR_CODES = {
    "ProtocolViolation": "protocol",
    "ClockRegression": "clock",
    "UnsupportedFormat": "bad_audio",
    "TimeOrderViolation": "bad_times",
}


def _error_for(exc: Exception) -> dict:
    code = _ERROR_CODES.get(type(exc).__name__, "bad_message")
    return protocol.error(code, str(exc))


def _session_loop(transport, runner: SessionRunner, poll_s: float = 0.25) -> None:
    """Drive one session on the real clock until bye, EOF, or error."""
    t_origin = time.monotonic()
    said_hello = False
    while True:
        deadline = runner.state.silence_deadline
        if deadline is None or not said_hello:
            timeout = poll_s
        else:
            timeout = min(poll_s, max(0.001, deadline - (time.monotonic() - t_origin)))
        transport.settimeout(timeout)
        lines = transport.recv_lines()
        for line in lines:
            try:
                msg = protocol.check_client_message(protocol.decode_message(line))
            except ProtocolViolation as exc:
                transport.send_message(protocol.error("bad_message", str(exc)))
                continue
            try:
                if msg["type"] == "hello":
                    if said_hello:
                        transport.send_message(
                            protocol.error("protocol", "duplicate hello")
                        )
                        continue
                    said_hello = True
                    t_origin = time.monotonic()  # session clock starts at hello
                    for out in runner.handle_event(SessionStart()):
                        transport.send_message(out)
                elif msg["type"] == "bye":
                    for out in runner.handle_event(SessionEnd()):
                        transport.send_message(out)
                    return
                else:
                    # text-only clients get the arrival clock as t_end
                    arrival = time.monotonic() - t_origin
                    t_end = msg.get("t_end")
                    event = UserUtterance(
                        text=msg["text"],
                        t_start=msg.get("t_start"),
                        t_end=t_end if t_end is not None else arrival,
                        audio_b64=msg.get("audio_b64"),
                    )
                    for out in runner.handle_event(event):
                        transport.send_message(out)
            except AdListenError as exc:
                transport.send_message(_error_for(exc))
            except Exception as exc:  # robustness contract: session survives
                transport.send_message(protocol.error("internal", str(exc)))
        if not lines and said_hello and not runner.ended:
            deadline = runner.state.silence_deadline
            now = time.monotonic() - t_origin
            if deadline is not None and now >= deadline:
                try:
                    for out in runner.handle_event(Tick(now)):
                        transport.send_message(out)
                except AdListenError as exc:
                    transport.send_message(_error_for(exc))


class SessionServer:
    """Threaded accept loop; one SessionRunner per connection."""

    def __init__(
        self,
        config: ServiceConfig,
        models: Optional[ModelBundle] = None,
        resources: Optional[ListenerResources] = None,
    ):
        self.config = config
        self.models = models if models is not None else ModelBundle.zero()
        self.resources = (
            resources if resources is not None else load_listener_resources(config)
        )
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        try:
            self._sock = socket.create_server(
                (config.host, config.port), reuse_port=False
            )
        except OSError as exc:
            raise BindError(f"cannot bind {config.host}:{config.port}: {exc}") from exc
        self.port = self._sock.getsockname()[1]

    def _record_sink(self, rec: LogRecord) -> None:
        append_medical_log(self.config.medical_log_path, rec)

    def _client(self, conn: socket.socket) -> None:
        transport = None
        # resources are read-only; per-session state lives in the runner
        runner = SessionRunner(
            config=self.config,
            models=self.models,
            resources=self.resources,
            record_sink=self._record_sink,
            wall_clock=now_iso,
        )
        try:
            transport = _open_transport(conn)
            _session_loop(transport, runner)
        except (ConnectionError, OSError, ProtocolViolation):
            pass
        finally:
            if not runner.ended and runner.started:
                runner.handle_event(SessionEnd())  # summary record on drop
            if transport is not None:
                transport.close()
            else:
                try:
                    conn.close()
                except OSError:
                    pass

    def serve_forever(self, poll_s: float = 0.2) -> None:
        self._sock.settimeout(poll_s)
        try:
            while not self._stop.is_set():
                try:
                    conn, _ = self._sock.accept()
                except socket.timeout:
                    continue
                thread = threading.Thread(
                    target=self._client, args=(conn,), daemon=True
                )
                thread.start()
                self._threads.append(thread)
        finally:
            self._sock.close()

    def shutdown(self) -> None:
        self._stop.set()


def serve(
    config: ServiceConfig,
    models: Optional[ModelBundle] = None,
    resources: Optional[ListenerResources] = None,
) -> None:
    """Blocking entry point used by the CLI."""
    server = SessionServer(config, models=models, resources=resources)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()


# -- terminal REPL -------------------------------------------------------


def _stdin_reader(out_queue: "queue.Queue[Optional[str]]") -> None:
    for line in sys.stdin:
        out_queue.put(line.rstrip("\n"))
    out_queue.put(None)


def chat(
    config: ServiceConfig,
    models: Optional[ModelBundle] = None,
    resources: Optional[ListenerResources] = None,
    output: Callable[[str], None] = print,
) -> None:
    """Real-clock REPL against a local session (no network)."""
    runner = SessionRunner(
        config=config,
        models=models if models is not None else ModelBundle.zero(),
        resources=resources if resources is not None else load_listener_resources(config),
        wall_clock=now_iso,
    )
    lines: "queue.Queue[Optional[str]]" = queue.Queue()
    threading.Thread(target=_stdin_reader, args=(lines,), daemon=True).start()
    t_origin = time.monotonic()

    def show(msgs: list[dict]) -> None:
        for msg in msgs:
            if msg["type"] == "response":
                output(f"robot [{msg['response_type']}]> {msg['text']}")
            elif msg["type"] == "diagnosis":
                output(
                    f"-- block {msg['block_index']}: {msg['final']}"
                    f" (votes {', '.join(msg['votes'])}) --"
                )
            elif msg["type"] == "welcome":
                output(f"session {msg['session_id']} started; type /quit to leave")

    show(runner.handle_event(SessionStart()))
    while True:
        deadline = runner.state.silence_deadline
        timeout = 0.25
        if deadline is not None:
            timeout = min(timeout, max(0.0, deadline - (time.monotonic() - t_origin)))
        try:
            line = lines.get(timeout=timeout)
        except queue.Empty:
            now = time.monotonic() - t_origin
            if deadline is not None and now >= deadline and not runner.ended:
                show(runner.handle_event(Tick(now)))
            continue
        if line is None or line.strip() == "/quit":
            runner.handle_event(SessionEnd())
            output("session closed")
            return
        if not line.strip():
            continue
        now = time.monotonic() - t_origin
        try:
            show(runner.handle_event(UserUtterance(text=line, t_end=now)))
        except AdListenError as exc:
            output(f"error: {exc}")
