"""Client for external definition scorers and a scripted mock server.

Wire format (bit-exact): UTF-8, one JSON object per line, LF endings.
Handshake: client sends ``{"hello": 1}``, server replies
``{"ready": true, "model": <name>}``. Requests are
``{"id": int, "concept": str, "sentence": str}``; responses are
``{"id": int, "score": float}`` with score in [0, 1]. No other fields are
permitted; responses may arrive in any order and the client reassembles
request order. Transport is a subprocess's standard streams or a TCP
socket. Out-of-range scores, unknown or duplicate ids, and extra fields
are hard protocol errors, never silently repaired.
"""

from __future__ import annotations

import json
import queue
import socket
import subprocess
import threading
import time
from dataclasses import dataclass
from typing import Sequence

HANDSHAKE_TIMEOUT = 30.0
BATCH_TIMEOUT = 60.0


class ProtocolError(RuntimeError):
    """Scorer endpoint violated the wire protocol or became unreachable."""


@dataclass(frozen=True)
class ScoreRequest:
    request_id: int
    concept: str
    sentence: str


@dataclass(frozen=True)
class ScoreResponse:
    request_id: int
    score: float


class _LineReader:
    """Background reader so recv can time out without killing the stream."""

    def __init__(self, readable) -> None:
        self._queue: queue.Queue[str | None] = queue.Queue()
        self._thread = threading.Thread(
            target=self._pump, args=(readable,), daemon=True
        )
        self._thread.start()

    def _pump(self, readable) -> None:
        try:
            for line in readable:
                self._queue.put(line)
        except (OSError, ValueError):
            pass
        self._queue.put(None)

    def readline(self, timeout: float) -> str | None:
        """A line, or None on EOF; raises TimeoutError on deadline."""
        try:
            return self._queue.get(timeout=timeout)
        except queue.Empty:
            raise TimeoutError(f"no response line within {timeout:.0f}s") from None


class BridgeClient:
    """One connection to a scorer process or socket; not shareable across
    workers. One in-flight batch at a time."""

    def __init__(
        self,
        writer,
        reader: _LineReader,
        close_fn,
        handshake_timeout: float = HANDSHAKE_TIMEOUT,
    ) -> None:
        self._writer = writer
        self._reader = reader
        self._close_fn = close_fn
        self._next_id = 0
        self._closed = False
        self.model_name = self._handshake(handshake_timeout)

    def _send(self, obj: dict) -> None:
        try:
            self._writer.write(json.dumps(obj, ensure_ascii=False) + "\n")
            self._writer.flush()
        except (OSError, ValueError, BrokenPipeError) as exc:
            self.close()
            raise ProtocolError(f"failed to send to scorer: {exc}") from exc

    def _recv(self, timeout: float) -> dict:
        try:
            line = self._reader.readline(timeout)
        except TimeoutError as exc:
            self.close()
            raise ProtocolError(str(exc)) from exc
        if line is None:
            self.close()
            raise ProtocolError("scorer closed the connection")
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            self.close()
            raise ProtocolError(f"malformed response line: {line!r}") from exc
        if not isinstance(obj, dict):
            self.close()
            raise ProtocolError(f"response is not a JSON object: {line!r}")
        return obj

    def _handshake(self, timeout: float) -> str:
        self._send({"hello": 1})
        reply = self._recv(timeout)
        if set(reply) != {"ready", "model"} or reply.get("ready") is not True:
            self.close()
            raise ProtocolError(f"bad handshake reply: {reply!r}")
        if not isinstance(reply["model"], str):
            self.close()
            raise ProtocolError(f"bad handshake model name: {reply!r}")
        return reply["model"]

    def next_request_id(self) -> int:
        self._next_id += 1
        return self._next_id

    def score_batch(
        self,
        requests: Sequence[ScoreRequest],
        timeout: float = BATCH_TIMEOUT,
    ) -> list[ScoreResponse]:
        """Send a batch and reassemble responses in request order."""
        if self._closed:
            raise ProtocolError("bridge connection is closed")
        if not requests:
            return []
        ids = [r.request_id for r in requests]
        if len(set(ids)) != len(ids):
            raise ValueError("request ids must be unique within a batch")
        for r in requests:
            if not r.concept or not r.sentence:
                raise ValueError("concept and sentence must be non-empty")
            self._send({"id": r.request_id, "concept": r.concept, "sentence": r.sentence})
        pending = set(ids)
        scores: dict[int, float] = {}
        deadline = time.monotonic() + timeout
        while pending:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                self.close()
                raise ProtocolError(
                    f"timed out waiting for responses to ids {sorted(pending)}"
                )
            obj = self._recv(remaining)
            if set(obj) != {"id", "score"}:
                self.close()
                raise ProtocolError(f"response fields must be exactly id/score: {obj!r}")
            rid, score = obj["id"], obj["score"]
            if not isinstance(rid, int) or isinstance(rid, bool):
                self.close()
                raise ProtocolError(f"response id is not an integer: {obj!r}")
            if rid not in pending:
                self.close()
                raise ProtocolError(f"unexpected or duplicate response id {rid}")
            if not isinstance(score, (int, float)) or isinstance(score, bool):
                self.close()
                raise ProtocolError(f"score is not a number: {obj!r}")
            if not 0.0 <= float(score) <= 1.0:
                self.close()
                raise ProtocolError(f"score out of [0, 1]: {score!r} for id {rid}")
            scores[rid] = float(score)
            pending.discard(rid)
        return [ScoreResponse(r.request_id, scores[r.request_id]) for r in requests]

    def score_pairs(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        requests = [
            ScoreRequest(self.next_request_id(), concept, sentence)
            for concept, sentence in pairs
        ]
        return [r.score for r in self.score_batch(requests)]

    @property
    def name(self) -> str:
        return f"bridge:{self.model_name}"

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        try:
            self._close_fn()
        except OSError:
            pass

    def __enter__(self) -> "BridgeClient":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def connect(
    endpoint: Sequence[str] | str,
    handshake_timeout: float = HANDSHAKE_TIMEOUT,
) -> BridgeClient:
    """Open a bridge connection.

    ``endpoint`` is either a subprocess command (list of argv strings, or
    a shell-style string) or ``"host:port"`` for TCP.
    """
    if isinstance(endpoint, str) and _looks_like_address(endpoint):
        return _connect_tcp(endpoint, handshake_timeout)
    return _connect_subprocess(endpoint, handshake_timeout)


def _looks_like_address(endpoint: str) -> bool:
    host, sep, port = endpoint.rpartition(":")
    return bool(sep) and bool(host) and port.isdigit() and "/" not in host and " " not in host


def _connect_tcp(address: str, handshake_timeout: float) -> BridgeClient:
    host, _, port = address.rpartition(":")
    try:
        sock = socket.create_connection((host, int(port)), timeout=handshake_timeout)
    except OSError as exc:
        raise ProtocolError(f"cannot connect to {address}: {exc}") from exc
    writer = sock.makefile("w", encoding="utf-8", newline="\n")
    reader = _LineReader(sock.makefile("r", encoding="utf-8"))

    def close() -> None:
        writer.close()
        sock.close()

    return BridgeClient(writer, reader, close, handshake_timeout)


def _connect_subprocess(
    command: Sequence[str] | str, handshake_timeout: float
) -> BridgeClient:
    argv = command.split() if isinstance(command, str) else list(command)
    try:
        proc = subprocess.Popen(
            argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            encoding="utf-8",
        )
    except OSError as exc:
        raise ProtocolError(f"cannot spawn scorer {argv!r}: {exc}") from exc
    reader = _LineReader(proc.stdout)

    def close() -> None:
        if proc.poll() is None:
            proc.terminate()
            try:
                proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                proc.kill()
        if proc.stdin:
            proc.stdin.close()

    return BridgeClient(proc.stdin, reader, close, handshake_timeout)


# ---------------------------------------------------------------------------
# Scripted mock server
# ---------------------------------------------------------------------------


def run_mock_server(script: dict, stdin, stdout) -> None:
    """Serve the wire protocol from a script object.

    Script keys (all optional):
      model: reported model name (default "mock")
      default: score for unmatched pairs (default 0.5)
      scores: list of {"concept", "sentence", "score"} overrides
      shuffle: buffer responses and flush them in seeded-shuffled order
               once stdin goes quiet (tests order reassembly)
      shuffle_seed: seed for the shuffle (default 1234)
      drop: list of request ids to never answer (timeout testing)
      extra_field: add a junk field to every response (conformance testing)
      bad_handshake: reply with a malformed handshake
    """
    import random

    overrides = {
        (e["concept"], e["sentence"]): e["score"] for e in script.get("scores", [])
    }
    default = script.get("default", 0.5)
    drop = set(script.get("drop", []))
    shuffle = bool(script.get("shuffle", False))
    extra_field = script.get("extra_field")
    rng = random.Random(script.get("shuffle_seed", 1234))

    def emit(obj: dict) -> None:
        stdout.write(json.dumps(obj) + "\n")
        stdout.flush()

    buffered: list[dict] = []

    def flush_buffer() -> None:
        rng.shuffle(buffered)
        for resp in buffered:
            emit(resp)
        buffered.clear()

    lines: queue.Queue[str | None] = queue.Queue()

    def pump() -> None:
        for line in stdin:
            lines.put(line)
        lines.put(None)

    threading.Thread(target=pump, daemon=True).start()

    while True:
        try:
            # With responses pending, poll so the buffer flushes shortly
            # after the client stops sending (there is no batch framing).
            item = lines.get(timeout=0.2) if buffered else lines.get()
        except queue.Empty:
            flush_buffer()
            continue
        if item is None:
            break
        line = item.strip()
        if not line:
            continue
        msg = json.loads(line)
        if "hello" in msg:
            if script.get("bad_handshake"):
                emit({"ready": False})
            else:
                emit({"ready": True, "model": script.get("model", "mock")})
            continue
        rid = msg["id"]
        if rid in drop:
            continue
        score = overrides.get((msg.get("concept"), msg.get("sentence")), default)
        resp = {"id": rid, "score": score}
        if extra_field is not None:
            resp["extra"] = extra_field
        if shuffle:
            buffered.append(resp)
        else:
            emit(resp)
    flush_buffer()
