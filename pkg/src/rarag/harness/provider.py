"""JSON-lines provider protocol for external answer sources.

Request, one JSON object per line::

    {"query_id": 17, "query_text": "who ...?", "source_id": 3}

Reply::

    {"answer": "senators", "alignment_score": 0.93}

``answer`` may be ``null`` (IDK). An optional ``canonical_id`` string names
the answer's equivalence class; without it the answer text itself is used.
Anything else (bad JSON, missing fields, a score outside [0, 1], a timeout)
is a provider failure, never an IDK.
"""
from __future__ import annotations

import json
import math
import queue
import subprocess
import sys
import threading
import urllib.error
import urllib.request
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from ..errors import ProviderFailure
from ..selection import ProviderReply, kappa_rrss, kappa_rss
from ..simulation import SourceWorld, query_text
from ..types import IDK, Answer, AnswerKind

QueryText = Callable[[int], str]


def encode_request(query_id, query_text: str, source_id: int) -> str:
    return json.dumps({"query_id": query_id, "query_text": query_text, "source_id": source_id}) + "\n"


def parse_reply(line: str | bytes | dict, source_id: int) -> ProviderReply:
    """Validate one reply; raise :class:`ProviderFailure` on any defect."""
    try:
        obj = line if isinstance(line, dict) else json.loads(line)
    except (ValueError, UnicodeDecodeError) as exc:
        raise ProviderFailure(source_id, f"malformed reply: {exc}") from None
    if not isinstance(obj, dict) or "answer" not in obj or "alignment_score" not in obj:
        raise ProviderFailure(source_id, f"reply lacks answer/alignment_score: {obj!r}")
    answer, score = obj["answer"], obj["alignment_score"]
    if isinstance(score, bool) or not isinstance(score, (int, float)) or not math.isfinite(score):
        raise ProviderFailure(source_id, f"alignment_score is not a number: {score!r}")
    if not 0.0 <= score <= 1.0:
        raise ProviderFailure(source_id, f"alignment_score {score} outside [0, 1]")
    if answer is None:
        return ProviderReply(IDK, float(score))
    if not isinstance(answer, str):
        raise ProviderFailure(source_id, f"answer must be a string or null: {answer!r}")
    cid = obj.get("canonical_id", answer)
    if not isinstance(cid, str):
        raise ProviderFailure(source_id, f"canonical_id must be a string: {cid!r}")
    return ProviderReply(Answer(AnswerKind.TEXT, cid, answer), float(score))


def encode_reply(answer: Answer, score: float) -> dict:
    if answer.is_idk:
        return {"answer": None, "alignment_score": score}
    return {"answer": answer.surface, "alignment_score": score, "canonical_id": answer.canonical_id}


def _default_text(query_id) -> str:
    return str(query_id)


class JsonLinesProvider:
    """Talk to a child process over stdin/stdout, one request at a time."""

    def __init__(self, command: Sequence[str], n_sources: int, query_text: QueryText = _default_text,
                 timeout: float = 30.0):
        self.n_sources = n_sources
        self.query_text = query_text
        self.timeout = timeout
        self._lock = threading.Lock()
        self._lines: queue.Queue = queue.Queue()
        try:
            self._proc = subprocess.Popen(
                list(command), stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                text=True, encoding="utf-8", bufsize=1,
            )
        except OSError as exc:
            raise ProviderFailure(-1, f"cannot start provider {command!r}: {exc}") from None
        threading.Thread(target=self._pump, daemon=True).start()

    def _pump(self):
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def probe(self, query_id, source_id: int) -> ProviderReply:
        with self._lock:
            try:
                self._proc.stdin.write(encode_request(query_id, self.query_text(query_id), source_id))
                self._proc.stdin.flush()
            except (OSError, ValueError) as exc:
                raise ProviderFailure(source_id, f"provider pipe closed: {exc}") from None
            try:
                line = self._lines.get(timeout=self.timeout)
            except queue.Empty:
                raise ProviderFailure(source_id, f"no reply within {self.timeout}s") from None
            if line is None:
                raise ProviderFailure(source_id, "provider exited")
            return parse_reply(line, source_id)

    def close(self):
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class HttpProvider:
    """POST one JSON request per probe; at most ``max_in_flight`` at once."""

    def __init__(self, url: str, n_sources: int, query_text: QueryText = _default_text,
                 timeout: float = 30.0, max_in_flight: int = 4):
        self.url = url
        self.n_sources = n_sources
        self.query_text = query_text
        self.timeout = timeout
        self._slots = threading.BoundedSemaphore(max_in_flight)

    def probe(self, query_id, source_id: int) -> ProviderReply:
        body = encode_request(query_id, self.query_text(query_id), source_id).encode("utf-8")
        req = urllib.request.Request(self.url, data=body, headers={"Content-Type": "application/json"})
        with self._slots:
            try:
                with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    payload = resp.read()
            except (urllib.error.URLError, OSError, ValueError) as exc:
                raise ProviderFailure(source_id, f"HTTP error: {exc}") from None
        return parse_reply(payload, source_id)

    def close(self):
        pass


def infer_many(query_ids, v, kappa: int, provider, tau: float, selection: str = "rrss", max_in_flight: int = 1):
    """Run several queries concurrently; results come back in input order."""
    fn = kappa_rrss if selection == "rrss" else kappa_rss

    def one(q):
        return fn(q, v, kappa, provider, tau)

    if max_in_flight <= 1:
        return [one(q) for q in query_ids]
    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        return list(pool.map(one, query_ids))


# ---------------------------------------------------------------- serving a simulated world


def handle_request(world: SourceWorld, line: str) -> dict:
    try:
        req = json.loads(line)
        qid = int(req["query_id"])
        sid = int(req["source_id"])
        if not 0 <= sid < world.n_sources or qid < 0:
            raise ValueError("id out of range")
    except (ValueError, KeyError, TypeError) as exc:
        return {"error": f"bad request: {exc}"}
    rec = world.generate_response(sid, qid)
    return encode_reply(rec.raw_answer, rec.alignment_score)


def serve_stdio(world: SourceWorld, stdin=None, stdout=None) -> None:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    for line in stdin:
        if not line.strip():
            continue
        stdout.write(json.dumps(handle_request(world, line)) + "\n")
        stdout.flush()


def make_http_server(world: SourceWorld, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            length = int(self.headers.get("Content-Length", 0))
            reply = json.dumps(handle_request(world, self.rfile.read(length).decode("utf-8")))
            data = reply.encode("utf-8")
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def log_message(self, *args):
            pass

    return ThreadingHTTPServer((host, port), Handler)


__all__ = [
    "HttpProvider",
    "JsonLinesProvider",
    "encode_reply",
    "encode_request",
    "handle_request",
    "infer_many",
    "make_http_server",
    "parse_reply",
    "query_text",
    "serve_stdio",
]
