"""Shared test utilities: random schema generation and local mock servers."""

from __future__ import annotations

import json
import random
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

_NAMES = [
    "precursor", "coReactant", "temperature", "pressure", "growthPerCycle",
    "filmProperties", "uniformity", "roughness", "density", "substrate",
    "pulseTime", "purgeTime", "reactor", "thickness", "crystallinity",
    "carrier_gas", "flow_rate", "cycleCount", "morphology", "composition",
]

_WORDS = [
    "deposition", "cycle", "film", "surface", "reaction", "growth", "layer",
    "measured", "value", "average", "per", "substrate", "plasma", "thermal",
    "process", "chamber", "gas", "nominal", "target",
]

_UNITS = ["Celsius", "pascal", "nm", "nm/cycle", "s", "sccm"]


def random_description(rng: random.Random) -> str:
    return " ".join(rng.choice(_WORDS) for _ in range(rng.randint(2, 7)))


def random_schema_dict(rng: random.Random, depth: int = 3, names: list[str] | None = None) -> dict:
    """Build a random but valid raw schema dict with an object root."""
    node = _random_node(rng, depth, force="object", names=names or _NAMES)
    if "properties" not in node:
        node["properties"] = {}
    return node


def _random_node(rng: random.Random, depth: int, force: str | None = None,
                 names: list[str] | None = None) -> dict:
    names = names or _NAMES
    kinds = ["string", "number", "integer", "boolean"]
    if depth > 0:
        kinds += ["object", "object", "array"]
    kind = force or rng.choice(kinds)
    node: dict = {"type": kind}
    if rng.random() < 0.7:
        node["description"] = random_description(rng)
    if kind in ("number", "integer"):
        if rng.random() < 0.4:
            node["unit"] = rng.choice(_UNITS)
        if rng.random() < 0.2:
            lo, hi = sorted(rng.sample(range(0, 500), 2))
            node["minimum"], node["maximum"] = lo, hi
    if kind == "string" and rng.random() < 0.15:
        node["enum"] = rng.sample(_WORDS, rng.randint(1, 3))
    if rng.random() < 0.15:
        node["x-note"] = rng.choice(_WORDS)
    if kind == "object":
        chosen = rng.sample(names, rng.randint(0, min(4, len(names))))
        node["properties"] = {n: _random_node(rng, depth - 1, names=names) for n in chosen}
        if chosen and rng.random() < 0.4:
            node["required"] = sorted(rng.sample(chosen, rng.randint(1, len(chosen))))
    if kind == "array":
        node["items"] = _random_node(rng, depth - 1, names=names)
    return node


def random_schema_text(rng: random.Random, depth: int = 3, names: list[str] | None = None) -> str:
    return json.dumps(random_schema_dict(rng, depth, names))


# ---------------------------------------------------------------------------
# Scriptable HTTP mock servers


class MockEndpoint:
    """A local HTTP server driven by a script of canned responses.

    ``script`` entries are dicts: {"status": int, "body": dict|str} consumed
    one per request; the last entry repeats once the script is exhausted.
    Every request is appended to ``request_log`` as
    {"method", "path", "query", "headers", "body"}.
    """

    def __init__(self, script=None, handler=None):
        self.script = list(script or [])
        self.handler = handler
        self.request_log: list[dict] = []
        self._lock = threading.Lock()

        outer = self

        class _Handler(BaseHTTPRequestHandler):
            def _serve(self):
                length = int(self.headers.get("Content-Length") or 0)
                raw = self.rfile.read(length) if length else b""
                try:
                    body = json.loads(raw) if raw else None
                except json.JSONDecodeError:
                    body = raw.decode("utf-8", "replace")
                path, _, query = self.path.partition("?")
                entry = {
                    "method": self.command,
                    "path": path,
                    "query": query,
                    "headers": {k.lower(): v for k, v in self.headers.items()},
                    "body": body,
                }
                with outer._lock:
                    outer.request_log.append(entry)
                    if outer.handler is not None:
                        response = outer.handler(entry)
                    elif outer.script:
                        response = outer.script.pop(0) if len(outer.script) > 1 else outer.script[0]
                    else:
                        response = {"status": 500, "body": {"error": "no script"}}
                status = response.get("status", 200)
                payload = response.get("body", {})
                if isinstance(payload, (dict, list)):
                    data = json.dumps(payload).encode()
                    ctype = "application/json"
                else:
                    data = str(payload).encode()
                    ctype = "text/plain"
                self.send_response(status)
                self.send_header("Content-Type", ctype)
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            do_GET = _serve
            do_POST = _serve

            def log_message(self, *args):
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address
        return f"http://{host}:{port}"

    def __enter__(self):
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self._server.shutdown()
        self._server.server_close()


def chat_response(text: str, finish_reason: str = "stop") -> dict:
    """OpenAI-style chat completion body wrapping ``text``."""
    return {
        "status": 200,
        "body": {
            "choices": [{"message": {"role": "assistant", "content": text}, "finish_reason": finish_reason}],
            "usage": {"prompt_tokens": 10, "completion_tokens": 5},
        },
    }


def chat_script(*texts: str) -> list[dict]:
    return [chat_response(t) for t in texts]


def embedding_handler(dim: int = 8):
    """MockEndpoint handler serving deterministic embeddings per text."""
    import hashlib

    def handler(entry):
        texts = entry["body"]["input"]
        data = []
        for i, text in enumerate(texts):
            seed = int.from_bytes(hashlib.sha256(text.encode()).digest()[:4], "big")
            rng = random.Random(seed)
            data.append({"index": i, "embedding": [rng.uniform(-1, 1) for _ in range(dim)]})
        return {"status": 200, "body": {"data": data}}

    return handler
