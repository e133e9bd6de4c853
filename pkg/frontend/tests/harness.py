"""Test harness: a live review service with a pipeline parked at a gate.

Seeds a workspace, runs stage 1 against a local scripted chat endpoint,
starts the review service on a free port, then launches a stage-2 run
(combined feedback, every iteration, two papers) that blocks on its first
review gate. Prints one JSON line {"port": ..., "run_id": ...} when ready and
stays alive until killed, so an out-of-process client can drive the whole
feedback loop over plain HTTP.

Usage: python3 harness.py <workdir>
"""

import json
import sys
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import uvicorn

from schemaloom.corpus import CorpusRole, load_corpus
from schemaloom.gateway import ModelConfig
from schemaloom.pipeline import RunContext, StoreGate, run_stage1, run_stage2
from schemaloom.prompts import default_templates
from schemaloom.runstate import Cadence, FeedbackChannel, FeedbackMode
from schemaloom.service import create_app
from schemaloom.store import SnapshotStore

RUN_ID = "ui-run"

SCHEMAS = [
    '{"type":"object","properties":{"temperature":{"type":"number","description":"reactor temperature"}}}',
    '{"type":"object","properties":{"temperature":{"type":"number"},"pressure":{"type":"number"}}}',
    '{"type":"object","properties":{"temperature":{"type":"number"},"pressure":{"type":"number"},'
    '"thickness":{"type":"number"}}}',
]


class ScriptedChat(BaseHTTPRequestHandler):
    script: list[str] = []

    def do_POST(self):
        self.rfile.read(int(self.headers.get("Content-Length") or 0))
        text = self.script.pop(0) if len(self.script) > 1 else self.script[0]
        body = json.dumps({
            "choices": [{"message": {"role": "assistant", "content": text},
                         "finish_reason": "stop"}],
        }).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


def main() -> None:
    workdir = Path(sys.argv[1])
    (workdir / "stage-1").mkdir(parents=True, exist_ok=True)
    (workdir / "stage-1" / "spec.txt").write_text("the specification")
    papers = workdir / "stage-2"
    papers.mkdir(exist_ok=True)
    for i in range(2):
        (papers / f"paper-{i}.txt").write_text(f"curated paper {i}")

    ScriptedChat.script = list(SCHEMAS)
    chat = ThreadingHTTPServer(("127.0.0.1", 0), ScriptedChat)
    threading.Thread(target=chat.serve_forever, daemon=True).start()

    store = SnapshotStore(workdir / "runs")
    ctx = RunContext(
        store=store,
        model=ModelConfig(
            base_url=f"http://127.0.0.1:{chat.server_address[1]}",
            api_key="k",
            model_name="scripted",
            retry_base_delay=0.01,
        ),
        templates=default_templates(),
        sleep=lambda s: None,
    )
    spec = load_corpus(workdir / "stage-1", CorpusRole.SPECIFICATION)
    s1 = run_stage1(ctx, spec, run_id=RUN_ID)

    app = create_app(store.root)
    config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="error")
    server = uvicorn.Server(config)
    threading.Thread(target=server.run, daemon=True).start()
    while not server.started:
        time.sleep(0.02)
    port = server.servers[0].sockets[0].getsockname()[1]

    curated = load_corpus(papers, CorpusRole.CURATED)
    mode = FeedbackMode(FeedbackChannel.COMBINED, Cadence.EVERY_ITERATION)
    gate = StoreGate(store, poll_interval=0.05, timeout=120)

    def run_stage() -> None:
        run_stage2(ctx, s1, curated, mode, gate)
        print(json.dumps({"event": "stage2-complete"}), flush=True)

    threading.Thread(target=run_stage, daemon=True).start()

    print(json.dumps({"port": port, "run_id": RUN_ID}), flush=True)
    while True:
        time.sleep(0.5)


if __name__ == "__main__":
    main()
