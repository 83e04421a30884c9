"""Shared test helpers: record factories, WAV writer, canned-response server."""
import json
import threading
import wave
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from sounddiff.store import SampleRecord


def make_records(rng, n, dim, machine_type="pump", machine_id="id_00",
                 label="normal", split="train", prefix="s"):
    return [
        SampleRecord(
            sample_id=f"{prefix}{i:04d}",
            machine_type=machine_type,
            machine_id=machine_id,
            label=label,
            split=split,
            source_path=f"/data/{prefix}{i:04d}.wav",
            embedding=rng.standard_normal(dim).astype(np.float32),
        )
        for i in range(n)
    ]


def write_wav(path: Path, seconds=0.05, rate=16000, freq=440.0):
    """Tiny valid 16-bit PCM mono WAV."""
    t = np.arange(int(rate * seconds)) / rate
    pcm = (np.sin(2 * np.pi * freq * t) * 12000).astype("<i2")
    path.parent.mkdir(parents=True, exist_ok=True)
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(rate)
        fh.writeframes(pcm.tobytes())


class _PlaybackHandler(BaseHTTPRequestHandler):
    """Serves canned JSON responses keyed by (method, path)."""

    server_version = "playback/1"

    def _respond(self):
        self.server.requests.append((self.command, self.path))
        key = (self.command, self.path)
        status, payload = self.server.responses.get(key, (404, {"error": "no fixture"}))
        if callable(payload):
            length = int(self.headers.get("Content-Length", 0))
            body = json.loads(self.rfile.read(length) or b"{}")
            status, payload = payload(body)
        data = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    do_GET = _respond
    do_POST = _respond

    def log_message(self, *args):
        pass


class PlaybackServer:
    def __init__(self):
        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), _PlaybackHandler)
        self.httpd.responses = {}
        self.httpd.requests = []
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()

    @property
    def base_url(self):
        return f"http://127.0.0.1:{self.httpd.server_address[1]}"

    @property
    def requests(self):
        return self.httpd.requests

    def on(self, method, path, payload, status=200):
        self.httpd.responses[(method, path)] = (status, payload)

    def close(self):
        self.httpd.shutdown()
        self.httpd.server_close()
