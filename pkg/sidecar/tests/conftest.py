import json
import subprocess
import sys

import pytest


class SidecarProcess:
    """Minimal client for the line protocol, independent of any client
    library: one JSON request per line in, one response per line out."""

    def __init__(self, *args):
        self.proc = subprocess.Popen(
            [sys.executable, "-m", "lexsum_sidecar", *args],
            stdin=subprocess.PIPE, stdout=subprocess.PIPE, stderr=subprocess.PIPE,
            text=True, encoding="utf-8", bufsize=1)
        ready_raw = self.proc.stdout.readline()
        if not ready_raw:
            raise RuntimeError(f"no ready line; stderr: {self.proc.stderr.read()}")
        self.ready = json.loads(ready_raw)
        self._next_id = 1

    def send_raw(self, line: str) -> None:
        self.proc.stdin.write(line + "\n")
        self.proc.stdin.flush()

    def read_response(self) -> dict:
        line = self.proc.stdout.readline()
        if not line:
            raise RuntimeError("sidecar closed its stdout")
        return json.loads(line)

    def request(self, op: str, payload: dict, request_id: int | None = None) -> dict:
        if request_id is None:
            request_id = self._next_id
            self._next_id += 1
        self.send_raw(json.dumps({"id": request_id, "op": op, "payload": payload},
                                 ensure_ascii=False))
        return self.read_response()

    def result(self, op: str, payload: dict) -> dict:
        response = self.request(op, payload)
        assert "error" not in response, response
        return response["result"]

    def alive(self) -> bool:
        return self.proc.poll() is None

    def close(self) -> None:
        if self.proc.poll() is None:
            self.proc.stdin.close()
            try:
                self.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.proc.kill()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


@pytest.fixture
def sidecar():
    process = SidecarProcess()
    yield process
    process.close()
