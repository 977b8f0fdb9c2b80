"""Client side of the external model adapter protocol.

An adapter is a separate process exposing real face models. The wire
format is one JSON object per line on the adapter's standard streams:

    request:  {"id": <int>, "op": "detect"|"embed", "image_path": <str>}
    response: {"id": <int>, "label": 0|1}
              {"id": <int>, "vector": [<float>, ...]}
              {"id": <int>, "error": <str>}

Images travel by path through a shared scratch directory and are
content-addressed by their encoded bytes, which doubles as a response
cache: the same image is never sent to the same operation twice.

One client serves requests strictly serially. It may be moved between
threads but never used from two threads at once; parallel sweeps hold one
client per worker.
"""

from __future__ import annotations

import hashlib
import json
import os
import queue
import shutil
import subprocess
import tempfile
import threading

import numpy as np

from .detectors import DetectorVerdict, Embedding
from .io import encode_image
from .validation import check_image

DEFAULT_TIMEOUT_S = 30.0


class AdapterError(Exception):
    """Base class for bridge failures; never carries a fabricated verdict."""


class AdapterUnavailableError(AdapterError):
    """The adapter process is not running or its pipes are closed."""


class AdapterTimeoutError(AdapterError):
    """No response arrived in time. A timeout is not a verdict."""


class AdapterProtocolError(AdapterError):
    """The adapter answered, but not with a valid response."""


class AdapterRemoteError(AdapterError):
    """The adapter reported an error for this request."""


class AdapterClient:
    """Spawns and talks to one adapter process."""

    def __init__(self, command, scratch_dir=None, timeout_s: float = DEFAULT_TIMEOUT_S, expect_dim: int | None = None):
        self.command = list(command)
        self.timeout_s = float(timeout_s)
        self.expect_dim = expect_dim
        self._own_scratch = scratch_dir is None
        self.scratch_dir = scratch_dir or tempfile.mkdtemp(prefix="fringesim-scratch-")
        os.makedirs(self.scratch_dir, exist_ok=True)
        self._proc = None
        self._lines: queue.Queue = queue.Queue()
        self._reader = None
        self._next_id = 0
        self._cache: dict[tuple[str, str], object] = {}

    # -- lifecycle ----------------------------------------------------------

    def start(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            return
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            raise AdapterUnavailableError(f"cannot start adapter {self.command!r}: {exc}") from exc
        self._lines = queue.Queue()
        self._reader = threading.Thread(target=self._pump, args=(self._proc.stdout,), daemon=True)
        self._reader.start()

    def _pump(self, stream) -> None:
        for line in stream:
            self._lines.put(line)
        self._lines.put(None)

    def close(self) -> None:
        if self._proc is not None:
            try:
                if self._proc.stdin:
                    self._proc.stdin.close()
                self._proc.wait(timeout=5)
            except Exception:
                self._proc.kill()
            self._proc = None
        if self._own_scratch:
            shutil.rmtree(self.scratch_dir, ignore_errors=True)

    def __enter__(self) -> "AdapterClient":
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- protocol -----------------------------------------------------------

    def _stage_image(self, image) -> str:
        img = check_image(image)
        encoding = "pgm" if img.ndim == 2 else "ppm"
        blob = encode_image(img, encoding)
        digest = hashlib.sha256(blob).hexdigest()
        path = os.path.join(self.scratch_dir, f"{digest}.{encoding}")
        if not os.path.exists(path):
            with open(path, "wb") as fh:
                fh.write(blob)
        return path

    def _roundtrip(self, op: str, image_path: str) -> dict:
        self.start()
        self._next_id += 1
        req_id = self._next_id
        line = json.dumps({"id": req_id, "op": op, "image_path": image_path})
        try:
            self._proc.stdin.write(line + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError, ValueError) as exc:
            raise AdapterUnavailableError(f"adapter pipe closed: {exc}") from exc
        try:
            raw = self._lines.get(timeout=self.timeout_s)
        except queue.Empty:
            raise AdapterTimeoutError(f"no response to request {req_id} within {self.timeout_s} s") from None
        if raw is None:
            raise AdapterUnavailableError("adapter process ended its output stream")
        try:
            resp = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise AdapterProtocolError(f"response is not valid JSON: {raw!r}") from exc
        if not isinstance(resp, dict) or resp.get("id") != req_id:
            raise AdapterProtocolError(
                f"response id {resp.get('id') if isinstance(resp, dict) else resp!r} "
                f"does not match request id {req_id}"
            )
        if "error" in resp:
            raise AdapterRemoteError(str(resp["error"]))
        return resp

    def _request(self, op: str, image):
        path = self._stage_image(image)
        key = (op, os.path.basename(path))
        if key in self._cache:
            return self._cache[key]
        resp = self._roundtrip(op, path)
        if op == "detect":
            label = resp.get("label")
            if label not in (0, 1):
                raise AdapterProtocolError(f"detect response needs label 0|1, got {resp!r}")
            value: object = int(label)
        else:
            vector = resp.get("vector")
            if not isinstance(vector, list) or not vector:
                raise AdapterProtocolError(f"embed response needs a non-empty vector, got {resp!r}")
            arr = np.asarray(vector, dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise AdapterProtocolError("embed response vector has non-finite entries")
            if self.expect_dim is not None and arr.size != self.expect_dim:
                raise AdapterProtocolError(
                    f"embed response has length {arr.size}, expected {self.expect_dim}"
                )
            value = Embedding(arr)
        self._cache[key] = value
        return value

    # -- oracle surface -----------------------------------------------------

    def predict(self, image) -> int:
        return self._request("detect", image)

    def verdict(self, image) -> DetectorVerdict:
        return DetectorVerdict(self._request("detect", image))

    def embed(self, image) -> Embedding:
        return self._request("embed", image)
