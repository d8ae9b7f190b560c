"""Pseudo-terminal sessions for learner workspaces.

Each session is a full-duplex byte channel over a real pty, so pagers,
terminal editors, and interactive rebase behave exactly as on a local
machine. Output bytes stream to a callback; a quiescence detector fires
once output has settled after a newline was typed, which is the trigger
for re-extracting repository state.
"""

from __future__ import annotations

import fcntl
import os
import pty
import secrets
import select
import signal
import struct
import subprocess
import termios
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

from ..errors import SessionClosed

OutputCallback = Callable[[bytes], None]
VoidCallback = Callable[[], None]

DEFAULT_DEBOUNCE = 0.3


@dataclass(frozen=True)
class TerminalDims:
    cols: int = 80
    rows: int = 24


class TerminalSession:
    def __init__(
        self,
        workspace_id: str,
        cwd: Path,
        env: dict,
        dims: TerminalDims = TerminalDims(),
        on_output: Optional[OutputCallback] = None,
        on_quiescence: Optional[VoidCallback] = None,
        on_close: Optional[VoidCallback] = None,
        debounce: float = DEFAULT_DEBOUNCE,
        preexec_extra: Optional[Callable[[], None]] = None,
        shell: Optional[list[str]] = None,
        session_id: Optional[str] = None,
    ):
        if dims.cols <= 0 or dims.rows <= 0:
            raise ValueError("terminal dimensions must be positive")
        self.workspace_id = workspace_id
        self.session_id = session_id or secrets.token_hex(8)
        self.dims = dims
        self._on_output = on_output or (lambda data: None)
        self._on_quiescence = on_quiescence or (lambda: None)
        self._on_close = on_close or (lambda: None)
        self._debounce = debounce
        self._lock = threading.Lock()
        self._closed = False
        self._close_emitted = False
        self._pending_snapshot = False
        self._last_activity = time.monotonic()

        master, slave = pty.openpty()
        self._master = master
        _set_winsize(master, dims)

        def _preexec():
            os.setsid()
            fcntl.ioctl(0, termios.TIOCSCTTY, 0)
            if preexec_extra:
                preexec_extra()

        argv = shell or ["bash", "--norc", "--noprofile", "-i"]
        self._proc = subprocess.Popen(
            argv,
            stdin=slave,
            stdout=slave,
            stderr=slave,
            cwd=str(cwd),
            env=env,
            preexec_fn=_preexec,
            close_fds=True,
        )
        os.close(slave)

        self._stop = threading.Event()
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._monitor = threading.Thread(target=self._quiescence_loop, daemon=True)
        self._reader.start()
        self._monitor.start()

    # --- public API ---------------------------------------------------

    @property
    def closed(self) -> bool:
        return self._closed

    def write(self, data: bytes) -> None:
        """Deliver input bytes to the pty in call order."""
        if not data:
            return
        with self._lock:
            if self._closed:
                raise SessionClosed(f"terminal {self.session_id} is closed")
            try:
                os.write(self._master, data)
            except OSError as exc:
                self._mark_closed()
                raise SessionClosed(f"terminal {self.session_id} is closed") from exc
            self._last_activity = time.monotonic()
            if b"\n" in data or b"\r" in data:
                self._pending_snapshot = True

    def resize(self, dims: TerminalDims) -> None:
        if dims.cols <= 0 or dims.rows <= 0:
            raise ValueError("terminal dimensions must be positive")
        with self._lock:
            if self._closed:
                raise SessionClosed(f"terminal {self.session_id} is closed")
            self.dims = dims
            _set_winsize(self._master, dims)

    def close(self) -> None:
        """Terminate the shell and release the pty. Idempotent."""
        with self._lock:
            if self._closed:
                return
            self._closed = True
        self._stop.set()
        try:
            os.killpg(self._proc.pid, signal.SIGHUP)
        except (ProcessLookupError, PermissionError):
            pass
        try:
            self._proc.wait(timeout=2)
        except subprocess.TimeoutExpired:
            try:
                os.killpg(self._proc.pid, signal.SIGKILL)
            except (ProcessLookupError, PermissionError):
                pass
            self._proc.wait(timeout=2)
        if threading.current_thread() is not self._reader:
            self._reader.join(timeout=2)
        if threading.current_thread() is not self._monitor:
            self._monitor.join(timeout=2)
        try:
            os.close(self._master)
        except OSError:
            pass
        self._emit_close()

    # --- internals ------------------------------------------------------

    def _mark_closed(self) -> None:
        self._closed = True
        self._stop.set()

    def _emit_close(self) -> None:
        with self._lock:
            if self._close_emitted:
                return
            self._close_emitted = True
        self._on_close()

    def _read_loop(self) -> None:
        while not self._stop.is_set():
            try:
                ready, _, _ = select.select([self._master], [], [], 0.05)
            except OSError:
                break
            if not ready:
                continue
            try:
                data = os.read(self._master, 8192)
            except OSError:
                break
            if not data:
                break
            self._last_activity = time.monotonic()
            self._on_output(data)
        if not self._closed:
            # the shell exited on its own
            self._mark_closed()
            self._proc.poll()
            self._emit_close()

    def _quiescence_loop(self) -> None:
        interval = max(self._debounce / 4, 0.01)
        while not self._stop.is_set():
            time.sleep(interval)
            if not self._pending_snapshot:
                continue
            if time.monotonic() - self._last_activity >= self._debounce:
                self._pending_snapshot = False
                try:
                    self._on_quiescence()
                except Exception:
                    # state refresh failures must not kill the watcher
                    pass


def _set_winsize(fd: int, dims: TerminalDims) -> None:
    packed = struct.pack("HHHH", dims.rows, dims.cols, 0, 0)
    fcntl.ioctl(fd, termios.TIOCSWINSZ, packed)
