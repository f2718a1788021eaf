"""Serve an environment to out-of-process agents, one JSON object per line.

Requests: {"op": "reset"|"step"|"mask"|"spec"|"close", "seed"?: int,
"action"?: [int, ...]}. Every request gets exactly one response with the
fixed key set {"ok", "obs", "reward", "done", "mask", "info", "error"?}.
Floats are serialised with full round-trip precision so a remote replay is
comparable to an in-process run at 1e-12.
"""
from __future__ import annotations

import json
import socket
from typing import Callable, Optional

from .env import Observation, VppEnv

PROTOCOL_OPS = ("reset", "step", "mask", "spec", "close")


def _obs_payload(obs: Optional[Observation]) -> Optional[dict]:
    return None if obs is None else obs.as_dict()


def _mask_payload(env: VppEnv) -> list:
    return [[bool(v) for v in row] for row in env.action_mask()]


class BridgeSession:
    """One environment behind a sequential request/response loop."""

    def __init__(self, env_factory: Callable[[], VppEnv]):
        self._env_factory = env_factory
        self._env: Optional[VppEnv] = None
        self._done = True
        self.closed = False

    def _response(self, **overrides) -> dict:
        base = {
            "ok": True,
            "obs": None,
            "reward": None,
            "done": None,
            "mask": None,
            "info": None,
        }
        base.update(overrides)
        return base

    def _error(self, message: str) -> dict:
        return self._response(ok=False, error=message)

    def handle_line(self, line: str) -> dict:
        try:
            request = json.loads(line)
        except json.JSONDecodeError as exc:
            return self._error(f"malformed message: {exc}")
        if not isinstance(request, dict) or "op" not in request:
            return self._error("request must be an object with an 'op' field")
        op = request["op"]
        if op not in PROTOCOL_OPS:
            return self._error(f"unknown op {op!r}")
        try:
            return getattr(self, f"_op_{op}")(request)
        except Exception as exc:  # protocol errors never kill the session
            return self._error(f"{type(exc).__name__}: {exc}")

    def _require_env(self) -> VppEnv:
        if self._env is None:
            self._env = self._env_factory()
        return self._env

    def _op_spec(self, request: dict) -> dict:
        env = self._require_env()
        return self._response(info=env.spec())

    def _op_reset(self, request: dict) -> dict:
        if "seed" not in request:
            return self._error("reset requires a 'seed' field")
        env = self._require_env()
        obs = env.reset(int(request["seed"]))
        self._done = False
        return self._response(
            obs=_obs_payload(obs),
            reward=0.0,
            done=False,
            mask=_mask_payload(env),
            info={},
        )

    def _op_step(self, request: dict) -> dict:
        if self._env is None or self._done:
            return self._error("no active episode: send reset first")
        if "action" not in request:
            return self._error("step requires an 'action' field")
        result = self._env.step(request["action"])
        self._done = result.done
        return self._response(
            obs=_obs_payload(result.observation),
            reward=result.reward,
            done=result.done,
            mask=_mask_payload(self._env),
            info=result.info,
        )

    def _op_mask(self, request: dict) -> dict:
        if self._env is None:
            return self._error("no environment yet: send reset first")
        return self._response(mask=_mask_payload(self._env))

    def _op_close(self, request: dict) -> dict:
        self.closed = True
        return self._response()


def serve_streams(env_factory: Callable[[], VppEnv], reader, writer) -> None:
    """Run one session over text streams until close or end of input."""
    session = BridgeSession(env_factory)
    for line in reader:
        if not line.strip():
            continue
        response = session.handle_line(line)
        writer.write(json.dumps(response) + "\n")
        writer.flush()
        if session.closed:
            break


def serve_stdio(env_factory: Callable[[], VppEnv]) -> None:
    import sys

    serve_streams(env_factory, sys.stdin, sys.stdout)


def _announce(message: str) -> None:
    print(message, flush=True)  # callers read the port through a pipe


def serve_socket(env_factory: Callable[[], VppEnv], port: int, host: str = "127.0.0.1",
                 announce=_announce, max_sessions: Optional[int] = None) -> None:
    """Accept connections sequentially, one fresh environment per session."""
    with socket.create_server((host, port)) as server:
        announce(f"listening on {server.getsockname()[1]}")
        served = 0
        while max_sessions is None or served < max_sessions:
            conn, _ = server.accept()
            with conn:
                reader = conn.makefile("r", encoding="utf-8")
                writer = conn.makefile("w", encoding="utf-8")
                serve_streams(env_factory, reader, writer)
            served += 1
