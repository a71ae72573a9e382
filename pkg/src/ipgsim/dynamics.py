"""Discrete-time unicycle model.

An agent state is ``[px, py, theta, v]`` and a control is ``[a, w]``
(acceleration, angular rate). Joint states are ``(N, 4)`` arrays and joint
control sequences are ``(T, N, 2)`` arrays; agent order never changes.
"""

from __future__ import annotations

import math

import numpy as np

TS = 0.1
V_MIN, V_MAX = -1.5, 2.0
A_MIN, A_MAX = -2.0, 2.0
W_MIN, W_MAX = -2.0, 2.0

NX, NU = 4, 2


class NonFiniteStateError(ValueError):
    """Raised when a state or control contains NaN or inf."""


def _check_finite(*arrays) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFiniteStateError(f"non-finite values in {np.asarray(a)!r}")


def step(x, u, Ts: float = TS, v_min: float = V_MIN, v_max: float = V_MAX) -> np.ndarray:
    """Explicit Euler update of one agent; speed is clamped to ``[v_min, v_max]``."""
    if not Ts > 0:
        raise ValueError(f"Ts must be positive, got {Ts}")
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    _check_finite(x, u)
    px, py, th, v = x
    a, w = u
    v_next = min(max(v + Ts * a, v_min), v_max)
    return np.array([px + Ts * v * math.cos(th), py + Ts * v * math.sin(th), th + Ts * w, v_next])


def rollout(x0, U, Ts: float = TS, v_min=V_MIN, v_max=V_MAX) -> np.ndarray:
    """Simulate a joint control sequence; returns ``(T + 1, N, 4)`` with ``xs[0] == x0``.

    Speed bounds may be scalars or per-agent arrays.
    """
    x0 = np.asarray(x0, dtype=float)
    U = np.asarray(U, dtype=float)
    if x0.ndim != 2 or x0.shape[1] != NX:
        raise ValueError(f"joint state must be (N, 4), got {x0.shape}")
    if U.ndim != 3 or U.shape[1:] != (x0.shape[0], NU):
        raise ValueError(f"plan shape {U.shape} does not match {x0.shape[0]} agents")
    n = x0.shape[0]
    vlo = np.broadcast_to(np.asarray(v_min, dtype=float), (n,))
    vhi = np.broadcast_to(np.asarray(v_max, dtype=float), (n,))
    xs = np.empty((U.shape[0] + 1, *x0.shape))
    xs[0] = x0
    for k in range(U.shape[0]):
        for i in range(n):
            xs[k + 1, i] = step(xs[k, i], U[k, i], Ts, vlo[i], vhi[i])
    return xs


def linearize(x, u, Ts: float = TS) -> tuple[np.ndarray, np.ndarray]:
    """Jacobians ``(A, B)`` of :func:`step`, treating the speed clamp as inactive."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    _check_finite(x, u)
    _, _, th, v = x
    c, s = math.cos(th), math.sin(th)
    A = np.eye(NX)
    A[0, 2] = -Ts * v * s
    A[0, 3] = Ts * c
    A[1, 2] = Ts * v * c
    A[1, 3] = Ts * s
    B = np.zeros((NX, NU))
    B[2, 1] = Ts
    B[3, 0] = Ts
    return A, B
