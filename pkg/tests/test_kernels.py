from __future__ import annotations

import numpy as np
import pytest

from ipgsim import dynamics
from ipgsim.kernels import BACKEND, BACKENDS, make_kernel
from oracles import random_game, random_instance

needs_ext = pytest.mark.skipif("cython" not in BACKENDS, reason="compiled extension not built")


def _cases(rng, n=12):
    for t in range(n):
        spec = random_game(rng, 1 + t % 3, 10, movers=t % 2 == 0)
        x0, U = random_instance(rng, spec)
        # push some controls and speeds onto their bounds
        U[::4] = np.clip(U[::4] * 4, -2, 2)
        yield spec, x0, U.reshape(U.shape[0], -1)


def test_active_backend_is_known():
    assert BACKEND in BACKENDS


def test_python_rollout_matches_dynamics(rng):
    for spec, x0, Uf in _cases(rng):
        xs = make_kernel(spec.packed, "python").rollout(x0.reshape(-1), Uf)
        ref = dynamics.rollout(x0, Uf.reshape(Uf.shape[0], -1, 2), spec.Ts,
                               [p.v_lo for p in spec.params], [p.v_hi for p in spec.params])
        assert np.array_equal(xs, ref.reshape(xs.shape))


@needs_ext
def test_backends_agree(rng):
    for spec, x0, Uf in _cases(rng):
        py, cy = BACKENDS["python"](spec.packed), BACKENDS["cython"](spec.packed)
        xs = py.rollout(x0.reshape(-1), Uf)
        assert np.array_equal(xs, cy.rollout(x0.reshape(-1), Uf))
        assert cy.cost(xs, Uf) == pytest.approx(py.cost(xs, Uf), rel=1e-12)
        for a, b in zip(py.quadratize(xs, Uf), cy.quadratize(xs, Uf)):
            np.testing.assert_allclose(b, a, rtol=1e-10, atol=1e-9)
        bp, bc = py.backward(xs, Uf, 1e-3), cy.backward(xs, Uf, 1e-3)
        assert (bp is None) == (bc is None)
        if bp is not None:
            for a, b in zip(bp, bc):
                np.testing.assert_allclose(b, a, rtol=1e-8, atol=1e-8 * (1 + np.abs(a).max()))
            fp = py.forward(xs, Uf, bp[0], bp[1], 0.5)
            fc = cy.forward(xs, Uf, bp[0], bp[1], 0.5)
            for a, b in zip(fp, fc):
                np.testing.assert_allclose(b, a, rtol=1e-12, atol=1e-12)


def test_held_controls_get_zero_gains():
    from ipgsim.costs import AgentParams, GameSpec

    # goal far ahead: the gradient asks for more acceleration than the box allows
    spec = GameSpec(params=(AgentParams(goal=(50.0, 3.0)),), d_safe=np.zeros((1, 1)), horizon=6)
    Uf = np.tile([2.0, 0.0], (6, 1))
    for name in BACKENDS:
        ker = make_kernel(spec.packed, name)
        xs = ker.rollout(np.array([0.0, 0.0, 0.0, 0.5]), Uf)
        ks, Ks, dV = ker.backward(xs, Uf, 1e-6)
        # early steps want more thrust and are held; late ones want to slow down and are free
        assert np.all(ks[:3, 0] == 0.0) and np.all(Ks[:3, 0] == 0.0)
        assert np.all(ks[3:, 0] < 0.0)
        assert np.all(ks[:5, 1] > 0.0)  # steering toward the goal stays free
        assert dV[0] < 0
