"""Shared game building blocks: dynamics, view-cone noise, boundary penalty."""

import math

import numpy as np

from pogplan import adgraph as ag
from pogplan.adgraph import Tape, grad_check
from pogplan.gamedef import (
    boundary_penalty,
    bearing_to,
    double_integrator_step,
    fov_observe,
    fov_variance,
)


def _arr(*rows):
    return np.asarray(rows, dtype=float)


def test_double_integrator_free_motion():
    # velocity far below the saturation bound passes through unchanged
    pos, vel = _arr([0.0, 0.0]), _arr([1.0, 0.0])
    new_pos, new_vel = double_integrator_step(pos, vel, _arr([0.0, 0.0]), v_max=1e6)
    np.testing.assert_allclose(new_pos, [[1.0, 0.0]], atol=1e-9)
    np.testing.assert_allclose(new_vel, [[1.0, 0.0]], atol=1e-9)


def test_double_integrator_velocity_saturates():
    pos, vel = _arr([0.0, 0.0]), _arr([0.2, -0.2])
    _, new_vel = double_integrator_step(pos, vel, _arr([50.0, -50.0]), v_max=0.3)
    assert np.max(np.abs(new_vel)) <= 0.3


def test_double_integrator_accel_gradient_near_one():
    # in the linear region d pos' / d accel is ~1 per axis (finite differences)
    def f(a):
        pos, vel = _arr([0.5, -0.2]), _arr([0.01, 0.02])
        new_pos, _ = double_integrator_step(pos, vel, a, v_max=0.3)
        return ag.asum(new_pos)

    h = 1e-6
    base = np.array([0.02, -0.01])
    for axis in range(2):
        hi, lo = base.copy(), base.copy()
        hi[axis] += h
        lo[axis] -= h
        slope = (float(np.asarray(f(hi[None]))) - float(np.asarray(f(lo[None])))) / (2 * h)
        assert abs(slope - 1.0) < 0.02


def test_fov_variance_branches():
    f = math.pi / 2
    base, cs = 0.01, 5.0
    inside = fov_variance(np.array([[0.0]]), f, base, cs)
    np.testing.assert_allclose(inside, [[base]], atol=1e-4)
    at_edge = fov_variance(np.array([[f / 2]]), f, base, cs)
    np.testing.assert_allclose(at_edge, [[base]], atol=1e-4)
    outside = fov_variance(np.array([[f / 2 + 1.0]]), f, base, cs)
    np.testing.assert_allclose(outside, [[base + cs]], rtol=1e-6)


def test_fov_variance_continuous_and_flat_inside():
    f = math.pi / 2
    sweep = np.linspace(-math.pi, math.pi, 4001).reshape(-1, 1)
    var = fov_variance(sweep, f, 0.01, 5.0)[:, 0]
    # continuity: adjacent samples stay close everywhere
    assert np.max(np.abs(np.diff(var))) < 5.0 * (2 * math.pi / 4000) * 1.1
    inside = np.abs(sweep[:, 0]) < f / 2 - 1e-3
    np.testing.assert_allclose(var[inside], 0.01, atol=1e-4)


def _two_player_state(p0, v0, p1, v1):
    return [(_arr(p0), _arr(v0)), (_arr(p1), _arr(v1))]


FOV_KW = dict(fov=math.pi / 2, sigma2_base=0.01, c_scale=5.0, play_radius=5.0)


def test_fov_observe_dead_ahead_zero_noise():
    # observer at origin heading +x, target straight ahead near the center:
    # zero noise gives the exact position (trim residual is negligible there)
    state = _two_player_state([0, 0], [0.3, 0], [0.02, 0.0], [0, 0])
    z = fov_observe(state, 0, 1, np.zeros((1, 2)), **FOV_KW)
    np.testing.assert_allclose(z, [[0.02, 0.0]], atol=1e-6)


def test_fov_observe_behind_has_eq4_variance():
    # target directly behind: |bearing| = pi, f = pi/2 -> base + c*(pi - pi/4)
    state = _two_player_state([0, 0], [0.3, 0], [-1.0, 0.0], [0, 0])
    pos_o, vel_o = state[0]
    bearing = bearing_to(pos_o, vel_o, state[1][0])
    var = fov_variance(bearing, math.pi / 2, 0.01, 5.0)
    np.testing.assert_allclose(var, [[0.01 + 5.0 * (math.pi - math.pi / 4)]], rtol=1e-5)


def test_fov_observe_trimmed_to_play_area():
    state = _two_player_state([0, 0], [0.3, 0], [4.9, 0.0], [0, 0])
    rng = np.random.default_rng(0)
    for _ in range(200):
        z = fov_observe(state, 0, 1, rng.normal(size=(1, 2)) * 3, **FOV_KW)
        assert np.all(np.abs(z) <= 5.0)


def test_boundary_penalty_values_and_monotonicity():
    lam = 10.0
    deep = boundary_penalty(np.zeros((1, 2)), 15.0, lam)  # softplus(-r)^2 -> 0 deep inside
    assert deep.item() < 1e-6 * lam

    one_out = boundary_penalty(_arr([6.0, 0.0]), 5.0, lam)
    closed_form = lam * math.log(1 + math.e) ** 2  # softplus(1)^2 ~ 1.73
    np.testing.assert_allclose(one_out.item(), closed_form, atol=1e-6)
    assert abs(closed_form / lam - 1.73) < 0.01

    rng = np.random.default_rng(1)
    for _ in range(200):
        r1, r2 = sorted(rng.uniform(0, 10, size=2))
        direction = rng.normal(size=2)
        direction /= np.linalg.norm(direction)
        p1 = boundary_penalty(_arr(direction * r1), 5.0, lam)
        p2 = boundary_penalty(_arr(direction * r2), 5.0, lam)
        assert p2.item() >= p1.item() - 1e-12


def test_blocks_pass_grad_check():
    rng = np.random.default_rng(2)
    worst = 0.0

    def f_step(x):
        pos, vel, acc = ag.slice_last(x, 0, 2), ag.slice_last(x, 2, 4), ag.slice_last(x, 4, 6)
        p, v = double_integrator_step(pos, vel, acc, v_max=0.3)
        return ag.add(ag.asum(ag.square(p)), ag.asum(ag.mul(v, v)))

    def f_obs(x):
        state = [(ag.slice_last(x, 0, 2), ag.slice_last(x, 2, 4)),
                 (ag.slice_last(x, 4, 6), ag.slice_last(x, 6, 8))]
        eps = ag.slice_last(x, 8, 10)
        z = fov_observe(state, 0, 1, eps, **FOV_KW)
        return ag.asum(ag.square(z))

    def f_pen(x):
        return ag.asum(boundary_penalty(x, 5.0, 10.0))

    for _ in range(25):
        worst = max(worst, grad_check(f_step, rng.normal(size=6) * 0.5, h=1e-5))
        worst = max(worst, grad_check(f_obs, rng.normal(size=10), h=1e-5))
        worst = max(worst, grad_check(f_pen, rng.normal(size=2) * 4, h=1e-5))
    assert worst < 1e-4
