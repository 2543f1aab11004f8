"""Concrete game definitions: Tag, TagChain, HideSeek, Warehouse.

All four are continuous planar games with double-integrator dynamics and
reparameterized Gaussian observations.  Constants live in
:class:`ScenarioConfig`; a scenario instance is immutable once built.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import adgraph as ag
from .gamedef import (
    PlanarGame,
    boundary_penalty,
    bearing_to,
    fov_variance,
    sq_dist,
)

SMOOTHMIN_TEMP = 10.0  # sharpness of the soft minimum over obstacles


@dataclass
class ScenarioConfig:
    """Scenario name plus every game constant, all overridable."""

    name: str = "tag"
    t_past: int = 6
    t_future: int = 6

    # planar arena
    play_radius: float = 5.0
    boundary_weight: float = 10.0
    fov: float = math.pi / 2
    sigma2_base: float = 0.01
    c_scale: float = 5.0          # variance per radian outside the view cone
    v_max_pursuer: float = 0.3
    v_max_evader: float = 0.375   # evader slightly faster
    accel_ratio: float = 2.0      # accel bound as a multiple of v_max
    init_pos_std: float = 2.0     # spread of the Gaussian initial positions

    # Tag two-spawn variant: pursuer starts at one of two points, evader between
    spawn_mode: bool = False
    spawn_east: tuple = (2.5, 0.0)
    spawn_west: tuple = (-2.5, 0.0)
    evader_start: tuple = (0.0, 0.0)

    # TagChain
    chain_players: int = 4

    # HideSeek: circular view-blocking obstacles (cx, cy, radius)
    obstacles: tuple = ((1.8, 1.2, 0.7), (-1.8, -1.2, 0.7))

    # Warehouse
    wh_alpha: float = 4.0         # proximity-penalty weight on P2
    wh_beta: float = 20.0         # kernel sharpness
    wh_eta1: float = 4.0          # noise per unit of P1's distance from station
    wh_eta2: float = 4.0          # noise per unit of P2's distance from station
    wh_station: tuple = (0.5, 1.0)
    wh_tasks: tuple = ((0.25, 0.25), (0.75, 0.6))
    wh_v_max_p1: float = 0.1
    wh_v_max_p2: float = 0.15

    def validate(self):
        if self.chain_players % 2 != 0:
            raise ValueError("chain_players must be even")
        for quantity in ("wh_alpha", "wh_beta", "wh_eta1", "wh_eta2"):
            if getattr(self, quantity) <= 0:
                raise ValueError(f"{quantity} must be positive")
        for cx, cy, r in self.obstacles:
            if math.hypot(cx, cy) + r > self.play_radius:
                raise ValueError(f"obstacle ({cx}, {cy}, r={r}) leaves the play area")
        return self


def make_game(config):
    """Instantiate the configured scenario."""
    config.validate()
    builders = {
        "tag": TagGame,
        "tagchain": TagChainGame,
        "hideseek": HideSeekGame,
        "warehouse": WarehouseGame,
    }
    if config.name not in builders:
        raise ValueError(f"unknown scenario '{config.name}'")
    return builders[config.name](config)


def _gaussian_logdensity(obs_block, mean, var):
    """numpy log density of an isotropic 2-D Gaussian block."""
    d2 = np.sum((np.asarray(obs_block) - mean) ** 2, axis=-1)
    return -np.log(2.0 * np.pi * var) - d2 / (2.0 * var)


class _FovGame(PlanarGame):
    """Shared machinery for the pursuit-style games (Tag family)."""

    def __init__(self, config, n_players, v_max):
        accel = [config.accel_ratio * v for v in v_max]
        super().__init__(n_players, config.t_past, config.t_future, v_max, accel)
        self.config = config

    def obs_dim(self, player):
        return 4 + 2 * (self.n_players - 1)

    def noise_dim(self, player):
        return 2 * (self.n_players - 1)

    def _pair_variance(self, state, observer, target):
        """(K, 1) observation variance for one observer/target pair."""
        bearing = bearing_to(state[observer][0], state[observer][1], state[target][0])
        return fov_variance(bearing, self.config.fov, self.config.sigma2_base,
                            self.config.c_scale)

    def observe(self, state, player, eps):
        r = self.config.play_radius
        parts = [state[player][0], state[player][1]]  # own state seen exactly
        col = 0
        for other in range(self.n_players):
            if other == player:
                continue
            var = self._pair_variance(state, player, other)
            noisy = ag.gauss_reparam(state[other][0], ag.sqrt(var),
                                     ag.slice_last(eps, col, col + 2))
            parts.append(ag.smooth_clamp(noisy, -r, r))
            col += 2
        return ag.concat(parts)

    def obs_logdensity(self, state, player, obs):
        obs = np.asarray(obs)
        logd = 0.0
        col = 4
        for other in range(self.n_players):
            if other == player:
                continue
            var = self._pair_variance(state, player, other)[..., 0]
            logd = logd + _gaussian_logdensity(obs[..., col:col + 2], state[other][0], var)
            col += 2
        return logd

    def _boundary(self, state, player):
        return boundary_penalty(state[player][0], self.config.play_radius,
                                self.config.boundary_weight)


class TagGame(_FovGame):
    """Two-player pursuit-evasion in a circular arena.

    The pursuer (player 0) minimizes the inter-player distance, the evader
    (player 1) maximizes it; aside from individual boundary penalties the
    game is zero-sum.  Each player sees its own state exactly and the
    opponent's position through a noisy forward-facing view cone.
    """

    def __init__(self, config):
        super().__init__(config, 2, [config.v_max_pursuer, config.v_max_evader])

    def _distance(self, state):
        return ag.norm_eps(ag.sub(state[0][0], state[1][0]))

    def reward_report(self, state, player):
        d = self._distance(state)
        return ag.scale(d, -1.0) if player == 0 else d

    def reward(self, state, player):
        return ag.sub(self.reward_report(state, player), self._boundary(state, player))

    def sample_initial(self, rng, k):
        cfg = self.config
        if cfg.spawn_mode:
            picks = rng.integers(0, 2, size=k)
            spawns = np.array([cfg.spawn_east, cfg.spawn_west])
            pursuer = spawns[picks]
            evader = np.tile(np.asarray(cfg.evader_start, dtype=float), (k, 1))
        else:
            pursuer = rng.normal(0.0, cfg.init_pos_std, size=(k, 2))
            evader = rng.normal(0.0, cfg.init_pos_std, size=(k, 2))
        zeros = np.zeros((k, 2))
        return [(pursuer, zeros.copy()), (evader, zeros.copy())]


class TagChainGame(_FovGame):
    """N-player cyclic pursuit: P_i chases E_i while E_i flees P_{i+1}.

    Players 0..N/2-1 are pursuers, N/2..N-1 evaders.  Every player observes
    every other player through its view cone.  General-sum.
    """

    def __init__(self, config):
        n = config.chain_players
        if n % 2 != 0:
            raise ValueError("TagChain needs an even player count")
        half = n // 2
        v_max = [config.v_max_pursuer] * half + [config.v_max_evader] * half
        super().__init__(config, n, v_max)
        self.half = half

    def reward_report(self, state, player):
        if player < self.half:  # pursuer i chases evader i
            target = self.half + player
            return ag.scale(ag.norm_eps(ag.sub(state[player][0], state[target][0])), -1.0)
        j = player - self.half  # evader j flees pursuer (j+1) mod half
        threat = (j + 1) % self.half
        return ag.norm_eps(ag.sub(state[player][0], state[threat][0]))

    def reward(self, state, player):
        return ag.sub(self.reward_report(state, player), self._boundary(state, player))

    def sample_initial(self, rng, k):
        cfg = self.config
        state = []
        for _ in range(self.n_players):
            pos = rng.normal(0.0, cfg.init_pos_std, size=(k, 2))
            state.append((pos, np.zeros((k, 2))))
        return state


class HideSeekGame(TagGame):
    """Tag with circular obstacles that block the view and must be avoided.

    A sight line passing near an obstacle raises the observation variance in
    the same way as leaving the view cone does, and colliding with an
    obstacle is penalized like the exterior boundary.
    """

    def __init__(self, config):
        super().__init__(config)
        if not config.obstacles:
            raise ValueError("HideSeek requires at least one obstacle")
        self.obstacles = [(np.asarray(c[:2], dtype=float), float(c[2]))
                          for c in config.obstacles]

    def _clearance(self, state, observer, target):
        """Soft minimum over obstacles of (sight-line distance - radius)."""
        a = state[observer][0]
        b = state[target][0]
        ba = ag.sub(b, a)
        len2 = ag.add(sq_dist(b, a), 1e-9)
        acc = None
        for center, radius in self.obstacles:
            ca = ag.sub(center, a)
            bax, bay = ag.slice_last(ba, 0, 1), ag.slice_last(ba, 1, 2)
            cax, cay = ag.slice_last(ca, 0, 1), ag.slice_last(ca, 1, 2)
            t = ag.div(ag.add(ag.mul(bax, cax), ag.mul(bay, cay)), len2)
            t = ag.smooth_clamp(t, 0.0, 1.0)
            proj = ag.add(a, ag.mul(t, ba))
            clear = ag.affine(ag.norm_eps(ag.sub(center, proj)), 1.0, -radius)
            term = ag.exp(ag.scale(clear, -SMOOTHMIN_TEMP))
            acc = term if acc is None else ag.add(acc, term)
        return ag.scale(ag.log(acc), -1.0 / SMOOTHMIN_TEMP)

    def _pair_variance(self, state, observer, target):
        # Occlusion raises the variance like leaving the view cone does.  The
        # softplus is sharpened (temperature matching the obstacle smooth-min)
        # so a clear sight line a couple of units away adds nothing.
        var = super()._pair_variance(state, observer, target)
        neg_clear = ag.scale(self._clearance(state, observer, target), -SMOOTHMIN_TEMP)
        occlusion = ag.scale(ag.softplus(neg_clear), 1.0 / SMOOTHMIN_TEMP)
        return ag.add(var, ag.affine(occlusion, self.config.c_scale, 0.0))

    def reward(self, state, player):
        r = super().reward(state, player)
        pos = state[player][0]
        cfg = self.config
        for center, radius in self.obstacles:
            inside = ag.affine(ag.norm_eps(ag.sub(pos, center)), -1.0, radius)
            pen = ag.affine(ag.square(ag.softplus(inside)), cfg.boundary_weight, 0.0)
            r = ag.sub(r, pen)
        return r


class WarehouseGame(PlanarGame):
    """Two pickup robots in the unit box; P2 plans around an oblivious P1.

    Both players are attracted to the task locations; P2 is additionally
    penalized for proximity to P1.  P1 senses only its own position.  P2
    senses itself exactly and P1 through a broadcast whose noise grows with
    both players' distances from the station (exact when both are at it).
    """

    def __init__(self, config):
        super().__init__(2, config.t_past, config.t_future,
                         [config.wh_v_max_p1, config.wh_v_max_p2],
                         [config.accel_ratio * config.wh_v_max_p1,
                          config.accel_ratio * config.wh_v_max_p2])
        self.config = config
        self.station = np.asarray(config.wh_station, dtype=float)
        self.tasks = [np.asarray(t, dtype=float) for t in config.wh_tasks]

    def obs_dim(self, player):
        return 2 if player == 0 else 4

    def noise_dim(self, player):
        return 0 if player == 0 else 2

    def _broadcast_sigma(self, state):
        """(K, 1) noise level of the station's broadcast of P1's position."""
        cfg = self.config
        d1 = ag.norm_eps(ag.sub(state[0][0], self.station))
        d2 = ag.norm_eps(ag.sub(state[1][0], self.station))
        return ag.add(ag.affine(d1, cfg.wh_eta1, 0.0), ag.affine(d2, cfg.wh_eta2, 0.0))

    def observe(self, state, player, eps):
        # The broadcast is left untrimmed: the station itself sits on the box
        # edge, where the exact-at-station contract rules out any saturation,
        # and noisy readings may legitimately land outside the box.
        if player == 0:
            return state[0][0]
        z1 = ag.gauss_reparam(state[0][0], self._broadcast_sigma(state), eps)
        return ag.concat([state[1][0], z1])

    def obs_logdensity(self, state, player, obs):
        if player == 0:
            k = np.asarray(state[0][0]).shape[0]
            return np.zeros(k)
        var = self._broadcast_sigma(state)[..., 0] ** 2 + 1e-12
        return _gaussian_logdensity(np.asarray(obs)[..., 2:4], state[0][0], var)

    def reward_report(self, state, player):
        cfg = self.config
        pos = state[player][0]
        r = None
        for task in self.tasks:
            term = ag.exp(ag.scale(sq_dist(pos, task), -cfg.wh_beta))
            r = term if r is None else ag.add(r, term)
        if player == 1:
            near = ag.exp(ag.scale(sq_dist(state[1][0], state[0][0]), -cfg.wh_beta))
            r = ag.sub(r, ag.scale(near, cfg.wh_alpha))
        return r

    def reward(self, state, player):
        return self.reward_report(state, player)

    def sample_initial(self, rng, k):
        return [(rng.uniform(0.0, 1.0, size=(k, 2)), np.zeros((k, 2)))
                for _ in range(self.n_players)]


def sample_tasks(rng, n_tasks=2):
    """Random task locations in the unit box (per-trial warehouse layout)."""
    return tuple(tuple(rng.uniform(0.0, 1.0, size=2)) for _ in range(n_tasks))


def mode_groups(game):
    """Groups of players that share one information-gathering mode.

    Players with noise-free observations have no active/passive distinction
    and are excluded; the chain variant toggles its two teams together.
    """
    if isinstance(game, TagChainGame):
        return [list(range(game.half)), list(range(game.half, game.n_players))]
    return [[i] for i in range(game.n_players) if game.noise_dim(i) > 0]


def group_names(game):
    """Human labels aligned with :func:`mode_groups`."""
    if isinstance(game, TagChainGame):
        return ["pursuers", "evaders"]
    if isinstance(game, WarehouseGame):
        return ["p2"]
    return ["pursuer", "evader"]


def report_groups(game):
    """Cost-reporting groups: per player, except the chain reports team means."""
    if isinstance(game, TagChainGame):
        h = game.half
        return [("pursuers", list(range(h))), ("evaders", list(range(h, game.n_players)))]
    if isinstance(game, WarehouseGame):
        return [("p1", [0]), ("p2", [1])]
    return [("pursuer", [0]), ("evader", [1])]
