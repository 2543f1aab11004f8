"""Receding-horizon game play: plan, act one step, update beliefs, repeat.

Two deployments:

* ``shared`` brain -- one planner computes the joint equilibrium once per
  round and acts for every player; beliefs are pushed forward fully
  open-loop (no conditioning), so they remain identical across players by
  construction.
* ``separate`` brain -- every player runs its own planner on its own
  particle cloud, maintains ``n_eq`` candidate equilibria (each driving one
  partition block of its cloud), acts on its first candidate, and
  conditions a ``gamma`` fraction of its particles on its own true
  observations only.

Round structure (kept identical to the rollout and the particle update):
fresh true observations of the current state complete the observation
windows, the policies map the completed windows to the joint action (passive
policies read the pre-push window), and the world advances one transition.
Everything is driven by generators spawned from one seed, so an episode is
a pure function of (config, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .beliefs import (
    dump_particles,
    gaussian_summary,
    init_particles,
    surprisal,
    update_particles,
)
from .policy import ACTIVE, adam_init, init_policy, policy_forward
from .solver import calc_eq

SHARED = "shared"
SEPARATE = "separate"


@dataclass
class EpisodeOptions:
    """Everything a single episode needs beyond the game itself."""

    brain: str = SHARED
    modes: list = None            # per player: "active" / "passive"
    episode_steps: int = 20
    k_all: int = 1000
    k_batch: int = 10
    n_eq: list = None             # candidate equilibria per agent
    gamma: float = 0.1
    max_iters: int = 100
    first_step_iters: int = None  # heavier initial solve before warm starts
    eps_tol: float = 1e-3
    lr: float = 1e-3
    hidden: tuple = (64, 64)
    resample_threshold: float = None
    particle_dump: str = None     # path for per-step cloud dumps, if wanted

    def resolved(self, game):
        modes = self.modes or [ACTIVE] * game.n_players
        n_agents = 1 if self.brain == SHARED else game.n_players
        n_eq = self.n_eq
        if n_eq is None:
            n_eq = [1] * n_agents
        elif isinstance(n_eq, int):
            n_eq = [n_eq] * n_agents
        if len(n_eq) != n_agents:
            raise ValueError(f"need {n_agents} n_eq entries, got {len(n_eq)}")
        if self.brain not in (SHARED, SEPARATE):
            raise ValueError(f"unknown brain mode '{self.brain}'")
        return modes, n_eq


@dataclass
class Candidate:
    """One candidate joint equilibrium with its optimizer state."""

    thetas: list
    adam_states: list


@dataclass
class AgentRuntime:
    """One planning brain: its belief cloud and candidate equilibria."""

    player: int                  # own index; -1 for the shared brain
    pset: object
    candidates: list
    gamma: float
    solver_rng: np.random.Generator
    update_rng: np.random.Generator


@dataclass
class WorldSim:
    """Ground truth: the one true joint state and its noise stream."""

    state: np.ndarray            # packed (1, D)
    rng: np.random.Generator
    step: int = 0


@dataclass
class StepRecord:
    step: int
    state: np.ndarray            # packed true state after the transition
    observations: list           # per player (1, obs_dim), pre-transition
    actions: list                # per player (1, action_dim)
    rewards_report: list         # per player, boundary-free reward at new state
    rewards_full: list
    solve_iterations: list       # per agent: per candidate iteration count
    solve_converged: list        # per agent: per candidate flag
    grad_seconds: list           # all gradient-step wall times this round
    surprisal: dict              # (agent, opponent) -> nats
    belief_means: dict           # (agent, player) -> position mean


@dataclass
class TrialRecord:
    """Everything one seeded episode produced."""

    seed: int
    brain: str
    modes: list
    steps: list = field(default_factory=list)
    first_traces: list = field(default_factory=list)  # step-0 cost traces per agent/candidate
    aborted: bool = False

    def episode_cost(self, player):
        """Reported cost: minus the summed boundary-free rewards."""
        return -sum(float(s.rewards_report[player]) for s in self.steps)

    def grad_step_times(self):
        return [t for s in self.steps for t in s.grad_seconds]


def make_agent(game, player, modes, k_all, n_eq, gamma, hidden, lr, seed_seq):
    """Build one planning brain; candidates get distinct initial policies to
    promote distinct equilibria."""
    init_ss, solver_ss, update_ss, *cand_ss = seed_seq.spawn(3 + n_eq)
    pset = init_particles(game, k_all, n_eq, np.random.default_rng(init_ss))
    candidates = []
    for c_ss in cand_ss:
        seeds = c_ss.generate_state(game.n_players)
        thetas = [init_policy(game, i, modes[i], int(seeds[i]), hidden=hidden)
                  for i in range(game.n_players)]
        candidates.append(Candidate(thetas=thetas,
                                    adam_states=[adam_init(t, lr=lr) for t in thetas]))
    return AgentRuntime(player=player, pset=pset, candidates=candidates, gamma=gamma,
                        solver_rng=np.random.default_rng(solver_ss),
                        update_rng=np.random.default_rng(update_ss))


def plan(agent, game, opts, iters):
    """Solve every candidate equilibrium from its warm start."""
    results = []
    for cand in agent.candidates:
        res = calc_eq(game, agent.pset, cand.thetas, agent.solver_rng,
                      eps_tol=opts.eps_tol, max_iters=iters,
                      k_batch=opts.k_batch, lr=opts.lr,
                      adam_states=cand.adam_states)
        cand.thetas = res.thetas
        cand.adam_states = res.adam_states
        results.append(res)
    return results


def act(world, game, policies, windows):
    """One real-world round step.

    Draws each player's true observation of the current state, completes the
    windows (passive policies act on the pre-push window), applies the
    policies, and advances the true state by exactly one transition.
    Returns (observations, actions, pushed windows).
    """
    state = game.unpack_state(world.state)
    obs, pushed = [], []
    for i in range(game.n_players):
        eps = world.rng.standard_normal((1, game.noise_dim(i)))
        z = np.asarray(game.observe(state, i, eps))
        obs.append(z)
        zdim = game.obs_dim(i)
        pushed.append(np.concatenate([windows[i][:, zdim:], z], axis=1))
    actions = []
    for i in range(game.n_players):
        source = pushed[i] if policies[i].mode == ACTIVE else windows[i]
        actions.append(np.asarray(policy_forward(policies[i], source, t_offset=0)))
    world.state = game.pack_state(game.transition(state, actions))
    world.step += 1
    return obs, actions, pushed


def run_episode(game, opts, seed, agent_seeds=None):
    """Play one full episode; a pure function of (game, opts, seed).

    ``agent_seeds`` optionally pins each agent's seed sequence (e.g. to give
    both separate brains identical streams in symmetry tests).
    """
    modes, n_eq = opts.resolved(game)
    n = game.n_players
    root = np.random.SeedSequence(seed)
    world_ss, *agent_ss = root.spawn(1 + (1 if opts.brain == SHARED else n))
    if agent_seeds is not None:
        agent_ss = [np.random.SeedSequence(s) for s in agent_seeds]

    if opts.brain == SHARED:
        agents = [make_agent(game, -1, modes, opts.k_all, n_eq[0], 0.0,
                             opts.hidden, opts.lr, agent_ss[0])]
    else:
        agents = [make_agent(game, i, modes, opts.k_all, n_eq[i], opts.gamma,
                             opts.hidden, opts.lr, agent_ss[i])
                  for i in range(n)]

    world_rng = np.random.default_rng(world_ss)
    world = WorldSim(state=game.pack_state(game.sample_initial(world_rng, 1)),
                     rng=world_rng)
    windows = [np.zeros((1, game.t_past * game.obs_dim(i))) for i in range(n)]
    record = TrialRecord(seed=seed, brain=opts.brain, modes=list(modes))
    dump_fh = open(opts.particle_dump, "w") if opts.particle_dump else None
    if dump_fh:
        dump_fh.write("# step agent player particle x y weight\n")

    for step in range(opts.episode_steps):
        iters = opts.max_iters
        if step == 0 and opts.first_step_iters is not None:
            iters = opts.first_step_iters
        all_results = [plan(agent, game, opts, iters) for agent in agents]
        if any(r.aborted for results in all_results for r in results):
            record.aborted = True
            break
        if step == 0:
            record.first_traces = [[r.cost_trace for r in results]
                                   for results in all_results]

        # the first candidate provides each player's real-world action
        if opts.brain == SHARED:
            policies = agents[0].candidates[0].thetas
        else:
            policies = [agents[i].candidates[0].thetas[i] for i in range(n)]
        obs, actions, windows = act(world, game, policies, windows)

        # each brain updates its own cloud with its own observation only
        new_state = game.unpack_state(world.state)
        surp, bmeans = {}, {}
        for agent in agents:
            block_policies = [cand.thetas for cand in agent.candidates]
            true_obs = None if agent.player < 0 else obs[agent.player][0]
            agent.pset = update_particles(
                agent.pset, game, block_policies, true_obs, agent.player,
                agent.gamma, agent.update_rng,
                resample_threshold=opts.resample_threshold)
            if dump_fh:
                dump_particles(agent.pset, game, dump_fh, step, agent=agent.player)
            for j in range(n):
                pos = new_state[j][0][0]
                bmeans[(agent.player, j)] = gaussian_summary(agent.pset, game, j)[0]
                if j != agent.player:
                    surp[(agent.player, j)] = surprisal(agent.pset, game, j, pos)

        record.steps.append(StepRecord(
            step=step,
            state=world.state.copy(),
            observations=obs,
            actions=actions,
            rewards_report=[np.asarray(game.reward_report(new_state, i)).item()
                            for i in range(n)],
            rewards_full=[np.asarray(game.reward(new_state, i)).item()
                          for i in range(n)],
            solve_iterations=[[r.iterations for r in results]
                              for results in all_results],
            solve_converged=[[r.converged for r in results]
                             for results in all_results],
            grad_seconds=[t for results in all_results
                          for r in results for t in r.grad_step_seconds],
            surprisal=surp,
            belief_means=bmeans,
        ))
    if dump_fh:
        dump_fh.close()
    return record
