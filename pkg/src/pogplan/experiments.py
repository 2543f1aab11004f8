"""Experiment harness: trial batteries, sweeps, oracle suites, file outputs.

Trials are embarrassingly parallel across seeds; set POGPLAN_THREADS to fan
them out over processes.  All aggregation happens in seed order, so results
are bit-for-bit reproducible regardless of the pool size.  Every output file
is plain columnar text with a one-line header; summary tables and trial
records parse back exactly.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import product

import numpy as np

from . import adgraph as ag
from .adgraph import grad_check
from .beliefs import init_particles, update_particles
from .config import write_config
from .policy import ACTIVE, PASSIVE, init_policy, policy_leaves
from .runner import EpisodeOptions, StepRecord, TrialRecord, run_episode
from .scenarios import group_names, make_game, mode_groups, report_groups, sample_tasks
from .solver import calc_eq, evaluation_batch, run_batch, _run_rollout
from .toygame import ToyFilterGame, exact_posterior

THREADS_ENV = "POGPLAN_THREADS"


def _n_threads():
    return max(1, int(os.environ.get(THREADS_ENV, "1")))


def _call(packed):
    fn, arg = packed
    return fn(arg)


def map_trials(fn, args):
    """Run ``fn`` over trial arguments, optionally on a process pool."""
    args = list(args)
    n = min(_n_threads(), len(args))
    if n <= 1:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(_call, [(fn, a) for a in args]))


def mean_stderr(values):
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return float("nan"), float("nan")
    if values.size == 1:
        return float(values[0]), 0.0
    return float(values.mean()), float(values.std(ddof=1) / np.sqrt(values.size))


# ---------------------------------------------------------------------------
# Trial construction
# ---------------------------------------------------------------------------

def trial_game(cfg, trial_seed):
    """Scenario instance for one trial (warehouse task layout is per-seed)."""
    tasks = None
    if cfg.scenario == "warehouse" and cfg.warehouse_random_tasks:
        tasks = sample_tasks(np.random.default_rng(np.random.SeedSequence((trial_seed, 77))))
    return make_game(cfg.scenario_config(tasks=tasks))


def episode_options(cfg, modes, dump_path=None):
    return EpisodeOptions(
        brain=cfg.brain,
        modes=list(modes),
        episode_steps=cfg.episode_steps,
        k_all=cfg.k_all,
        k_batch=cfg.k_batch,
        n_eq=list(cfg.n_eq) if len(cfg.n_eq) > 1 else int(cfg.n_eq[0]),
        gamma=cfg.gamma,
        max_iters=cfg.max_iters,
        first_step_iters=cfg.first_step_iters or None,
        eps_tol=cfg.eps_tol,
        lr=cfg.lr,
        hidden=tuple(cfg.hidden),
        resample_threshold=(cfg.resample_ess_fraction * cfg.k_all
                            if cfg.resample_ess_fraction > 0 else None),
        particle_dump=dump_path,
    )


def modes_for_combo(game, combo):
    """Per-player modes from one active/passive choice per mode group."""
    groups = mode_groups(game)
    modes = [ACTIVE] * game.n_players  # players without a choice default active
    for players, mode in zip(groups, combo):
        for p in players:
            modes[p] = mode
    return modes


def _one_trial(packed):
    cfg, combo, trial_seed, dump_path = packed
    game = trial_game(cfg, trial_seed)
    modes = modes_for_combo(game, combo)
    opts = episode_options(cfg, modes, dump_path)
    return run_episode(game, opts, trial_seed)


# ---------------------------------------------------------------------------
# Summary table
# ---------------------------------------------------------------------------

@dataclass
class SummaryRow:
    label: str
    group: str
    mean_cost: float
    stderr: float
    trials: int
    grad_seconds: float   # mean wall time per gradient step, per player


@dataclass
class SummaryTable:
    scenario: str
    rows: list = field(default_factory=list)


def combo_label(names, combo):
    return ",".join(f"{name}={mode}" for name, mode in zip(names, combo))


def run_matrix(cfg):
    """Every active/passive configuration of the scenario's mode groups.

    Returns (SummaryTable, {label: [TrialRecord]}); also writes the config
    echo, per-trial records, and the summary under cfg.outdir.
    """
    os.makedirs(cfg.outdir, exist_ok=True)
    write_config(cfg, os.path.join(cfg.outdir, "config_echo.txt"))
    probe = trial_game(cfg, cfg.seed)
    names = group_names(probe)
    combos = list(product((PASSIVE, ACTIVE), repeat=len(mode_groups(probe))))

    table = SummaryTable(scenario=cfg.scenario)
    all_records = {}
    if cfg.trials <= 0:
        print("warning: 0 trials requested; summary is empty")
        write_summary(table, os.path.join(cfg.outdir, "summary.txt"))
        return table, all_records
    for combo in combos:
        label = combo_label(names, combo)
        seeds = [cfg.seed + t for t in range(cfg.trials)]
        args = []
        for s in seeds:
            dump = None
            if cfg.dump_particles:
                dump = os.path.join(cfg.outdir, f"cloud_{label}_{s}.txt")
            args.append((cfg, combo, s, dump))
        records = map_trials(_one_trial, args)
        all_records[label] = records
        game = trial_game(cfg, cfg.seed)
        for gname, players in report_groups(game):
            costs = [np.mean([r.episode_cost(p) for p in players]) for r in records]
            mean, err = mean_stderr(costs)
            times = [t for r in records for t in r.grad_step_times()]
            table.rows.append(SummaryRow(label=label, group=gname, mean_cost=mean,
                                         stderr=err, trials=len(records),
                                         grad_seconds=float(np.mean(times)) if times else float("nan")))
        for record in records:
            path = os.path.join(cfg.outdir, f"record_{label}_{record.seed}.txt")
            write_trial_record(record, trial_game(cfg, record.seed), cfg, label, path)
    write_summary(table, os.path.join(cfg.outdir, "summary.txt"))
    return table, all_records


# ---------------------------------------------------------------------------
# Parameter sweeps
# ---------------------------------------------------------------------------

def first_step_stats(cfg, trial_seed):
    """Solve just the first planning round and report the focal player's
    converged cost, total solve seconds, min planned distance to the
    warehouse station, and the full cost trace."""
    game = trial_game(cfg, trial_seed)
    focal = game.n_players - 1
    combo = tuple((list(cfg.gathering) + [ACTIVE] * 8)[: len(mode_groups(game))])
    modes = modes_for_combo(game, combo)
    ss = np.random.SeedSequence(trial_seed)
    init_ss, theta_ss, solve_ss, eval_ss = ss.spawn(4)
    pset = init_particles(game, cfg.k_all, 1, np.random.default_rng(init_ss))
    seeds = theta_ss.generate_state(game.n_players)
    thetas = [init_policy(game, i, modes[i], int(seeds[i]), hidden=tuple(cfg.hidden))
              for i in range(game.n_players)]
    t0 = time.perf_counter()
    res = calc_eq(game, pset, thetas, np.random.default_rng(solve_ss),
                  eps_tol=cfg.eps_tol, max_iters=cfg.max_iters,
                  k_batch=cfg.k_batch, lr=cfg.lr)
    seconds = time.perf_counter() - t0

    # the converged policies are scored on a large frozen batch so the
    # reported cost reflects the policy, not evaluation sampling noise
    batch = evaluation_batch(game, pset, max(cfg.k_batch, 256),
                             np.random.default_rng(eval_ss))
    costs, traj = run_batch(game, pset, res.thetas, batch,
                            players=[focal], record=True)
    min_station = float("nan")
    if cfg.scenario == "warehouse":
        station = np.asarray(cfg.wh_station)
        dists = [np.linalg.norm(np.asarray(state[focal][0]) - station, axis=-1)
                 for state in traj["states"]]
        min_station = float(np.mean(np.min(np.stack(dists, axis=0), axis=0)))
    return {
        "cost": costs[focal],
        "seconds": seconds,
        "min_station_dist": min_station,
        "trace": res.cost_trace[focal],
        "iterations": res.iterations,
    }


def _sweep_point(packed):
    cfg, seed = packed
    return first_step_stats(cfg, seed)


def sweep(cfg, param, values):
    """Scaling study over t_future, k_batch, or n_eq.

    t_future / k_batch: first-round solve per seed, reporting cost and wall
    time per value.  n_eq: pairwise grid of separate-brain episodes,
    reporting mean inter-player distance and each agent's mean surprisal.
    """
    if param in ("t_future", "k_batch"):
        rows = []
        for value in values:
            sub = replace(cfg, **{param: int(value)})
            results = map_trials(_sweep_point,
                                 [(sub, cfg.seed + t) for t in range(cfg.trials)])
            cost_m, cost_e = mean_stderr([r["cost"] for r in results])
            sec_m, sec_e = mean_stderr([r["seconds"] for r in results])
            rows.append({"value": int(value), "mean_cost": cost_m, "stderr_cost": cost_e,
                         "mean_seconds": sec_m, "stderr_seconds": sec_e,
                         "costs": [r["cost"] for r in results]})
        return rows
    if param == "n_eq":
        return neq_grid(cfg, values)
    raise ValueError(f"parameter '{param}' is not sweepable")


def _neq_episode(packed):
    cfg, pair, seed = packed
    game = trial_game(cfg, seed)
    if game.n_players != 2:
        raise ValueError("the n_eq grid needs a two-player scenario")
    opts = episode_options(cfg, [ACTIVE, ACTIVE])
    opts.brain = "separate"
    opts.n_eq = [int(pair[0]), int(pair[1])]
    return run_episode(game, opts, seed)


def neq_grid(cfg, values):
    """Pairwise candidate-count grid for separate-brain two-player play."""
    rows = []
    for pair in product([int(v) for v in values], repeat=2):
        records = map_trials(_neq_episode,
                             [(cfg, pair, cfg.seed + t) for t in range(cfg.trials)])
        dists, surp0, surp1 = [], [], []
        for r in records:
            per_step = [np.linalg.norm(s.state[0, 0:2] - s.state[0, 4:6])
                        for s in r.steps]
            dists.append(float(np.mean(per_step)))
            surp0.append(float(np.mean([s.surprisal[(0, 1)] for s in r.steps])))
            surp1.append(float(np.mean([s.surprisal[(1, 0)] for s in r.steps])))
        d_m, d_e = mean_stderr(dists)
        rows.append({"n_eq_0": pair[0], "n_eq_1": pair[1],
                     "mean_distance": d_m, "stderr_distance": d_e,
                     "mean_surprisal_0": mean_stderr(surp0)[0],
                     "mean_surprisal_1": mean_stderr(surp1)[0],
                     "surprisal_0": surp0, "surprisal_1": surp1})
    return rows


# ---------------------------------------------------------------------------
# Oracle suites (also exposed as CLI subcommands)
# ---------------------------------------------------------------------------

def _flat_to_policy(theta, flat):
    """Rebuild a policy whose leaves are views into one flat vector."""
    weights, biases = [], []
    off = 0
    for w, b in zip(theta.weights, theta.biases):
        n = w.size
        weights.append(ag.reshape(ag.slice_last(flat, off, off + n), w.shape))
        off += n
        n = b.size
        biases.append(ag.reshape(ag.slice_last(flat, off, off + n), b.shape))
        off += n
    return replace(theta, weights=weights, biases=biases)


def _flatten_policy(theta):
    return np.concatenate([np.asarray(a).ravel() for a in policy_leaves(theta)])


def rollout_gradcheck(scenario, programs=100, seed=0, h=1e-4, t_past=2,
                      t_future=2, hidden=(4,)):
    """Worst relative error of the tape gradient of random rollout programs
    against central finite differences.

    Each program: a random reachable joint state, random windows and noise,
    random small policies, one focal player; the whole rollout cost is
    differentiated with respect to that player's parameters.
    """
    cfg = _small_scenario(scenario, t_past, t_future)
    game = make_game(cfg)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(programs):
        focal = int(rng.integers(game.n_players))
        modes = [ACTIVE if rng.random() < 0.8 else PASSIVE
                 for _ in range(game.n_players)]
        thetas = [init_policy(game, i, modes[i], int(rng.integers(2 ** 31)),
                              hidden=hidden) for i in range(game.n_players)]
        state = _random_reachable_state(game, rng)
        hists = [rng.normal(scale=0.5, size=(1, game.t_past * game.obs_dim(i)))
                 for i in range(game.n_players)]
        eps = [[rng.standard_normal((1, game.noise_dim(i)))
                for i in range(game.n_players)] for _ in range(game.t_future)]

        def program(flat):
            trial = list(thetas)
            trial[focal] = _flat_to_policy(thetas[focal], flat)
            acc, _ = _run_rollout(game, state, hists, trial, eps, [focal])
            return ag.affine(ag.asum(acc[focal]), -1.0, 0.0)

        worst = max(worst, grad_check(program, _flatten_policy(thetas[focal]), h=h))
    return worst


def _small_scenario(name, t_past, t_future):
    from .scenarios import ScenarioConfig

    return ScenarioConfig(name=name, t_past=t_past, t_future=t_future)


def _random_reachable_state(game, rng):
    state = []
    for i in range(game.n_players):
        comps = game.state_comps(i)
        pos = rng.normal(scale=1.5, size=(1, comps[0]))
        if len(comps) == 1:
            state.append((pos,))
            continue
        vel = rng.uniform(-0.9, 0.9, size=(1, comps[1])) * game.v_max[i]
        state.append((pos, vel))
    return state


def belief_bayes_check(k_particles=10_000, steps=5, seed=0, flip_prob=0.2):
    """Total-variation gap between the conditioned particle marginal and the
    exact enumerated posterior on the two-state toy game."""
    game = ToyFilterGame(flip_prob=flip_prob, t_past=3)
    ss = np.random.SeedSequence(seed)
    init_ss, obs_ss, upd_ss = ss.spawn(3)
    pset = init_particles(game, k_particles, 1, np.random.default_rng(init_ss))
    thetas = [init_policy(game, 0, ACTIVE, seed=0, hidden=(4,))]
    obs_rng = np.random.default_rng(obs_ss)
    upd_rng = np.random.default_rng(upd_ss)

    true_x = 1.0
    observations = []
    for _ in range(steps):
        z = game.observe([(np.array([[true_x]]),)], 0, obs_rng.standard_normal((1, 1)))
        observations.append(float(z[0, 0]))
        pset = update_particles(pset, game, thetas, true_obs=z[0], player=0,
                                gamma=1.0, rng=upd_rng)
    oracle = exact_posterior(game, observations)
    mass_one = pset.weights[pset.states[:, 0] > 0.5].sum()
    particle = np.array([1.0 - mass_one, mass_one])
    return float(0.5 * np.abs(particle - oracle).sum())


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def _fmt(x):
    return repr(float(x))


def write_summary(table, path):
    with open(path, "w") as fh:
        fh.write("# pogplan summary v1\n")
        fh.write(f"# scenario {table.scenario}\n")
        fh.write("# columns: label group mean_cost stderr trials grad_seconds\n")
        for r in table.rows:
            fh.write(f"{r.label} {r.group} {_fmt(r.mean_cost)} {_fmt(r.stderr)} "
                     f"{r.trials} {_fmt(r.grad_seconds)}\n")


def read_summary(path):
    table = None
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("# scenario"):
                table = SummaryTable(scenario=line.split()[-1])
            elif line and not line.startswith("#"):
                label, group, mean, err, trials, secs = line.split()
                table.rows.append(SummaryRow(label=label, group=group,
                                             mean_cost=float(mean), stderr=float(err),
                                             trials=int(trials), grad_seconds=float(secs)))
    return table


def write_sweep(rows, param, path):
    with open(path, "w") as fh:
        fh.write("# pogplan sweep v1\n")
        if rows and "n_eq_0" in rows[0]:
            fh.write("# columns: n_eq_0 n_eq_1 mean_distance stderr_distance "
                     "mean_surprisal_0 mean_surprisal_1\n")
            for r in rows:
                fh.write(f"{r['n_eq_0']} {r['n_eq_1']} {_fmt(r['mean_distance'])} "
                         f"{_fmt(r['stderr_distance'])} {_fmt(r['mean_surprisal_0'])} "
                         f"{_fmt(r['mean_surprisal_1'])}\n")
        else:
            fh.write(f"# columns: {param} mean_cost stderr_cost mean_seconds stderr_seconds\n")
            for r in rows:
                fh.write(f"{r['value']} {_fmt(r['mean_cost'])} {_fmt(r['stderr_cost'])} "
                         f"{_fmt(r['mean_seconds'])} {_fmt(r['stderr_seconds'])}\n")


def write_trial_record(record, game, cfg, label, path):
    """Serialize one episode: header metadata and per-section columnar rows."""
    n = game.n_players
    with open(path, "w") as fh:
        fh.write("# pogplan trial record v1\n")
        fh.write("[meta]\n")
        fh.write(f"scenario = {cfg.scenario}\n")
        fh.write(f"label = {label}\n")
        fh.write(f"seed = {record.seed}\n")
        fh.write(f"brain = {record.brain}\n")
        fh.write(f"modes = {','.join(record.modes)}\n")
        fh.write(f"n_eq = {','.join(str(x) for x in cfg.n_eq)}\n")
        fh.write(f"aborted = {str(record.aborted).lower()}\n")
        fh.write(f"players = {n}\n")
        fh.write("[steps]\n")
        fh.write("# step player x y vx vy ax ay reward_report reward_full\n")
        for s in record.steps:
            state = game.unpack_state(s.state)
            for p in range(n):
                pos, vel = state[p][0][0], state[p][1][0]
                a = s.actions[p][0]
                fh.write(f"{s.step} {p} {_fmt(pos[0])} {_fmt(pos[1])} {_fmt(vel[0])} "
                         f"{_fmt(vel[1])} {_fmt(a[0])} {_fmt(a[1])} "
                         f"{_fmt(s.rewards_report[p])} {_fmt(s.rewards_full[p])}\n")
        fh.write("[solves]\n")
        fh.write("# step agent candidate iterations converged\n")
        for s in record.steps:
            for ai, (iters, convs) in enumerate(zip(s.solve_iterations, s.solve_converged)):
                for ci, (it, cv) in enumerate(zip(iters, convs)):
                    fh.write(f"{s.step} {ai} {ci} {it} {str(cv).lower()}\n")
        fh.write("[gradtimes]\n")
        fh.write("# step count mean std\n")
        for s in record.steps:
            t = np.asarray(s.grad_seconds)
            fh.write(f"{s.step} {t.size} {_fmt(t.mean() if t.size else 0.0)} "
                     f"{_fmt(t.std() if t.size else 0.0)}\n")
        fh.write("[surprisal]\n")
        fh.write("# step agent opponent nll\n")
        for s in record.steps:
            for (agent, opp), value in sorted(s.surprisal.items()):
                fh.write(f"{s.step} {agent} {opp} {_fmt(value)}\n")
        fh.write("[belief]\n")
        fh.write("# step agent player mean_x mean_y\n")
        for s in record.steps:
            for (agent, p), mean in sorted(s.belief_means.items()):
                fh.write(f"{s.step} {agent} {p} {_fmt(mean[0])} {_fmt(mean[1])}\n")
        fh.write("[trace]\n")
        fh.write("# agent candidate player iteration cost\n")
        for ai, cands in enumerate(record.first_traces):
            for ci, traces in enumerate(cands):
                for p, trace in enumerate(traces):
                    for it, c in enumerate(trace):
                        fh.write(f"{ai} {ci} {p} {it} {_fmt(c)}\n")


def read_trial_record(path):
    """Parse a record file back into a TrialRecord (observations and raw
    gradient times are summarized, not stored)."""
    meta = {}
    sections = {}
    current = None
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1]
                sections[current] = []
                continue
            if current == "meta":
                key, _, value = line.partition("=")
                meta[key.strip()] = value.strip()
            else:
                sections[current].append(line.split())

    n = int(meta["players"])
    steps = {}
    for row in sections.get("steps", []):
        step, p = int(row[0]), int(row[1])
        entry = steps.setdefault(step, {
            "players": {}, "surprisal": {}, "belief": {},
            "iters": {}, "conv": {}, "grad": (0, 0.0, 0.0)})
        entry["players"][p] = [float(v) for v in row[2:]]
    for row in sections.get("solves", []):
        step, ai, ci = int(row[0]), int(row[1]), int(row[2])
        steps[step]["iters"].setdefault(ai, {})[ci] = int(row[3])
        steps[step]["conv"].setdefault(ai, {})[ci] = row[4] == "true"
    for row in sections.get("gradtimes", []):
        steps[int(row[0])]["grad"] = (int(row[1]), float(row[2]), float(row[3]))
    for row in sections.get("surprisal", []):
        steps[int(row[0])]["surprisal"][(int(row[1]), int(row[2]))] = float(row[3])
    for row in sections.get("belief", []):
        steps[int(row[0])]["belief"][(int(row[1]), int(row[2]))] = np.array(
            [float(row[3]), float(row[4])])

    record = TrialRecord(seed=int(meta["seed"]), brain=meta["brain"],
                         modes=meta["modes"].split(","),
                         aborted=meta["aborted"] == "true")
    record.meta = meta
    for step in sorted(steps):
        entry = steps[step]
        state = np.concatenate([np.asarray(entry["players"][p][0:4])
                                for p in range(n)])[None, :]
        actions = [np.asarray(entry["players"][p][4:6])[None, :] for p in range(n)]
        iters = [[entry["iters"][ai][ci] for ci in sorted(entry["iters"][ai])]
                 for ai in sorted(entry["iters"])]
        convs = [[entry["conv"][ai][ci] for ci in sorted(entry["conv"][ai])]
                 for ai in sorted(entry["conv"])]
        record.steps.append(StepRecord(
            step=step, state=state, observations=None, actions=actions,
            rewards_report=[entry["players"][p][6] for p in range(n)],
            rewards_full=[entry["players"][p][7] for p in range(n)],
            solve_iterations=iters, solve_converged=convs,
            grad_seconds=[], surprisal=entry["surprisal"],
            belief_means=entry["belief"]))
        record.steps[-1].grad_summary = entry["grad"]

    traces = {}
    for row in sections.get("trace", []):
        ai, ci, p, it = (int(v) for v in row[:4])
        traces.setdefault(ai, {}).setdefault(ci, {}).setdefault(p, {})[it] = float(row[4])
    record.first_traces = [
        [[[cand[p][it] for it in sorted(cand[p])] for p in sorted(cand)]
         for ci, cand in sorted(agent.items())]
        for ai, agent in sorted(traces.items())]
    return record


# ---------------------------------------------------------------------------
# Plot-data emission
# ---------------------------------------------------------------------------

def emit_plot_data(records, kind, path, player=None):
    """Write plot-ready columnar text for one figure family.

    ``records`` is a list of TrialRecord (fresh or re-read).  No plotting
    happens here; the files carry a single header line naming the columns.
    """
    if not records:
        raise ValueError("no records to emit from")
    if kind == "trajectory":
        record = records[0]
        n = len(record.modes)
        with open(path, "w") as fh:
            fh.write("# step player x y vx vy reward_units_distance\n")
            for s in record.steps:
                state = s.state.reshape(-1)
                for p in range(n):
                    x, y, vx, vy = state[4 * p: 4 * p + 4]
                    fh.write(f"{s.step} {p} {_fmt(x)} {_fmt(y)} {_fmt(vx)} {_fmt(vy)} "
                             f"{_fmt(s.rewards_report[p])}\n")
        return path
    if kind == "convergence":
        player = len(records[0].modes) - 1 if player is None else player
        traces = [r.first_traces[0][0][player] for r in records if r.first_traces]
        if not traces:
            raise ValueError("records carry no first-step cost traces")
        length = min(len(t) for t in traces)
        with open(path, "w") as fh:
            fh.write("# iteration mean_cost stderr\n")
            for it in range(length):
                m, e = mean_stderr([t[it] for t in traces])
                fh.write(f"{it} {_fmt(m)} {_fmt(e)}\n")
        return path
    if kind == "surprisal":
        player = 1 if player is None else player
        opp = 1 - player
        groups = {}
        for r in records:
            n_eq = getattr(r, "meta", {}).get("n_eq", "1")
            key = int(str(n_eq).split(",")[player])
            values = [s.surprisal[(player, opp)] for s in r.steps
                      if (player, opp) in s.surprisal]
            if not values:
                raise ValueError("records carry no surprisal entries for the "
                                 f"requested agent {player}")
            groups.setdefault(key, []).append(float(np.mean(values)))
        with open(path, "w") as fh:
            fh.write("# n_eq mean_surprisal stderr\n")
            for key in sorted(groups):
                m, e = mean_stderr(groups[key])
                fh.write(f"{key} {_fmt(m)} {_fmt(e)}\n")
        return path
    raise ValueError(f"unknown plot-data kind '{kind}'")
