"""End-to-end simulation driver.

A run executes synchronous elimination phases until the stopping depth, then
plays each client's terminal choice through round T, accounting every round's
regret against brute-force optima. Pulls are simulated as (node, count)
segments per client: within a segment the per-round regret is constant, so
checkpointed cumulative regret is exact via linear interpolation over the
segment boundaries, and noise only ever affects the estimates, which need
just the per-segment noise sums.
"""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import federation, protocol
from .federation import (
    DEFAULT_CONF_C,
    confidence_radius,
    make_client,
    pull_counts,
    server_begin_phase,
    stopping_depth,
)
from .objectives import (
    BASE_FUNCTIONS,
    NoiseModel,
    ObjectiveSuite,
    OracleReport,
    oracle_optima,
)
from .partition import NodeId, midpoint_1d

try:
    from importlib.metadata import version as _dist_version

    VERSION = _dist_version("fedband")
except Exception:  # not installed, e.g. running from a checkout
    VERSION = "0.0.0+local"


class ConfigError(ValueError):
    pass


class HarnessError(RuntimeError):
    pass


class RunInvariantError(AssertionError):
    """A structural protocol invariant failed during simulation."""


@dataclass(frozen=True)
class SimConfig:
    horizon: int = 100_000
    clients: int = 10
    alpha: float = 0.5
    objective: str = "garland"
    spread: float = 0.2
    noise: float = 0.1
    nu1: float = 1.0
    rho: float = 0.5
    conf_c: float = DEFAULT_CONF_C
    d_prime: float = 0.0
    depth_cap: Optional[int] = None
    seed: int = 0
    stride: int = 1000
    oracle_grid: int = 1_000_000
    oracle_refine: int = 10_000
    oracle_path: Optional[str] = None
    out: Optional[str] = None
    transcript: Optional[str] = None

    def validate(self) -> "SimConfig":
        if self.horizon < 2:
            raise ConfigError(f"horizon {self.horizon} must be >= 2")
        if self.clients < 1:
            raise ConfigError(f"client count {self.clients} must be >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha {self.alpha} outside [0, 1]")
        if self.objective not in BASE_FUNCTIONS:
            raise ConfigError(
                f"unknown objective {self.objective!r}; choices: {sorted(BASE_FUNCTIONS)}"
            )
        if self.spread < 0:
            raise ConfigError(f"spread {self.spread} must be >= 0")
        if self.noise < 0:
            raise ConfigError(f"noise half-width {self.noise} must be >= 0")
        if self.nu1 <= 0:
            raise ConfigError(f"nu1 {self.nu1} must be positive")
        if not 0.0 < self.rho < 1.0:
            raise ConfigError(f"rho {self.rho} must lie in (0, 1)")
        if self.conf_c <= 0:
            raise ConfigError(f"confidence constant {self.conf_c} must be positive")
        if self.d_prime < 0:
            raise ConfigError(f"d' {self.d_prime} must be >= 0")
        if self.depth_cap is not None and self.depth_cap < 1:
            raise ConfigError(f"depth cap {self.depth_cap} must be >= 1")
        if self.stride < 1:
            raise ConfigError(f"checkpoint stride {self.stride} must be >= 1")
        if self.oracle_grid < 1000:
            raise ConfigError(f"oracle grid {self.oracle_grid} must be >= 1000")
        return self

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "clients": self.clients,
            "alpha": self.alpha,
            "objective": self.objective,
            "spread": self.spread,
            "noise": self.noise,
            "nu1": self.nu1,
            "rho": self.rho,
            "conf_c": self.conf_c,
            "d_prime": self.d_prime,
            "depth_cap": self.depth_cap,
            "seed": self.seed,
            "stride": self.stride,
            "oracle_grid": self.oracle_grid,
            "oracle_refine": self.oracle_refine,
            "oracle_path": self.oracle_path,
            "out": self.out,
            "transcript": self.transcript,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        known = set(cls().to_dict())
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
        return cls(**d)


@dataclass
class ClientPhaseRecord:
    client: int
    own_set: tuple[NodeId, ...]
    schedule_len: int
    executed: int
    exploit: Optional[NodeId] = None
    eliminated: tuple[NodeId, ...] = ()
    survivors: tuple[NodeId, ...] = ()
    max_mix_error: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "client": self.client,
            "own_set": [[n.depth, n.index] for n in self.own_set],
            "schedule_len": self.schedule_len,
            "executed": self.executed,
            "exploit": list(self.exploit) if self.exploit else None,
            "eliminated": [[n.depth, n.index] for n in self.eliminated],
            "survivors": [[n.depth, n.index] for n in self.survivors],
            "max_mix_error": self.max_mix_error,
        }


@dataclass
class PhaseRecord:
    phase: int
    depth: int
    budget: float
    radius: float
    union_size: int
    global_pulls: int
    local_pulls: int
    planned_length: int
    executed_length: int
    truncated: bool
    clients: list[ClientPhaseRecord] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "phase": self.phase,
            "depth": self.depth,
            "budget": self.budget,
            "radius": self.radius,
            "union_size": self.union_size,
            "global_pulls": self.global_pulls,
            "local_pulls": self.local_pulls,
            "planned_length": self.planned_length,
            "executed_length": self.executed_length,
            "truncated": self.truncated,
            "clients": [c.to_dict() for c in self.clients],
        }


@dataclass
class RunResult:
    config: SimConfig
    depth_limit: int
    checkpoints: np.ndarray
    regret_total: np.ndarray
    regret_per_client: np.ndarray
    avg_reward_personalized: float
    avg_reward_local: float
    avg_reward_global: float
    phase_records: list[PhaseRecord]
    ledger: protocol.CommLedger
    terminal_nodes: Optional[tuple[NodeId, ...]]
    truncated: bool
    rounds_explore: int
    rounds_terminal: int
    oracle: OracleReport
    wall_time: float

    @property
    def phases_completed(self) -> int:
        return sum(1 for r in self.phase_records if not r.truncated)


def _load_oracle(config: SimConfig, suite: ObjectiveSuite) -> OracleReport:
    if config.oracle_path is not None:
        if not os.path.exists(config.oracle_path):
            raise HarnessError(f"oracle fixture missing: {config.oracle_path}")
        report = OracleReport.load(config.oracle_path)
        if (report.base_name, report.clients) != (suite.base_name, suite.clients) or (
            abs(report.spread - suite.spread) > 1e-12
            or abs(report.alpha - config.alpha) > 1e-12
        ):
            raise HarnessError(
                f"oracle fixture {config.oracle_path} does not match the run "
                f"(objective/clients/spread/alpha differ)"
            )
        return report
    return oracle_optima(suite, config.alpha, config.oracle_grid, config.oracle_refine)


def _checkpoint_grid(T: int, stride: int) -> np.ndarray:
    ts = np.arange(stride, T + 1, stride, dtype=np.int64)
    if ts.size == 0 or ts[-1] != T:
        ts = np.append(ts, T)
    return ts


def run(config: SimConfig) -> RunResult:
    """Simulate one full protocol execution under the given configuration."""
    config.validate()
    t_start = time.perf_counter()

    T, M, alpha = config.horizon, config.clients, config.alpha
    nu1, rho = config.nu1, config.rho
    suite = ObjectiveSuite.create(config.objective, M, config.spread)
    oracle = _load_oracle(config, suite)
    star = np.asarray(oracle.personal_max)
    H = config.depth_cap if config.depth_cap is not None else stopping_depth(
        T, rho, config.d_prime
    )

    noise = NoiseModel(config.noise)
    rngs = [
        np.random.default_rng(s) for s in np.random.SeedSequence(config.seed).spawn(M)
    ]
    clients = [make_client(m) for m in range(1, M + 1)]
    ledger = protocol.CommLedger()
    transcript = [] if config.transcript else None

    # Per-client piecewise traces: boundary round numbers and cumulative sums.
    bounds = [[0] for _ in range(M)]
    cum_regret = [[0.0] for _ in range(M)]
    reward_sums = np.zeros((M, 3))  # personalized, local, global
    identity_tol = 1e-12

    def push_segment(m: int, length: int, vp: float, vl: float, vg: float):
        if length <= 0:
            return
        bounds[m - 1].append(bounds[m - 1][-1] + length)
        cum_regret[m - 1].append(
            cum_regret[m - 1][-1] + length * (star[m - 1] - vp)
        )
        reward_sums[m - 1] += (length * vp, length * vl, length * vg)

    def note(msg, upload: bool):
        violation = protocol.validate_privacy(msg)
        if violation is not None:
            raise RunInvariantError(f"privacy violation: {violation.reason}")
        (ledger.record_upload if upload else ledger.record_download)(msg)
        if transcript is not None:
            transcript.append(msg)

    used = 0
    truncated = False
    phase_records: list[PhaseRecord] = []
    terminal_nodes = None

    for p in range(1, H + 1):
        if used >= T:
            truncated = True
            break

        uploads = [
            protocol.ActiveSetUpload(phase=p, client=c.client, nodes=c.own_set)
            for c in clients
        ]
        for u in uploads:
            note(u, upload=True)
        broadcast = server_begin_phase(uploads, T, M, nu1, rho)
        note(broadcast, upload=False)
        ledger.note_round_trip(p)

        radius = confidence_radius(T, M, broadcast.budget, config.conf_c)
        if config.conf_c == DEFAULT_CONF_C:
            expected = nu1 * rho**p
            if abs(radius - expected) > identity_tol:
                raise RunInvariantError(
                    f"confidence radius {radius!r} != nu1*rho^h {expected!r} at phase {p}"
                )
        for c in clients:
            if c.depth != p:
                raise RunInvariantError(
                    f"client {c.client} at depth {c.depth}, expected {p}"
                )

        g, l = pull_counts(broadcast.budget, alpha, M)
        effective, floor = federation.sample_count_bound(broadcast.budget, alpha, M)
        if effective < floor - 1e-9:
            raise RunInvariantError(
                f"effective sample count {effective} below M*f(p) = {floor} at phase {p}"
            )

        union = broadcast.nodes
        mids = np.array([midpoint_1d(n) for n in union])
        local_vals = suite.local_matrix(mids)  # (M, n)
        global_vals = local_vals.mean(axis=0)
        personal_vals = alpha * local_vals + (1.0 - alpha) * global_vals
        pos = {node: j for j, node in enumerate(union)}

        schedules = [
            federation.plan_schedule(c, broadcast, alpha, M) for c in clients
        ]
        sched_lens = [sum(b.count for b in blocks) for blocks in schedules]
        planned = max(sched_lens)
        exec_rounds = min(planned, T - used)
        phase_truncated = exec_rounds < planned

        record = PhaseRecord(
            phase=p,
            depth=p,
            budget=broadcast.budget,
            radius=radius,
            union_size=len(union),
            global_pulls=g,
            local_pulls=l,
            planned_length=planned,
            executed_length=exec_rounds,
            truncated=phase_truncated,
        )

        for c, blocks, sched_len in zip(clients, schedules, sched_lens):
            m = c.client
            done = 0
            for block in blocks:
                if done >= exec_rounds:
                    break
                k = min(block.count, exec_rounds - done)
                j = pos[block.node]
                noise_total = (
                    float(noise.draw(rngs[m - 1], k).sum()) if config.noise > 0 else 0.0
                )
                federation.record_pull_block(
                    c, block.node, k * float(local_vals[m - 1, j]) + noise_total, k
                )
                push_segment(
                    m, k,
                    float(personal_vals[m - 1, j]),
                    float(local_vals[m - 1, j]),
                    float(global_vals[j]),
                )
                done += k
            crec = ClientPhaseRecord(
                client=m,
                own_set=c.own_set,
                schedule_len=sched_len,
                executed=done,
            )
            if done == sched_len and done < exec_rounds:
                # finished early: exploit the locally best own node while waiting
                federation.local_estimates(c)
                fav = federation.exploit_node(c)
                j = pos[fav]
                pad = exec_rounds - done
                push_segment(
                    m, pad,
                    float(personal_vals[m - 1, j]),
                    float(local_vals[m - 1, j]),
                    float(global_vals[j]),
                )
                crec.exploit = fav
            record.clients.append(crec)
        used += exec_rounds

        if phase_truncated:
            # horizon hit mid-phase: no estimate sync, no elimination
            phase_records.append(record)
            truncated = True
            break

        est_uploads = []
        for c in clients:
            if not c.local_mean:
                federation.local_estimates(c)
            if c.exploit is None:
                federation.exploit_node(c)
            est_uploads.append(federation.build_estimate_upload(c))
        for u in est_uploads:
            note(u, upload=True)
        gbc = federation.server_aggregate(est_uploads)
        if {n for n, _ in gbc.entries} != set(union):
            raise RunInvariantError(f"global broadcast keys != union at phase {p}")
        note(gbc, upload=False)
        ledger.note_round_trip(p)

        for c, crec in zip(clients, record.clients):
            federation.apply_global(c, gbc)
            mixed = federation.mix_estimates(c, alpha)
            own_pos = [pos[n] for n in c.own_set]
            truth = alpha * local_vals[c.client - 1, own_pos] + (1.0 - alpha) * global_vals[own_pos]
            crec.max_mix_error = float(
                max(abs(mixed[n] - truth[k]) for k, n in enumerate(c.own_set))
            )
            decision = federation.eliminate(c, alpha, nu1, rho, radius)
            crec.exploit = c.exploit
            crec.eliminated = decision.eliminated
            crec.survivors = decision.survivors
            federation.advance(c, decision)
        phase_records.append(record)

    if not truncated:
        terminal_nodes = tuple(federation.terminal_action(c) for c in clients)
        if used < T:
            t_mids = np.array([midpoint_1d(n) for n in terminal_nodes])
            t_local = suite.local_matrix(t_mids)  # (M, M) column j is client j's node
            t_global = t_local.mean(axis=0)
            for c in clients:
                m = c.client
                vl = float(t_local[m - 1, m - 1])
                vg = float(t_global[m - 1])
                push_segment(m, T - used, alpha * vl + (1.0 - alpha) * vg, vl, vg)
        rounds_terminal = T - used
        used = T
    else:
        rounds_terminal = 0

    for m in range(1, M + 1):
        if bounds[m - 1][-1] != T:
            raise RunInvariantError(
                f"client {m} accounted {bounds[m - 1][-1]} rounds, expected {T}"
            )

    checkpoints = _checkpoint_grid(T, config.stride)
    per_client = np.vstack(
        [
            np.interp(checkpoints, np.asarray(bounds[m]), np.asarray(cum_regret[m]))
            for m in range(M)
        ]
    )
    total = per_client.sum(axis=0)

    if transcript is not None:
        protocol.write_transcript(transcript, config.transcript)

    return RunResult(
        config=config,
        depth_limit=H,
        checkpoints=checkpoints,
        regret_total=total,
        regret_per_client=per_client,
        avg_reward_personalized=float(reward_sums[:, 0].sum() / (M * T)),
        avg_reward_local=float(reward_sums[:, 1].sum() / (M * T)),
        avg_reward_global=float(reward_sums[:, 2].sum() / (M * T)),
        phase_records=phase_records,
        ledger=ledger,
        terminal_nodes=terminal_nodes,
        truncated=truncated,
        rounds_explore=used - rounds_terminal,
        rounds_terminal=rounds_terminal,
        oracle=oracle,
        wall_time=time.perf_counter() - t_start,
    )


@dataclass
class ReplicationSummary:
    config: SimConfig
    seeds: tuple[int, ...]
    checkpoints: np.ndarray
    regret_mean: np.ndarray
    regret_std: np.ndarray
    results: list[RunResult] = field(default_factory=list, repr=False)


def replicate(config: SimConfig, seeds: Sequence[int]) -> ReplicationSummary:
    """Independent runs per seed, aggregated to mean and std per checkpoint.

    std is the population convention (ddof=0); duplicate seeds and noiseless
    runs collapse it to exactly 0.
    """
    seeds = tuple(int(s) for s in seeds)
    if len(seeds) < 2:
        raise HarnessError(f"need at least 2 seeds to replicate, got {len(seeds)}")
    results = [run(replace(config, seed=s)) for s in seeds]
    traces = np.vstack([r.regret_total for r in results])
    return ReplicationSummary(
        config=config,
        seeds=seeds,
        checkpoints=results[0].checkpoints,
        regret_mean=traces.mean(axis=0),
        regret_std=traces.std(axis=0, ddof=0),
        results=results,
    )


@dataclass
class SweepRow:
    alpha: float
    reward_personalized: float
    reward_local: float
    reward_global: float


@dataclass
class AlphaSweepTable:
    config: SimConfig
    rows: list[SweepRow]
    best_local: float
    best_global: float


def sweep_alpha(config: SimConfig, alphas: Sequence[float]) -> AlphaSweepTable:
    """One full run per alpha; per-step reward averages of the actions taken.

    The reference levels are oracle values: best_local is the across-client
    mean of each client's own optimum, best_global the optimum of the global
    mean objective.
    """
    alphas = [float(a) for a in alphas]
    if not alphas:
        raise HarnessError("alpha sweep needs at least one value")
    for a in alphas:
        if not 0.0 <= a <= 1.0:
            raise HarnessError(f"sweep alpha {a} outside [0, 1]")
    rows = []
    refs = None
    for a in alphas:
        result = run(replace(config, alpha=a))
        if refs is None:
            refs = (
                float(np.mean(result.oracle.local_max)),
                result.oracle.global_max,
            )
        rows.append(
            SweepRow(
                alpha=a,
                reward_personalized=result.avg_reward_personalized,
                reward_local=result.avg_reward_local,
                reward_global=result.avg_reward_global,
            )
        )
    return AlphaSweepTable(config=config, rows=rows, best_local=refs[0], best_global=refs[1])


def oracle_command(config: SimConfig, path: Optional[str] = None) -> tuple[OracleReport, str]:
    """Compute the optima fixture for a config and write it as JSON."""
    config.validate()
    suite = ObjectiveSuite.create(config.objective, config.clients, config.spread)
    report = oracle_optima(suite, config.alpha, config.oracle_grid, config.oracle_refine)
    if path is None:
        path = config.oracle_path
    if path is None:
        path = os.path.join(
            "fixtures",
            f"oracle_{config.objective}_M{config.clients}_s{config.spread}_a{config.alpha}_G{config.oracle_grid}.json",
        )
    report.save(path)
    return report, path


def _write_csv(path: str, header: list[str], rows) -> str:
    parent = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(parent, exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow(row)
    except OSError as exc:
        raise HarnessError(f"cannot write {path}: {exc}") from exc
    return path


def _write_json(path: str, payload: dict) -> str:
    parent = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(parent, exist_ok=True)
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise HarnessError(f"cannot write {path}: {exc}") from exc
    return path


def _meta_common(config: SimConfig) -> dict:
    return {"version": VERSION, "config": config.to_dict()}


def emit(result, prefix: str) -> list[str]:
    """Write CSV + JSON artifacts for a run, replication, or sweep.

    File names derive from the prefix: <prefix>_trace.csv / _summary.csv /
    _sweep.csv plus <prefix>_meta.json. Column order is fixed.
    """
    if isinstance(result, RunResult):
        M = result.config.clients
        header = ["t", "regret_total"] + [f"regret_client_{m:02d}" for m in range(1, M + 1)]
        rows = (
            [int(t), float(result.regret_total[k])]
            + [float(result.regret_per_client[m, k]) for m in range(M)]
            for k, t in enumerate(result.checkpoints)
        )
        trace = _write_csv(f"{prefix}_trace.csv", header, rows)
        meta = _meta_common(result.config)
        meta.update(
            {
                "depth_limit": result.depth_limit,
                "phases_completed": result.phases_completed,
                "truncated": result.truncated,
                "rounds_explore": result.rounds_explore,
                "rounds_terminal": result.rounds_terminal,
                "terminal_nodes": (
                    [[n.depth, n.index] for n in result.terminal_nodes]
                    if result.terminal_nodes
                    else None
                ),
                "avg_reward": {
                    "personalized": result.avg_reward_personalized,
                    "local": result.avg_reward_local,
                    "global": result.avg_reward_global,
                },
                "ledger": result.ledger.totals(),
                "ledger_phases": [
                    {
                        "phase": pc.phase,
                        "up_scalars": pc.up_scalars,
                        "down_scalars": pc.down_scalars,
                        "round_trips": pc.round_trips,
                    }
                    for pc in result.ledger.phases
                ],
                "phase_log": [r.to_dict() for r in result.phase_records],
                "wall_time_s": result.wall_time,
            }
        )
        return [trace, _write_json(f"{prefix}_meta.json", meta)]

    if isinstance(result, ReplicationSummary):
        header = ["t", "regret_mean", "regret_std"]
        rows = (
            [int(t), float(result.regret_mean[k]), float(result.regret_std[k])]
            for k, t in enumerate(result.checkpoints)
        )
        trace = _write_csv(f"{prefix}_summary.csv", header, rows)
        meta = _meta_common(result.config)
        meta.update(
            {
                "seeds": list(result.seeds),
                "runs": [
                    {
                        "seed": r.config.seed,
                        "truncated": r.truncated,
                        "phases_completed": r.phases_completed,
                        "ledger": r.ledger.totals(),
                        "wall_time_s": r.wall_time,
                    }
                    for r in result.results
                ],
            }
        )
        return [trace, _write_json(f"{prefix}_meta.json", meta)]

    if isinstance(result, AlphaSweepTable):
        header = [
            "alpha",
            "reward_personalized",
            "reward_local",
            "reward_global",
            "best_local",
            "best_global",
        ]
        rows = (
            [
                row.alpha,
                row.reward_personalized,
                row.reward_local,
                row.reward_global,
                result.best_local,
                result.best_global,
            ]
            for row in result.rows
        )
        trace = _write_csv(f"{prefix}_sweep.csv", header, rows)
        meta = _meta_common(result.config)
        meta.update(
            {
                "alphas": [row.alpha for row in result.rows],
                "best_local": result.best_local,
                "best_global": result.best_global,
            }
        )
        return [trace, _write_json(f"{prefix}_meta.json", meta)]

    raise HarnessError(f"cannot emit object of type {type(result).__name__}")
