"""Synthetic reward landscapes for the simulated clients.

Each client m holds a private local objective mu_m built by cyclically
shifting a shared base function; the global objective is the across-client
mean, and what a client actually optimises is the convex mixture
mu'_m = alpha * mu_m + (1 - alpha) * mu. Rewards observed at a point are
the local value plus bounded uniform noise. A brute-force grid oracle
records the optima that regret is measured against, and a covering-number
fit estimates how large the near-optimal region is.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


def garland(x):
    """4x(1-x)(3/4 + (1/4)(1 - sqrt|sin 60x|)) on [0,1]; scalar or array."""
    arr = np.asarray(x, dtype=float)
    out = 4.0 * arr * (1.0 - arr) * (0.75 + 0.25 * (1.0 - np.sqrt(np.abs(np.sin(60.0 * arr)))))
    return float(out) if arr.ndim == 0 else out


def double_sine(x):
    """(sin(13x) * sin(27x) + 1) / 2 on [0,1]; scalar or array."""
    arr = np.asarray(x, dtype=float)
    out = (np.sin(13.0 * arr) * np.sin(27.0 * arr) + 1.0) / 2.0
    return float(out) if arr.ndim == 0 else out


BASE_FUNCTIONS: dict[str, Callable] = {
    "garland": garland,
    "double_sine": double_sine,
}


class ObjectiveError(ValueError):
    pass


def client_shifts(clients: int, spread: float) -> np.ndarray:
    """Symmetric offsets delta_m = spread * (2m - M - 1) / (2M), m = 1..M."""
    m = np.arange(1, clients + 1, dtype=float)
    return spread * (2.0 * m - clients - 1) / (2.0 * clients)


def modulate(base: Callable, m: int, clients: int, spread: float) -> Callable:
    """Client m's local objective: base evaluated at frac(x + delta_m)."""
    if not 1 <= m <= clients:
        raise ObjectiveError(f"client id {m} outside 1..{clients}")
    delta = float(client_shifts(clients, spread)[m - 1])

    def local(x):
        arr = np.asarray(x, dtype=float)
        out = base(np.mod(arr + delta, 1.0))
        return float(out) if arr.ndim == 0 else out

    return local


@dataclass(frozen=True)
class ObjectiveSuite:
    """The M local objectives plus their derived global mean."""

    base_name: str
    clients: int
    spread: float
    base: Callable = field(repr=False, compare=False)
    shifts: tuple[float, ...] = field(compare=False, default=())

    @classmethod
    def create(cls, base_name: str, clients: int, spread: float = 0.2) -> "ObjectiveSuite":
        if base_name not in BASE_FUNCTIONS:
            raise ObjectiveError(
                f"unknown objective {base_name!r}; choices: {sorted(BASE_FUNCTIONS)}"
            )
        if clients < 1:
            raise ObjectiveError(f"client count {clients} must be >= 1")
        return cls(
            base_name=base_name,
            clients=clients,
            spread=spread,
            base=BASE_FUNCTIONS[base_name],
            shifts=tuple(client_shifts(clients, spread).tolist()),
        )

    def local(self, m: int, x):
        """mu_m(x); multi-dim points are judged by their first coordinate."""
        if not 1 <= m <= self.clients:
            raise ObjectiveError(f"client id {m} outside 1..{self.clients}")
        arr = np.asarray(x, dtype=float)
        out = self.base(np.mod(arr + self.shifts[m - 1], 1.0))
        return float(out) if arr.ndim == 0 else out

    def local_matrix(self, xs) -> np.ndarray:
        """All clients at once: row m-1 is mu_m over the points xs."""
        xs = np.asarray(xs, dtype=float)
        deltas = np.asarray(self.shifts)[:, None]
        return self.base(np.mod(xs[None, :] + deltas, 1.0))

    def global_value(self, x):
        """mu(x) = mean over clients of mu_m(x)."""
        arr = np.asarray(x, dtype=float)
        shifted = np.mod(arr[..., None] + np.asarray(self.shifts), 1.0)
        out = self.base(shifted).mean(axis=-1)
        return float(out) if arr.ndim == 0 else out

    def personalized(self, m: int, x, alpha: float):
        return personalized_value(self, alpha, m, x)


def personalized_value(suite: ObjectiveSuite, alpha: float, m: int, x):
    """The mixture alpha * mu_m(x) + (1 - alpha) * mu(x)."""
    if not 0.0 <= alpha <= 1.0:
        raise ObjectiveError(f"alpha {alpha} outside [0, 1]")
    return alpha * suite.local(m, x) + (1.0 - alpha) * suite.global_value(x)


@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean uniform noise on [-half_width, half_width]."""

    half_width: float = 0.1

    def __post_init__(self):
        if self.half_width < 0:
            raise ObjectiveError(f"noise half-width {self.half_width} must be >= 0")

    def draw(self, rng: np.random.Generator, size=None):
        if self.half_width == 0.0:
            return 0.0 if size is None else np.zeros(size)
        return rng.uniform(-self.half_width, self.half_width, size=size)


def sample_reward(suite: ObjectiveSuite, noise: NoiseModel, m: int, x, rng) -> float:
    """One observed reward: mu_m(x) plus a fresh noise draw, not clipped."""
    return float(suite.local(m, x)) + float(noise.draw(rng))


def _grid_argmax(values: np.ndarray, xs: np.ndarray) -> tuple[float, float]:
    k = int(np.argmax(values))
    return float(xs[k]), float(values[k])


def _refined_argmax(f: Callable, xs: np.ndarray, values: np.ndarray, refine: int) -> tuple[float, float]:
    """Best grid point, then a dense second pass around it; keeps the better."""
    x0, v0 = _grid_argmax(values, xs)
    if refine <= 0:
        return x0, v0
    step = xs[1] - xs[0] if len(xs) > 1 else 1.0
    lo = max(0.0, x0 - step)
    hi = min(1.0, x0 + step)
    window = np.linspace(lo, hi, refine)
    wv = f(window)
    x1, v1 = _grid_argmax(wv, window)
    return (x1, v1) if v1 > v0 else (x0, v0)


@dataclass(frozen=True)
class OracleReport:
    """Brute-force optima for one suite and mixing weight alpha."""

    base_name: str
    clients: int
    spread: float
    alpha: float
    grid: int
    refine: int
    global_argmax: float
    global_max: float
    local_argmax: tuple[float, ...]
    local_max: tuple[float, ...]
    personal_argmax: tuple[float, ...]
    personal_max: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "base_name": self.base_name,
            "clients": self.clients,
            "spread": self.spread,
            "alpha": self.alpha,
            "grid": self.grid,
            "refine": self.refine,
            "global_argmax": self.global_argmax,
            "global_max": self.global_max,
            "local_argmax": list(self.local_argmax),
            "local_max": list(self.local_max),
            "personal_argmax": list(self.personal_argmax),
            "personal_max": list(self.personal_max),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OracleReport":
        return cls(
            base_name=d["base_name"],
            clients=int(d["clients"]),
            spread=float(d["spread"]),
            alpha=float(d["alpha"]),
            grid=int(d["grid"]),
            refine=int(d["refine"]),
            global_argmax=float(d["global_argmax"]),
            global_max=float(d["global_max"]),
            local_argmax=tuple(float(v) for v in d["local_argmax"]),
            local_max=tuple(float(v) for v in d["local_max"]),
            personal_argmax=tuple(float(v) for v in d["personal_argmax"]),
            personal_max=tuple(float(v) for v in d["personal_max"]),
        )

    def save(self, path: str) -> str:
        parent = os.path.dirname(os.path.abspath(path))
        os.makedirs(parent, exist_ok=True)
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=False)
            fh.write("\n")
        return path

    @classmethod
    def load(cls, path: str) -> "OracleReport":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


_ORACLE_CACHE: dict[tuple, OracleReport] = {}


def oracle_optima(
    suite: ObjectiveSuite,
    alpha: float,
    grid: int = 1_000_000,
    refine: int = 10_000,
) -> OracleReport:
    """Grid-search optima of every mu_m, the global mean, and every mixture.

    Midpoint grid of `grid` cells over [0,1] plus one local refinement pass
    around each coarse argmax. Deterministic for fixed arguments.
    """
    if grid < 1_000:
        raise ObjectiveError(f"oracle grid {grid} too coarse; need >= 1000 points")
    if not 0.0 <= alpha <= 1.0:
        raise ObjectiveError(f"alpha {alpha} outside [0, 1]")

    key = (suite.base_name, suite.clients, suite.spread, round(alpha, 12), grid, refine,
           id(suite.base) if suite.base_name not in BASE_FUNCTIONS else None)
    cached = _ORACLE_CACHE.get(key)
    if cached is not None:
        return cached

    xs = (np.arange(grid, dtype=float) + 0.5) / grid
    locals_m = suite.local_matrix(xs)
    glob = locals_m.mean(axis=0)

    g_arg, g_max = _refined_argmax(suite.global_value, xs, glob, refine)

    l_args, l_maxes, p_args, p_maxes = [], [], [], []
    for m in range(1, suite.clients + 1):
        la, lv = _refined_argmax(lambda t, m=m: suite.local(m, t), xs, locals_m[m - 1], refine)
        l_args.append(la)
        l_maxes.append(lv)
        pers = alpha * locals_m[m - 1] + (1.0 - alpha) * glob
        pa, pv = _refined_argmax(
            lambda t, m=m: alpha * suite.local(m, t) + (1.0 - alpha) * suite.global_value(t),
            xs, pers, refine,
        )
        p_args.append(pa)
        p_maxes.append(pv)

    report = OracleReport(
        base_name=suite.base_name,
        clients=suite.clients,
        spread=suite.spread,
        alpha=alpha,
        grid=grid,
        refine=refine,
        global_argmax=g_arg,
        global_max=g_max,
        local_argmax=tuple(l_args),
        local_max=tuple(l_maxes),
        personal_argmax=tuple(p_args),
        personal_max=tuple(p_maxes),
    )
    _ORACLE_CACHE[key] = report
    return report


@dataclass(frozen=True)
class NearOptimalityEstimate:
    """Covering-number growth rate of the near-optimal region."""

    per_client: tuple[float, ...]
    d_prime: float
    epsilons: tuple[float, ...]
    counts: tuple[tuple[int, ...], ...]


def estimate_near_optimality_dimension(
    objective,
    epsilons: Sequence[float],
    nu1: float = 1.0,
    grid: int = 1 << 20,
) -> NearOptimalityEstimate:
    """Fit how fast the near-optimal region's covering count grows.

    For each eps, count grid cells of side nu1*eps that intersect
    {x : max f - f(x) <= eps}, then fit the slope of log(count) against
    log(1/eps), clamped at 0. An objective whose eps-optimal set is the whole
    domain at every tested eps has nothing to resolve and reports 0 (the
    convention for constant functions). `objective` is a callable or a
    sequence of callables (one per client); the reported value is the max.
    """
    funcs = list(objective) if isinstance(objective, (list, tuple)) else [objective]
    eps = [float(e) for e in epsilons]
    if len(eps) < 2:
        raise ObjectiveError(f"need at least 2 epsilon values, got {len(eps)}")
    if any(e <= 0 for e in eps):
        raise ObjectiveError("epsilon values must be positive")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ObjectiveError("epsilon list must be strictly decreasing")

    xs = (np.arange(grid, dtype=float) + 0.5) / grid
    dims, all_counts = [], []
    for f in funcs:
        vals = np.asarray(f(xs), dtype=float)
        fstar = float(vals.max())
        counts = []
        whole_domain = True
        for e in eps:
            side = nu1 * e
            ncells = max(1, math.ceil(1.0 / side))
            mask = (fstar - vals) <= e
            if not mask.all():
                whole_domain = False
            idx = np.minimum((xs / side).astype(np.int64), ncells - 1)
            counts.append(int(np.unique(idx[mask]).size))
        all_counts.append(tuple(counts))
        if whole_domain:
            dims.append(0.0)
            continue
        slope = float(np.polyfit(np.log(1.0 / np.asarray(eps)), np.log(counts), 1)[0])
        dims.append(max(0.0, slope))

    return NearOptimalityEstimate(
        per_client=tuple(dims),
        d_prime=max(dims),
        epsilons=tuple(eps),
        counts=tuple(all_counts),
    )
