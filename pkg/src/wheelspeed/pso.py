"""Constriction-coefficient particle swarm over small mixed integer/continuous boxes."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import WheelSpeedError

CONTINUOUS = "continuous"
INTEGER = "integer"
#: Cost assigned to particles whose objective is NaN or infinite.
PENALTY = 1e12

# Clerc-Kennedy constriction; expanded this is inertia 0.729 and acceleration 2.05 * 0.729
CHI = 0.729
C1 = C2 = 2.05


@dataclass(frozen=True)
class Dim:
    name: str
    lower: float
    upper: float
    kind: str = CONTINUOUS


class SearchSpace:
    def __init__(self, dims):
        dims = [d if isinstance(d, Dim) else Dim(*d) for d in dims]
        if not dims:
            raise WheelSpeedError("invalid-space", "no dimensions")
        for d in dims:
            if not d.lower < d.upper or d.kind not in (CONTINUOUS, INTEGER):
                raise WheelSpeedError("invalid-space", f"bad dimension {d}")
        self.dims = dims
        self.lower = np.array([d.lower for d in dims], dtype=float)
        self.upper = np.array([d.upper for d in dims], dtype=float)
        self.integer = np.array([d.kind == INTEGER for d in dims])

    def __len__(self):
        return len(self.dims)

    @property
    def names(self):
        return [d.name for d in self.dims]

    def snap(self, x):
        """Clamp to the box and round integer dimensions."""
        x = np.clip(x, self.lower, self.upper)
        return np.where(self.integer, np.round(x), x)


@dataclass
class PSOResult:
    best_point: np.ndarray
    best_cost: float
    history: list[float]

    def as_dict(self, space: SearchSpace):
        return {n: (int(v) if i else float(v))
                for n, v, i in zip(space.names, self.best_point, space.integer)}


def _safe(cost):
    cost = float(cost)
    return cost if np.isfinite(cost) else PENALTY


def pso_minimize(objective, space: SearchSpace, particles=30, iterations=100, seed=0, workers=1):
    """Minimise ``objective(point) -> float`` over ``space``.

    ``iterations`` counts swarm evaluations, the first being the seeded initial
    population. Each particle draws from its own RNG stream, so evaluating
    particles concurrently (``workers > 1``) does not change results.
    """
    if not isinstance(space, SearchSpace):
        space = SearchSpace(space)
    if particles < 2 or iterations < 1:
        raise WheelSpeedError("invalid-budget", f"particles={particles}, iterations={iterations}")
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(particles)]
    span = space.upper - space.lower
    dim = len(space)

    x = np.array([space.lower + g.random(dim) * span for g in streams])
    v = np.array([(g.random(dim) - 0.5) * span for g in streams])

    pool = ThreadPoolExecutor(workers) if workers > 1 else None

    def evaluate(pos):
        pts = [space.snap(p) for p in pos]
        if pool is None:
            return np.array([_safe(objective(p)) for p in pts])
        return np.array([_safe(c) for c in pool.map(objective, pts)])

    try:
        cost = evaluate(x)
        pbest, pcost = x.copy(), cost.copy()
        g = int(np.argmin(pcost))
        gbest, gcost = pbest[g].copy(), float(pcost[g])
        history = [gcost]
        for _ in range(iterations - 1):
            r1 = np.array([s.random(dim) for s in streams])
            r2 = np.array([s.random(dim) for s in streams])
            v = CHI * (v + C1 * r1 * (pbest - x) + C2 * r2 * (gbest - x))
            x = np.clip(x + v, space.lower, space.upper)
            cost = evaluate(x)
            better = cost < pcost
            pbest[better], pcost[better] = x[better], cost[better]
            g = int(np.argmin(pcost))
            if pcost[g] < gcost:
                gbest, gcost = pbest[g].copy(), float(pcost[g])
            history.append(gcost)
    finally:
        if pool is not None:
            pool.shutdown()
    return PSOResult(space.snap(gbest), gcost, history)
