"""Limit-regime simulator: the two-hit recovery rule as alpha -> 0.

In the limit, each measurement's ratio statistic is useful for exactly one
of the currently unrecovered nonzero coordinates, uniformly at random; a
coordinate is recovered once it holds at least two hits, and recovered
coordinates drop out via the residual.  This validates the closed-form
failure probability and sample-size formulas empirically.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.random import PCG64, Generator, SeedSequence

from .bounds import ideal_failure_prob, ideal_total_m


@dataclass(frozen=True)
class IdealInstance:
    k: int
    m: int
    fresh_projections: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.k < 1 or self.m < 0:
            raise ValueError("need k >= 1 and m >= 0")


class IdealResult(NamedTuple):
    recovered_count: int
    iterations: int
    first_round_failures: int  # coordinates with < 2 hits in iteration 1


def recover_from_hits(first_hits: np.ndarray, k: int, fresh: bool, rng: Generator) -> IdealResult:
    """Run the two-hit iteration from a given first-round hit assignment.

    ``first_hits`` maps each measurement to a coordinate in ``range(k)``.
    Fresh mode redraws every assignment over the survivors each iteration;
    otherwise measurements keep their hit while it points at a survivor and
    only freed measurements are reassigned.
    """
    m = first_hits.size
    alive = np.ones(k, dtype=bool)
    hits = first_hits.copy()
    counts = np.bincount(hits, minlength=k) if m else np.zeros(k, dtype=np.int64)
    first_round_failures = int((counts < 2).sum())
    iterations = 0
    while alive.any():
        iterations += 1
        recovered = (counts >= 2) & alive
        if not recovered.any():
            break
        alive &= ~recovered
        survivors = np.flatnonzero(alive)
        if survivors.size == 0 or m == 0:
            break
        if fresh:
            hits = survivors[rng.integers(0, survivors.size, m)]
        else:
            freed = ~alive[hits]
            if freed.any():
                hits[freed] = survivors[rng.integers(0, survivors.size, int(freed.sum()))]
        counts = np.where(alive, np.bincount(hits, minlength=k), 0)
    return IdealResult(
        recovered_count=int(k - alive.sum()),
        iterations=iterations,
        first_round_failures=first_round_failures,
    )


def simulate_ideal(inst: IdealInstance) -> IdealResult:
    """One run of the idealized recovery; hit conservation holds each round."""
    rng = Generator(PCG64(SeedSequence(int(inst.seed) & (2**64 - 1), spawn_key=(0x1D,))))
    first = rng.integers(0, inst.k, inst.m)
    return recover_from_hits(first, inst.k, inst.fresh_projections, rng)


def trial_seeds(seed: int, trials: int):
    """Per-trial instances derive from (seed, trial index) for determinism."""
    return [int(s) for s in SeedSequence(int(seed) & (2**64 - 1)).generate_state(trials, np.uint64)]


def failure_frequency(k: int, m: int, trials: int, seed: int, fresh: bool = True) -> float:
    """Empirical per-coordinate first-iteration failure rate, pooled over
    coordinates; its expectation is exactly ``ideal_failure_prob(k, m)``."""
    seeds = trial_seeds(seed, trials)
    failures = 0
    for s in seeds:
        res = simulate_ideal(IdealInstance(k=k, m=m, fresh_projections=fresh, seed=s))
        failures += res.first_round_failures
    return failures / (trials * k)


def ideal_sweep(
    k_range,
    delta: float,
    trials: int,
    seed: int,
    ratios=None,
    fresh: bool = True,
) -> list[dict]:
    """Full-recovery rates over an M/K grid, next to the analytic total.

    Returns one row per (K, M) pair with the empirical full-recovery rate
    across ``trials`` independent instances.
    """
    if trials < 100:
        raise ValueError("use at least 100 trials")
    if ratios is None:
        ratios = [0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0]
    rows = []
    for k in k_range:
        predicted = ideal_total_m(k, delta)
        for ratio in ratios:
            m = int(round(ratio * k))
            seeds = trial_seeds((seed << 20) ^ (k << 10) ^ m, trials)
            full = 0
            for s in seeds:
                res = simulate_ideal(IdealInstance(k=k, m=m, fresh_projections=fresh, seed=s))
                full += res.recovered_count == k
            rows.append(
                {
                    "k": k,
                    "m": m,
                    "m_over_k": m / k,
                    "full_recovery_rate": full / trials,
                    "first_round_failure_prob": ideal_failure_prob(k, m),
                    "predicted_total_m": predicted,
                }
            )
    return rows
