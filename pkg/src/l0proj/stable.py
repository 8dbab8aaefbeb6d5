"""Alpha-stable variate generation and the seeded on-demand design matrix.

Entries of the design matrix are symmetric alpha-stable S(alpha, 1) variates
produced by the Chambers-Mallows-Stuck (CMS) transform of one uniform and one
exponential draw.  Every entry is a pure function of
(master_seed, row, column, retry), so the matrix never needs to be stored:
any entry can be regenerated on demand, in any order, which is what the
streaming (turnstile) encoder relies on.

Seeding scheme
--------------
Row ``i`` owns the PCG64 stream ``SeedSequence(master_seed, spawn_key=(i,))``.
The base draws for entry ``(i, j)`` are the two uniforms at positions
``2j, 2j+1`` of that stream; ``u = (v0 - 1/2) * pi`` and ``w = -log(1 - v1)``.
Draws that would hit an endpoint singularity, produce a zero, or overflow
past ``overflow_cap`` are deterministically resampled from the dedicated
stream ``SeedSequence(master_seed, spawn_key=(i, j, retry))``; the retry
counter makes the replacement reproducible and order-independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.random import PCG64, Generator, SeedSequence

DEFAULT_ALPHA = 0.03
DEFAULT_OVERFLOW_CAP = 1e300
_MAX_RETRIES = 64
_SEED_MASK = (1 << 64) - 1


def _norm_seed(seed: int) -> int:
    return int(seed) & _SEED_MASK


@dataclass(frozen=True)
class StableParams:
    """Stability index and the overflow cap used by the entry sampler."""

    alpha: float = DEFAULT_ALPHA
    overflow_cap: float = DEFAULT_OVERFLOW_CAP

    def __post_init__(self):
        if not 0.0 < self.alpha <= 2.0:
            raise ValueError(f"alpha must be in (0, 2], got {self.alpha}")
        if not (math.isfinite(self.overflow_cap) and self.overflow_cap > 1.0):
            raise ValueError("overflow_cap must be finite and > 1")


@dataclass(frozen=True)
class SparseSignal:
    """Length-``n`` real vector stored as (support indices, values)."""

    n: int
    support: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        support = np.asarray(self.support, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.float64)
        if support.shape != values.shape or support.ndim != 1:
            raise ValueError("support and values must be 1-d and equal length")
        if support.size and (support.min() < 0 or support.max() >= self.n):
            raise ValueError("support index out of range")
        if support.size != np.unique(support).size:
            raise ValueError("support indices must be distinct")
        order = np.argsort(support, kind="stable")
        object.__setattr__(self, "support", support[order])
        object.__setattr__(self, "values", values[order])

    @classmethod
    def from_dense(cls, x) -> "SparseSignal":
        x = np.asarray(x, dtype=np.float64)
        support = np.flatnonzero(x)
        return cls(n=x.size, support=support, values=x[support])

    def dense(self) -> np.ndarray:
        x = np.zeros(self.n)
        x[self.support] = self.values
        return x

    @property
    def k(self) -> int:
        return int(self.support.size)


def cms_transform(u, w, alpha):
    """CMS transform of ``u ~ unif(-pi/2, pi/2)`` and ``w ~ exp(1)``.

    Returns ``sin(alpha*u) / cos(u)**(1/alpha) * (cos(u - alpha*u)/w)**((1-alpha)/alpha)``,
    an S(alpha, 1) variate when the inputs have their nominal distributions.
    Raises ValueError if ``u`` is not strictly inside (-pi/2, pi/2) or ``w <= 0``.
    """
    u = np.asarray(u, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if np.any(np.abs(u) >= np.pi / 2):
        raise ValueError("u must lie strictly inside (-pi/2, pi/2)")
    if np.any(w <= 0.0):
        raise ValueError("w must be positive")
    z = _cms_raw(u, w, float(alpha))
    return float(z) if z.ndim == 0 else z


def _cms_raw(u, w, alpha):
    # No domain checks; callers handle capping/rejection.
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        return (
            np.sin(alpha * u)
            / np.cos(u) ** (1.0 / alpha)
            * (np.cos(u - alpha * u) / w) ** ((1.0 - alpha) / alpha)
        )


def scale_param(x: SparseSignal, alpha: float) -> float:
    """Scale of the stable law of ``sum_i x_i S_i``: ``(sum |x_i|^alpha)^(1/alpha)``."""
    if x.k == 0:
        return 0.0
    power_sum = float(np.sum(np.abs(x.values) ** alpha))
    if power_sum == 0.0:
        return 0.0
    return power_sum ** (1.0 / alpha)


@dataclass(frozen=True)
class SeededDesignMatrix:
    """Virtual N x M matrix of stable entries, defined by (seed, alpha, N, M).

    ``entry(i, j)`` is a pure function of its arguments; full rows are
    generated vectorised and agree bit for bit with entry-wise queries.
    """

    master_seed: int
    n: int
    m: int
    params: StableParams = field(default_factory=StableParams)

    def __post_init__(self):
        if self.n <= 0 or self.m <= 0:
            raise ValueError("matrix dimensions must be positive")
        object.__setattr__(self, "master_seed", _norm_seed(self.master_seed))

    @property
    def alpha(self) -> float:
        return self.params.alpha

    def _row_generator(self, i: int) -> Generator:
        return Generator(PCG64(SeedSequence(self.master_seed, spawn_key=(int(i),))))

    def base_draws(self, i: int, j: int) -> tuple[float, float]:
        """First-attempt ``(u, w)`` pair for entry (i, j); independent of alpha."""
        self._check_index(i, j)
        bg = PCG64(SeedSequence(self.master_seed, spawn_key=(int(i),)))
        bg.advance(2 * int(j))
        v = Generator(bg).random(2)
        return (v[0] - 0.5) * np.pi, -np.log1p(-v[1])

    def _check_index(self, i: int, j: int) -> None:
        if not (0 <= i < self.n and 0 <= j < self.m):
            raise IndexError(f"entry ({i}, {j}) outside {self.n} x {self.m}")

    def _retry_entry(self, i: int, j: int) -> float:
        alpha, cap = self.params.alpha, self.params.overflow_cap
        for retry in range(1, _MAX_RETRIES + 1):
            ss = SeedSequence(self.master_seed, spawn_key=(int(i), int(j), retry))
            v = Generator(PCG64(ss)).random(2)
            z = self._accept(v[0], v[1], alpha, cap)
            if z is not None:
                return z
        raise RuntimeError(
            f"entry ({i}, {j}) rejected {_MAX_RETRIES} times; generator is broken"
        )

    @staticmethod
    def _accept(v0: float, v1: float, alpha: float, cap: float):
        if v0 == 0.0 or v1 == 0.0:
            return None
        u = (v0 - 0.5) * np.pi
        w = -np.log1p(-v1)
        if w <= 0.0:
            return None
        z = float(_cms_raw(np.float64(u), np.float64(w), alpha))
        if not math.isfinite(z) or z == 0.0 or abs(z) > cap:
            return None
        return z

    def entry(self, i: int, j: int) -> float:
        """Entry (i, j); finite, nonzero, |entry| <= overflow_cap."""
        self._check_index(i, j)
        bg = PCG64(SeedSequence(self.master_seed, spawn_key=(int(i),)))
        bg.advance(2 * int(j))
        v = Generator(bg).random(2)
        z = self._accept(v[0], v[1], self.params.alpha, self.params.overflow_cap)
        if z is None:
            return self._retry_entry(i, j)
        return z

    def row(self, i: int) -> np.ndarray:
        return self.rows([i])[0]

    def rows(self, indices) -> np.ndarray:
        """Rows ``indices`` as a dense ``(len(indices), m)`` array."""
        indices = np.asarray(indices, dtype=np.int64)
        alpha, cap = self.params.alpha, self.params.overflow_cap
        out = np.empty((indices.size, self.m))
        for pos, i in enumerate(indices):
            self._check_index(int(i), 0)
            v = self._row_generator(int(i)).random(2 * self.m)
            v0, v1 = v[0::2], v[1::2]
            u = (v0 - 0.5) * np.pi
            w = -np.log1p(-v1)
            z = _cms_raw(u, w, alpha)
            bad = (
                ~np.isfinite(z)
                | (z == 0.0)
                | (np.abs(z) > cap)
                | (v0 == 0.0)
                | (v1 == 0.0)
            )
            for j in np.flatnonzero(bad):
                z[j] = self._retry_entry(int(i), int(j))
            out[pos] = z
        return out

    def materialize(self) -> np.ndarray:
        """Full dense matrix; intended for desk-scale N only."""
        return self.rows(np.arange(self.n))

    def identity(self) -> tuple[int, float, int, int]:
        return (self.master_seed, self.params.alpha, self.n, self.m)
