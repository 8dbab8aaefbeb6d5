"""Linear measurement of sparse signals, turnstile updates, and noise models.

Measurements are ``y_j = sum_i x_i * S[i, j]`` against a seeded stable design
matrix.  Because the matrix is regenerable entry by entry, a measurement
vector can be maintained incrementally under additive coordinate updates
(the turnstile streaming model) without ever storing the matrix.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, replace

import numpy as np
from numpy.random import PCG64, Generator, SeedSequence

from .stable import SeededDesignMatrix, SparseSignal, StableParams

_FMT = "{:.17g}"  # exact decimal round-trip for IEEE doubles


@dataclass(frozen=True)
class MeasurementVector:
    """Length-M measurement vector plus the design-matrix identity and noise tag."""

    y: np.ndarray
    matrix: SeededDesignMatrix
    noise_desc: str = "none"

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64)
        if y.ndim != 1 or y.size != self.matrix.m:
            raise ValueError("y must be 1-d of length matrix.m")
        object.__setattr__(self, "y", y)

    @property
    def m(self) -> int:
        return int(self.y.size)


def measure(x: SparseSignal, mat: SeededDesignMatrix) -> MeasurementVector:
    """Noiseless measurements; touches only the support rows (O(K*M)).

    The accumulation runs in ascending support order so the floating-point
    result is identical across runs and thread counts.
    """
    if x.n != mat.n:
        raise ValueError(f"signal dimension {x.n} != matrix rows {mat.n}")
    y = np.zeros(mat.m)
    if x.k:
        rows = mat.rows(x.support)  # support is stored sorted ascending
        for value, row in zip(x.values, rows):
            y += value * row
    return MeasurementVector(y=y, matrix=mat)


def turnstile_update(meas: MeasurementVector, i: int, delta: float) -> MeasurementVector:
    """Apply the stream update ``x_i += delta``: ``y_j += delta * S[i, j]``."""
    if not 0 <= i < meas.matrix.n:
        raise IndexError(f"index {i} out of range for n={meas.matrix.n}")
    if delta == 0.0:
        return replace(meas, y=meas.y.copy())
    return replace(meas, y=meas.y + delta * meas.matrix.row(i))


def add_noise(
    meas: MeasurementVector,
    sigma: float,
    noise_seed: int,
    scale_by_n: bool = False,
) -> MeasurementVector:
    """Add i.i.d. zero-mean Gaussian noise with standard deviation ``sigma``.

    ``scale_by_n=True`` uses variance ``sigma**2 * n`` instead, for the
    alternative convention that scales noise with the signal dimension.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0.0:
        return replace(meas, y=meas.y.copy())
    sd = sigma * np.sqrt(meas.matrix.n) if scale_by_n else sigma
    rng = Generator(PCG64(SeedSequence(int(noise_seed) & (2**64 - 1), spawn_key=(0x6E,))))
    noisy = meas.y + rng.normal(0.0, sd, meas.m)
    desc = f"additive(sigma={_FMT.format(sigma)};seed={int(noise_seed)};scale_by_n={int(scale_by_n)})"
    return replace(meas, y=noisy, noise_desc=_join_noise(meas.noise_desc, desc))


def apply_multiplicative(meas: MeasurementVector, rho) -> MeasurementVector:
    """Scale each measurement: ``y_j *= rho_j`` with all ``rho_j > 0``."""
    rho = np.broadcast_to(np.asarray(rho, dtype=np.float64), (meas.m,))
    if np.any(rho <= 0.0) or not np.all(np.isfinite(rho)):
        raise ValueError("all rho_j must be positive and finite")
    desc = f"multiplicative(min={_FMT.format(rho.min())};max={_FMT.format(rho.max())})"
    return replace(meas, y=meas.y * rho, noise_desc=_join_noise(meas.noise_desc, desc))


def _join_noise(old: str, new: str) -> str:
    return new if old == "none" else f"{old}+{new}"


def save_measurements(meas: MeasurementVector, path) -> None:
    """Write the measurement CSV: a provenance header block then M rows of y."""
    with open(path, "w", newline="") as fh:
        fh.write(dumps_measurements(meas))


def dumps_measurements(meas: MeasurementVector) -> str:
    mat = meas.matrix
    buf = io.StringIO()
    buf.write("seed,alpha,n,m,noise\n")
    buf.write(
        f"{mat.master_seed},{_FMT.format(mat.params.alpha)},{mat.n},{mat.m},{meas.noise_desc}\n"
    )
    buf.write("j,y\n")
    for j, v in enumerate(meas.y):
        buf.write(f"{j},{_FMT.format(v)}\n")
    return buf.getvalue()


def load_measurements(path) -> MeasurementVector:
    with open(path, "r", newline="") as fh:
        return loads_measurements(fh.read())


def loads_measurements(text: str) -> MeasurementVector:
    lines = text.splitlines()
    if len(lines) < 3 or lines[0] != "seed,alpha,n,m,noise":
        raise ValueError("not a measurement CSV")
    seed_s, alpha_s, n_s, m_s, noise = lines[1].split(",", 4)
    mat = SeededDesignMatrix(
        master_seed=int(seed_s),
        n=int(n_s),
        m=int(m_s),
        params=StableParams(alpha=float(alpha_s)),
    )
    if lines[2] != "j,y":
        raise ValueError("missing measurement header row")
    y = np.empty(mat.m)
    rows = lines[3 : 3 + mat.m]
    if len(rows) != mat.m:
        raise ValueError(f"expected {mat.m} measurement rows, found {len(rows)}")
    for line in rows:
        j_s, v_s = line.split(",")
        y[int(j_s)] = float(v_s)
    return MeasurementVector(y=y, matrix=mat, noise_desc=noise)
