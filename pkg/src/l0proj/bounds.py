"""Closed-form probability bounds and sample-size formulas for the decoder.

Everything here evaluates analytic expressions; nothing simulates except
``f_monte_carlo``, which exists as an independent oracle for the closed-form
bracketing of ``F_alpha``.

Notation used throughout:

* ``F_alpha(t) = Pr(|S2/S1|^(alpha/(1-alpha)) <= t)`` for i.i.d. stable
  ``S1, S2``; the ratio law that drives every detection bound.
* ``psi = (epsilon/theta)^(alpha/(1-alpha))`` — detection scale; the
  false-positive probability of the minimum filter decays like
  ``(1+psi)^-M``.
* ``gamma_exp = (1-alpha)/alpha`` — the tail exponent; large for small alpha.
* ``eta(k, gamma_exp, c0)`` — the gap-collision constant: the probability
  scale at which the (k+1)-th nearest observation pair can beat the true
  cluster's gap.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.random import PCG64, Generator, SeedSequence
from scipy import stats as _stats
from scipy.special import gamma as _gamma

from .stable import _cms_raw

_BISECT_STEPS = 320
_ETA_EXACT_MAX_K = 50  # solve the defining inequality exactly up to here


def psi_value(epsilon: float, theta: float, alpha: float) -> float:
    """Detection-scale parameter ``(epsilon/theta)^(alpha/(1-alpha))``."""
    return (epsilon / theta) ** (alpha / (1.0 - alpha))


def k_star(epsilon: float, theta: float, alpha: float) -> float:
    """Effective sparsity ``1/psi - 1`` seen by the gap estimator."""
    return 1.0 / psi_value(epsilon, theta, alpha) - 1.0


def f_lower(t: float) -> float:
    """Lower bound on ``F_alpha(t)``: ``(1/2)/(1+1/t)``, sharpened to
    ``1/(1+1/t)`` for ``t <= 1/3``; 0 at ``t = 0``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0.0:
        return 0.0
    lower = 0.5 * t / (1.0 + t)
    if t <= 1.0 / 3.0:
        lower = max(lower, t / (1.0 + t))
    return lower


def mu2_constant(alpha: float) -> float:
    """``1 / cos(pi * alpha / (2 - 2 alpha))``."""
    return 1.0 / math.cos(math.pi * alpha / (2.0 - 2.0 * alpha))


def mu1_constant(alpha: float) -> float:
    """``Gamma(1/(2-2a)) * Gamma((1-3a)/(2-2a)) / (pi * Gamma((2-3a)/(2-2a)))``."""
    d = 2.0 - 2.0 * alpha
    return (
        float(_gamma(1.0 / d))
        * float(_gamma((1.0 - 3.0 * alpha) / d))
        / (math.pi * float(_gamma((2.0 - 3.0 * alpha) / d)))
    )


def c_alpha(alpha: float) -> float:
    """Constant of the upper bound on ``F_alpha``; -> 1 + 1/pi as alpha -> 0."""
    if not 0.0 < alpha < 1.0 / 3.0:
        raise ValueError("alpha must be in (0, 1/3)")
    mu1 = mu1_constant(alpha)
    mu2 = mu2_constant(alpha)
    return mu1 * mu2 + (
        (mu2 * (1.0 - alpha)) ** ((1.0 - alpha) / (1.0 + alpha))
        * ((1.0 - alpha) / alpha) ** (2.0 * alpha / (1.0 + alpha))
        * ((1.0 + alpha) / (1.0 - alpha))
        / math.pi
    )


def f_upper(t: float, alpha: float) -> float:
    """Upper bound ``min(1, C_a * t^((1-a)/(1+a)) * max(1, t^(2a/(1+a))))``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0.0:
        return 0.0
    value = c_alpha(alpha) * t ** ((1.0 - alpha) / (1.0 + alpha))
    if t > 1.0:
        value *= t ** (2.0 * alpha / (1.0 + alpha))
    return min(1.0, value)


def f_monte_carlo(t, alpha: float, n: int, seed: int):
    """Empirical ``F_alpha`` over ``n`` CMS-sampled ratio pairs.

    ``t`` may be a scalar or a grid; the same sample set is reused across the
    grid.  Returns ``(estimate, standard_error)`` with binomial errors.
    """
    if n < 10**4:
        raise ValueError("use at least 1e4 samples")
    rng = Generator(PCG64(SeedSequence(int(seed) & (2**64 - 1), spawn_key=(0xF,))))
    u = rng.uniform(-np.pi / 2, np.pi / 2, (2, n))
    w = rng.standard_exponential((2, n))
    s = _cms_raw(u, w, alpha)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ratio = np.abs(s[1] / s[0]) ** (alpha / (1.0 - alpha))
    t_arr = np.atleast_1d(np.asarray(t, dtype=np.float64))
    est = np.array([(ratio <= ti).mean() for ti in t_arr])
    se = np.sqrt(est * (1.0 - est) / n)
    if np.isscalar(t) or np.asarray(t).ndim == 0:
        return float(est[0]), float(se[0])
    return est, se


def _bisect_min_u(satisfied) -> float:
    """Smallest ``u`` in (0, 1) with ``satisfied(u)`` true, for predicates
    that are monotone (false below, true above).  Returns 1.0 if even
    ``u -> 1`` fails.  Converges to ~1e-12 relative precision so the
    returned point satisfies the predicate and slightly smaller points
    do not."""
    if not satisfied(1.0 - 1e-16):
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if satisfied(mid):
            hi = mid
        else:
            lo = mid
        if lo > 0.0 and (hi - lo) <= min(1e-10, 1e-12 * hi):
            break
    return hi


def eta(k: int, gamma_exp: float, c0: float = 2.0) -> float:
    """Gap-collision constant: smallest ``u`` in (0,1) with
    ``c0 (1 - (u/2k)^(1/k))^gamma + (1 - u/2k)^gamma <= 1``; 1.0 if none."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 1.0 <= c0 <= 2.0:
        raise ValueError("c0 must lie in [1, 2]")

    def satisfied(u: float) -> bool:
        root = math.exp(math.log(u / (2.0 * k)) / k)  # (u/2k)^(1/k) in (0,1)
        first = 0.0 if root >= 1.0 else c0 * math.exp(gamma_exp * math.log1p(-root))
        second = math.exp(gamma_exp * math.log1p(-u / (2.0 * k)))
        return first + second <= 1.0

    return _bisect_min_u(satisfied)


def eta_upper(k: int, gamma_exp: float, c0: float = 2.0) -> float:
    """Numerically stable upper bound on ``eta``: smallest ``u`` with
    ``log c0 + gamma log log(2k/u) - gamma log k + log(1 + 2k/(u gamma)) <= 0``."""
    if k < 1:
        raise ValueError("k must be >= 1")

    def satisfied(u: float) -> bool:
        lhs = (
            math.log(c0)
            + gamma_exp * math.log(math.log(2.0 * k / u))
            - gamma_exp * math.log(k)
            + math.log1p(2.0 * k / (u * gamma_exp))
        )
        return lhs <= 0.0

    return _bisect_min_u(satisfied)


def binomial_cdf(x: int, n: int, p: float) -> float:
    """``Pr(Binomial(n, p) <= x)``."""
    return float(_stats.binom.cdf(x, n, p))


def _eta_for_sum(k: int, gamma_exp: float) -> float:
    if k <= _ETA_EXACT_MAX_K:
        return eta(k, gamma_exp, 2.0)
    return eta_upper(k, gamma_exp, 2.0)


def gap_error_bound(m: int, kstar: float, alpha: float) -> float:
    """Per-coordinate error-probability bound for the gap estimator.

    Minimizes, over integer ``k0 >= 2`` and ``a0 > 1`` with
    ``a0 * k0 <= m / kstar``,

        ``Pr(Binomial(m, a0 k0 / m) < k0) + sum_{k=k0}^{m-2} (1 + 1/2k) eta_k``

    using the exact ``eta`` for ``k <= 50`` and its stable upper bound
    beyond.  The collision constants are only defined for ``k >= 2``, which
    is why the ``k0`` search starts there.  Returns 1.0 when no admissible
    ``(a0, k0)`` exists (in particular whenever ``m <= 2 kstar``).
    """
    if m <= 0 or kstar <= 0:
        raise ValueError("m and kstar must be positive")
    ratio = m / kstar
    if ratio <= 2.0 or m < 3:
        return 1.0
    gamma_exp = (1.0 - alpha) / alpha

    k0_max = min(int(math.floor(ratio - 1e-12)), m - 2)
    if k0_max < 2:
        return 1.0

    eta_vals: dict[int, float] = {}

    def eta_k(k: int) -> float:
        if k not in eta_vals:
            eta_vals[k] = _eta_for_sum(k, gamma_exp)
        return eta_vals[k]

    # Suffix sums of (1 + 1/2k) eta_k from each candidate k0; terms decay
    # fast, so stop once they are negligible (past the exact/upper switch).
    tails = {}
    tail = 0.0
    upper_k = m - 2
    k = k0_max
    # accumulate from k0_max down to 2, reusing the shared suffix beyond k0_max
    shared = 0.0
    for kk in range(k0_max, upper_k + 1):
        term = (1.0 + 0.5 / kk) * eta_k(kk)
        shared += term
        if term < 1e-16 and kk > _ETA_EXACT_MAX_K + 1:
            break
    tails[k0_max] = shared
    for k0 in range(k0_max - 1, 1, -1):
        tails[k0] = tails[k0 + 1] + (1.0 + 0.5 / k0) * eta_k(k0)

    best = 1.0
    for k0 in range(2, k0_max + 1):
        a_max = ratio / k0
        if a_max <= 1.0:
            continue
        for a0 in _a0_grid(a_max):
            q = a0 * k0 / m
            b = binomial_cdf(k0 - 1, m, q)
            best = min(best, b + tails[k0])
    return min(1.0, max(0.0, best))


def _a0_grid(a_max: float) -> list[float]:
    # geometric grid from 1.05 up to a_max, always including a_max itself
    if a_max <= 1.05:
        return [a_max]
    grid = []
    a = 1.05
    while a < a_max:
        grid.append(a)
        a *= 1.25
    grid.append(a_max)
    return grid


def fp_bound(m: int, psi: float) -> float:
    """False-positive bound for the minimum filter: ``(1 + psi)^-M``."""
    if psi > 1.0 / 3.0:
        raise ValueError("bound assumes psi <= 1/3")
    if psi < 0:
        raise ValueError("psi must be nonnegative")
    return float((1.0 + psi) ** (-m))


def required_m(n: int, k: int, delta: float, psi: float) -> int:
    """Measurements ensuring expected false positives <= delta:
    ``ceil(log((N-K)/delta) / log(1+psi))``."""
    if psi <= 0:
        raise ValueError("psi must be positive")
    return int(math.ceil(math.log((n - k) / delta) / math.log1p(psi)))


def m0(n: int, k: int, delta: float) -> float:
    """Reference sample size ``K log((N-K)/delta)`` (uses ``psi ~ 1/K``)."""
    return k * math.log((n - k) / delta)


def fn_bound(m: int, x_abs: float, epsilon: float, theta_i: float, alpha: float) -> float:
    """False-negative bound for a nonzero coordinate of magnitude ``x_abs``:

    ``1 - [1 - (3/4) ((x+eps)/theta_i)^(a/(1+a))
                   (1 - ((x-eps)/(x+eps))^(a/(1-a)))]^M``
    """
    if alpha > 0.05:
        raise ValueError("bound assumes alpha <= 0.05")
    t_outer = ((x_abs + epsilon) / theta_i) ** (alpha / (1.0 - alpha))
    if t_outer >= 1.0 / 3.0:
        raise ValueError("bound assumes ((x+eps)/theta_i)^(a/(1-a)) < 1/3")
    lead = 0.75 * ((x_abs + epsilon) / theta_i) ** (alpha / (1.0 + alpha))
    inner = 1.0 - abs((x_abs - epsilon) / (x_abs + epsilon)) ** (alpha / (1.0 - alpha))
    per_obs = lead * inner
    return float(min(1.0, max(0.0, 1.0 - (1.0 - per_obs) ** m)))


def suggest_epsilon(
    n: int,
    k: int,
    delta: float,
    alpha: float,
    magnitudes=None,
    cap: float = 1e-3,
) -> float:
    """Detection threshold keeping total false negatives below ``delta``.

    For sign signals (``magnitudes=None``) this is
    ``delta / (1.5 alpha K log((N-K)/delta))``; for a general magnitude
    profile the ``K`` factor is replaced by ``sum_i 1/|x_i|``.  As alpha
    vanishes the constraint disappears; the recommendation is capped.
    """
    log_term = math.log((n - k) / delta)
    if magnitudes is None:
        inv_sum = float(k)
    else:
        mags = np.abs(np.asarray(magnitudes, dtype=np.float64))
        if np.any(mags == 0):
            raise ValueError("magnitude profile must be nonzero")
        inv_sum = float(np.sum(1.0 / mags))
    denom = 1.5 * alpha * inv_sum * log_term
    if denom <= 0.0:
        return cap
    return min(cap, delta / denom)


def multiplicative_fp_bound(m: int, psi: float, rho, alpha: float) -> float:
    """False-positive bound under per-measurement scaling ``rho_j``:
    ``prod_j 1 / (1 + psi / rho_j^(a/(1-a)))``."""
    rho = np.broadcast_to(np.asarray(rho, dtype=np.float64), (m,))
    scaled = psi / rho ** (alpha / (1.0 - alpha))
    if np.any(scaled >= 1.0 / 3.0):
        raise ValueError("bound assumes psi / rho_j^(a/(1-a)) < 1/3")
    return float(np.prod(1.0 / (1.0 + scaled)))


def ideal_failure_prob(k: int, m: int) -> float:
    """Probability a coordinate collects < 2 of M uniform hits:
    ``(1-1/K)^M + (M/K)(1-1/K)^(M-1)``."""
    if k < 1 or m < 0:
        raise ValueError("need k >= 1 and m >= 0")
    q = 1.0 - 1.0 / k
    if m == 0:
        return 1.0
    return float(q**m + (m / k) * q ** (m - 1))


def ideal_required_m(k: int, delta: float) -> int:
    """Smallest M with ``ideal_failure_prob(k, M) <= delta``."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must be in (0, 1)")
    lo, hi = 0, max(8, int(4 * k * math.log(1.0 / delta)) + 8)
    while ideal_failure_prob(k, hi) > delta:
        hi *= 2
    while lo < hi:
        mid = (lo + hi) // 2
        if ideal_failure_prob(k, mid) <= delta:
            hi = mid
        else:
            lo = mid + 1
    return lo


def ideal_total_m(k: int, delta: float) -> float:
    """Total measurements for the fresh-projection iterative scheme:
    ``1.6 K log(1/delta) / (1 - delta)`` (intended for delta <= 0.05)."""
    return 1.6 * k * math.log(1.0 / delta) / (1.0 - delta)
