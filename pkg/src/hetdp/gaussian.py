"""Gaussian noise calibration for (epsilon, delta)-differential privacy.

Two calibrations are provided. The classical closed form
``sigma = delta_l2 * sqrt(2 ln(1.25/delta)) / epsilon`` is simple but only
valid for ``0 < epsilon < 1``. The analytic calibration numerically inverts
the exact privacy condition of the Gaussian mechanism,

    achieved_delta(sigma) = Phi(delta_l2/(2 sigma) - epsilon sigma/delta_l2)
                            - e^epsilon * Phi(-delta_l2/(2 sigma) - epsilon sigma/delta_l2),

is valid for every ``epsilon > 0``, and always needs less noise than the
classical form on the latter's validity range.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

_SQRT2 = math.sqrt(2.0)
_MAX_SOLVER_STEPS = 200


class Mechanism(enum.Enum):
    """Which calibration produced a noise scale."""

    CLASSICAL = "classical"
    ANALYTIC = "analytic"


class NoiseBranch(enum.Enum):
    """Side of the analytic calibration's branch point the solver ran on.

    LOW_NOISE applies when the requested delta is at least the branch-point
    value delta0 (noise ratio alpha <= 1); HIGH_NOISE when it is below
    (alpha > 1).
    """

    LOW_NOISE = "low_noise"
    HIGH_NOISE = "high_noise"


class ConvergenceError(RuntimeError):
    """Root search exceeded its iteration cap; carries the last bracket."""

    def __init__(self, message: str, bracket: tuple[float, float]):
        super().__init__(f"{message} (bracket [{bracket[0]!r}, {bracket[1]!r}])")
        self.bracket = bracket


@dataclass(frozen=True)
class SensitivitySpec:
    """L2 sensitivity of an n-client, d-dimensional bounded-vector release.

    Attributes:
        delta_l2: L2 sensitivity of the released function.
        n: number of contributing vectors.
        d: vector dimension.
    """

    delta_l2: float
    n: int
    d: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"client count must be >= 1, got {self.n}")
        if self.d < 1:
            raise ValueError(f"dimension must be >= 1, got {self.d}")
        if not (math.isfinite(self.delta_l2) and self.delta_l2 > 0):
            raise ValueError(f"L2 sensitivity must be positive and finite, got {self.delta_l2!r}")

    @classmethod
    def from_shape(cls, n: int, d: int) -> "SensitivitySpec":
        """Default sensitivity sqrt(d)/n of the mean of n vectors in [0,1]^d."""
        if n < 1 or d < 1:
            raise ValueError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
        return cls(delta_l2=math.sqrt(d) / n, n=n, d=d)


@dataclass(frozen=True)
class PrivacyBudget:
    """Total (epsilon, delta) budget and its division into per-release parts.

    The split is a tuple of (epsilon_i, delta_i) pairs, one per noisy release;
    parts are consumed left to right by the estimators.
    """

    epsilon: float
    delta: float
    split: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValueError(f"epsilon must be positive and finite, got {self.epsilon!r}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta!r}")
        if not self.split:
            raise ValueError("budget split needs at least one part")
        for i, (eps_i, delta_i) in enumerate(self.split):
            if not (math.isfinite(eps_i) and eps_i > 0):
                raise ValueError(f"split part {i} has invalid epsilon {eps_i!r}")
            if not 0.0 < delta_i < 1.0:
                raise ValueError(f"split part {i} has delta {delta_i!r} outside (0, 1)")
        eps_sum = math.fsum(e for e, _ in self.split)
        delta_sum = math.fsum(d for _, d in self.split)
        if abs(eps_sum - self.epsilon) > 1e-9 * self.epsilon:
            raise ValueError(f"split epsilons sum to {eps_sum!r}, expected {self.epsilon!r}")
        if abs(delta_sum - self.delta) > 1e-9 * self.delta:
            raise ValueError(f"split deltas sum to {delta_sum!r}, expected {self.delta!r}")

    @classmethod
    def equal_split(cls, epsilon: float, delta: float, parts: int) -> "PrivacyBudget":
        """Divide (epsilon, delta) into `parts` equal shares.

        The last share is written as the remainder so the shares sum back to
        the total exactly in floating point.
        """
        if parts < 1:
            raise ValueError(f"parts must be >= 1, got {parts}")
        eps_part = epsilon / parts
        delta_part = delta / parts
        split = [(eps_part, delta_part)] * (parts - 1)
        split.append((epsilon - (parts - 1) * eps_part, delta - (parts - 1) * delta_part))
        return cls(epsilon=epsilon, delta=delta, split=tuple(split))

    @classmethod
    def from_fractions(
        cls, epsilon: float, delta: float, fractions: tuple[float, ...]
    ) -> "PrivacyBudget":
        """Divide (epsilon, delta) according to positive fractions summing to 1."""
        if not fractions:
            raise ValueError("need at least one fraction")
        if any(not (math.isfinite(f) and f > 0) for f in fractions):
            raise ValueError(f"fractions must all be positive, got {fractions!r}")
        if abs(math.fsum(fractions) - 1.0) > 1e-9:
            raise ValueError(f"fractions must sum to 1, got {math.fsum(fractions)!r}")
        split = [(epsilon * f, delta * f) for f in fractions[:-1]]
        eps_rest = epsilon - math.fsum(e for e, _ in split)
        delta_rest = delta - math.fsum(d for _, d in split)
        split.append((eps_rest, delta_rest))
        return cls(epsilon=epsilon, delta=delta, split=tuple(split))


@dataclass(frozen=True)
class CalibrationResult:
    """Noise scale produced by a calibration, with solver internals.

    alpha, delta0, root and branch are populated by the analytic calibration
    only; sigma = alpha * delta_l2 / sqrt(2 epsilon) there.
    """

    mechanism: Mechanism
    sigma: float
    alpha: float | None = None
    delta0: float | None = None
    root: float | None = None
    branch: NoiseBranch | None = None


def std_normal_cdf(t: float) -> float:
    """Standard normal CDF, Phi(t) = (1 + erf(t/sqrt(2))) / 2.

    Args:
        t: finite evaluation point.

    Returns:
        Phi(t) in [0, 1]; exact 0.0 / 1.0 in the extreme tails.

    Raises:
        ValueError: if t is NaN or infinite.
    """
    if not math.isfinite(t):
        raise ValueError(f"standard normal CDF needs a finite argument, got {t!r}")
    return 0.5 * (1.0 + math.erf(t / _SQRT2))


def achieved_delta(sigma: float, delta_l2: float, epsilon: float) -> float:
    """Exact additive privacy slack of a Gaussian release at scale sigma.

    A Gaussian mechanism with this sigma and L2 sensitivity delta_l2 is
    (epsilon, delta)-private exactly when the returned value is <= delta.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")
    half_ratio = delta_l2 / (2.0 * sigma)
    shift = epsilon * sigma / delta_l2
    return std_normal_cdf(half_ratio - shift) - math.exp(epsilon) * std_normal_cdf(
        -half_ratio - shift
    )


def achieved_delta_low_noise(epsilon: float, v: float) -> float:
    """Privacy slack along the low-noise branch, parameterized by v >= 0.

    Nondecreasing in v; equals the branch-point slack delta0 at v = 0.
    """
    return std_normal_cdf(math.sqrt(epsilon * v)) - math.exp(epsilon) * std_normal_cdf(
        -math.sqrt(epsilon * (v + 2.0))
    )


def achieved_delta_high_noise(epsilon: float, u: float) -> float:
    """Privacy slack along the high-noise branch, parameterized by u >= 0.

    Nonincreasing in u; equals the branch-point slack delta0 at u = 0.
    """
    return std_normal_cdf(-math.sqrt(epsilon * u)) - math.exp(epsilon) * std_normal_cdf(
        -math.sqrt(epsilon * (u + 2.0))
    )


def _alpha_low_noise(v: float) -> float:
    # 1/(sqrt(1+v/2) + sqrt(v/2)) == sqrt(1+v/2) - sqrt(v/2), cancellation-free.
    return 1.0 / (math.sqrt(1.0 + 0.5 * v) + math.sqrt(0.5 * v))


def _alpha_high_noise(u: float) -> float:
    return math.sqrt(1.0 + 0.5 * u) + math.sqrt(0.5 * u)


def cgm_sigma(sens: SensitivitySpec, epsilon: float, delta: float) -> CalibrationResult:
    """Classical Gaussian calibration sigma = delta_l2 sqrt(2 ln(1.25/delta)) / epsilon.

    Args:
        sens: sensitivity of the release.
        epsilon: privacy parameter; the classical form is only valid below 1.
        delta: additive privacy parameter in (0, 1).

    Returns:
        CalibrationResult with mechanism CLASSICAL.

    Raises:
        ValueError: if epsilon >= 1 (outside the classical validity range;
            the analytic calibration covers arbitrary positive epsilon), or
            if epsilon <= 0 or delta is outside (0, 1).
    """
    if not (math.isfinite(epsilon) and epsilon > 0):
        raise ValueError(f"epsilon must be positive and finite, got {epsilon!r}")
    if epsilon >= 1:
        raise ValueError(
            f"classical calibration is only valid for epsilon < 1, got {epsilon!r}; "
            "use the analytic calibration for larger epsilon"
        )
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta!r}")
    sigma = sens.delta_l2 * math.sqrt(2.0 * math.log(1.25 / delta)) / epsilon
    return CalibrationResult(mechanism=Mechanism.CLASSICAL, sigma=sigma)


def agm_sigma(
    sens: SensitivitySpec, epsilon: float, delta: float, tol: float = 1e-12
) -> CalibrationResult:
    """Analytic Gaussian calibration: minimal sigma with achieved_delta <= delta.

    Solves achieved_delta(sigma) = delta by exponential bracketing plus
    bisection on a branch-dependent reparameterization
    sigma = alpha(x) * delta_l2 / sqrt(2 epsilon). The bisection evaluates the
    privacy slack through sigma itself, so the returned scale satisfies
    achieved_delta(sigma) <= delta bit-for-bit, with slack at most tol.

    Args:
        sens: sensitivity of the release.
        epsilon: privacy parameter, any positive value.
        delta: additive privacy parameter in (0, 1).
        tol: termination tolerance on delta - achieved_delta(sigma).

    Returns:
        CalibrationResult with mechanism ANALYTIC and solver internals
        (alpha, delta0, root, branch) populated.

    Raises:
        ValueError: on nonpositive epsilon, delta outside (0, 1), or tol <= 0.
        ConvergenceError: if the root search exceeds its iteration cap.
    """
    if not (math.isfinite(epsilon) and epsilon > 0):
        raise ValueError(f"epsilon must be positive and finite, got {epsilon!r}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta!r}")
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol!r}")

    delta_l2 = sens.delta_l2
    scale_unit = delta_l2 / math.sqrt(2.0 * epsilon)
    # alpha = 1 at the branch point on either side, so this is delta0.
    delta0 = achieved_delta(scale_unit, delta_l2, epsilon)

    if delta >= delta0:
        branch = NoiseBranch.LOW_NOISE
        alpha_of = _alpha_low_noise
    else:
        branch = NoiseBranch.HIGH_NOISE
        alpha_of = _alpha_high_noise

    def slack_gap(x: float) -> float:
        return achieved_delta(alpha_of(x) * scale_unit, delta_l2, epsilon) - delta

    if branch is NoiseBranch.LOW_NOISE:
        root = _largest_nonpositive(slack_gap, tol)
    else:
        root = _smallest_nonpositive(slack_gap, tol)

    alpha = alpha_of(root)
    return CalibrationResult(
        mechanism=Mechanism.ANALYTIC,
        sigma=alpha * scale_unit,
        alpha=alpha,
        delta0=delta0,
        root=root,
        branch=branch,
    )


def _largest_nonpositive(g, tol: float) -> float:
    """Largest x >= 0 with g(x) <= 0 for nondecreasing g with g(0) <= 0.

    Stops once -g(x) <= tol; the satisfying side of the bracket is returned.
    """
    lo, g_lo = 0.0, g(0.0)
    if g_lo > 0.0:
        raise ConvergenceError("no satisfying point at the branch origin", (0.0, 0.0))
    steps = 0
    hi, g_hi = 1.0, g(1.0)
    while g_hi <= 0.0:
        lo, g_lo = hi, g_hi
        hi *= 2.0
        g_hi = g(hi)
        steps += 1
        if steps > _MAX_SOLVER_STEPS:
            raise ConvergenceError("bracketing exceeded the iteration cap", (lo, hi))
    while -g_lo > tol:
        mid = 0.5 * (lo + hi)
        g_mid = g(mid)
        if g_mid <= 0.0:
            lo, g_lo = mid, g_mid
        else:
            hi = mid
        steps += 1
        if steps > _MAX_SOLVER_STEPS:
            raise ConvergenceError("bisection exceeded the iteration cap", (lo, hi))
    return lo


def _smallest_nonpositive(g, tol: float) -> float:
    """Smallest x >= 0 with g(x) <= 0 for nonincreasing g with g(0) > 0.

    Stops once -g(x) <= tol; the satisfying side of the bracket is returned.
    """
    lo = 0.0
    steps = 0
    hi, g_hi = 1.0, g(1.0)
    while g_hi > 0.0:
        lo = hi
        hi *= 2.0
        g_hi = g(hi)
        steps += 1
        if steps > _MAX_SOLVER_STEPS:
            raise ConvergenceError("bracketing exceeded the iteration cap", (lo, hi))
    while -g_hi > tol:
        mid = 0.5 * (lo + hi)
        g_mid = g(mid)
        if g_mid <= 0.0:
            hi, g_hi = mid, g_mid
        else:
            lo = mid
        steps += 1
        if steps > _MAX_SOLVER_STEPS:
            raise ConvergenceError("bisection exceeded the iteration cap", (lo, hi))
    return hi


def sample_gaussian_vector(dim: int, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Draw an i.i.d. zero-mean Gaussian vector with standard deviation sigma.

    sigma = 0 returns the zero vector without consuming the stream, so
    zero-noise runs are exact.
    """
    if dim < 1:
        raise ValueError(f"dimension must be >= 1, got {dim}")
    if not (math.isfinite(sigma) and sigma >= 0):
        raise ValueError(f"sigma must be nonnegative and finite, got {sigma!r}")
    if sigma == 0.0:
        return np.zeros(dim)
    return rng.normal(0.0, sigma, size=dim)
