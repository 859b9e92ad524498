"""Algebra of one-dimensional Gaussian return distributions.

Everything the agent does with return distributions lives here: the affine
(discount-and-shift) transform used to build bootstrap targets, the closed-form
KL divergence used as the TD error, its analytic gradients, and the three ways
of fusing an ensemble of Gaussian estimates into one (Kalman, min-mean,
average).

Two fused-variance conventions are supported for the Kalman pair rule:

* ``"paper"`` (default): var = (1-k)*var_a + k*var_b, the harmonic-mean-like
  form.  Fusing a Gaussian with itself is the identity under this rule.
* ``"inverse_variance"``: var = (1-k)*var_a, the textbook Kalman update, which
  strictly shrinks the variance (fusing a Gaussian with itself halves it).

Scalar operations work on :class:`Gaussian1D`; the ``*_batch`` variants do the
same arithmetic vectorised over numpy arrays for the training hot path and are
tested element-for-element against the scalar forms.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

VARIANCE_MODES = ("paper", "inverse_variance")


class FusionStrategy(enum.Enum):
    """How an ensemble of Gaussian estimates is collapsed into one."""

    KALMAN = "kalman"
    MIN_MEAN = "min"
    AVERAGE = "average"

    @classmethod
    def from_string(cls, name: str) -> "FusionStrategy":
        for member in cls:
            if member.value == name:
                return member
        valid = ", ".join(m.value for m in cls)
        raise ValueError(f"unknown fusion strategy {name!r} (expected one of: {valid})")


@dataclass(frozen=True, slots=True)
class Gaussian1D:
    """A return distribution N(mean, std), std strictly positive and finite."""

    mean: float
    std: float

    def __post_init__(self):
        if not (math.isfinite(self.mean) and math.isfinite(self.std)):
            raise ValueError(f"Gaussian1D requires finite parameters, got ({self.mean}, {self.std})")
        if self.std <= 0.0:
            raise ValueError(f"Gaussian1D requires std > 0, got {self.std}")


def _check_variance_mode(variance: str) -> None:
    if variance not in VARIANCE_MODES:
        raise ValueError(f"unknown variance mode {variance!r} (expected one of: {VARIANCE_MODES})")


def affine(z: Gaussian1D, gamma: float, reward: float) -> Gaussian1D:
    """Discount-and-shift transform: the distribution of reward + gamma * Z.

    For Gaussian Z this is exact: the mean becomes gamma * mean + reward and
    the std shrinks to gamma * std.
    """
    if not (0.0 < gamma <= 1.0):
        raise ValueError(f"gamma must be in (0, 1], got {gamma}")
    if not math.isfinite(reward):
        raise ValueError(f"reward must be finite, got {reward}")
    return Gaussian1D(gamma * z.mean + reward, gamma * z.std)


def kl(p: Gaussian1D, q: Gaussian1D) -> float:
    """KL divergence D(p || q) between two 1-D Gaussians, closed form.

    The first argument is the current estimate, the second the target.
    """
    dmu = p.mean - q.mean
    qvar = q.std * q.std
    return math.log(q.std / p.std) + (p.std * p.std + dmu * dmu) / (2.0 * qvar) - 0.5


def kl_grad(p: Gaussian1D, q: Gaussian1D) -> tuple[float, float]:
    """Gradient of kl(p, q) with respect to p's mean and std; q held constant."""
    qvar = q.std * q.std
    dmean = (p.mean - q.mean) / qvar
    dstd = p.std / qvar - 1.0 / p.std
    return dmean, dstd


def fuse_pair(a: Gaussian1D, b: Gaussian1D, variance: str = "paper") -> tuple[Gaussian1D, float]:
    """Fuse two Gaussian estimates with the Kalman gain rule.

    Returns the fused Gaussian and the gain k = var_a / (var_a + var_b),
    which weights how far the fused mean moves from a toward b.
    """
    _check_variance_mode(variance)
    va = a.std * a.std
    vb = b.std * b.std
    k = va / (va + vb)
    if variance == "paper":
        v = (1.0 - k) * va + k * vb
    else:
        v = (1.0 - k) * va
    mean = a.mean + k * (b.mean - a.mean)
    return Gaussian1D(mean, math.sqrt(v)), k


def fuse_ensemble(
    zs: list[Gaussian1D] | tuple[Gaussian1D, ...],
    strategy: FusionStrategy,
    variance: str = "paper",
) -> Gaussian1D:
    """Collapse an ordered ensemble of Gaussians into one estimate.

    Kalman folds :func:`fuse_pair` left-to-right in list order.  The fold is
    deliberately order-fixed: the pair rule is not associative, so a fixed
    left fold is what makes results reproducible.  MIN_MEAN picks the member
    with the smallest mean (ties resolved to the lowest index) and keeps its
    std.  AVERAGE averages the means and the variances.
    """
    if len(zs) == 0:
        raise ValueError("cannot fuse an empty ensemble")
    if len(zs) == 1:
        return zs[0]
    if strategy is FusionStrategy.KALMAN:
        fused = zs[0]
        for z in zs[1:]:
            fused, _ = fuse_pair(fused, z, variance=variance)
        return fused
    if strategy is FusionStrategy.MIN_MEAN:
        best = zs[0]
        for z in zs[1:]:
            if z.mean < best.mean:
                best = z
        return best
    if strategy is FusionStrategy.AVERAGE:
        mean = sum(z.mean for z in zs) / len(zs)
        var = sum(z.std * z.std for z in zs) / len(zs)
        return Gaussian1D(mean, math.sqrt(var))
    raise ValueError(f"unknown fusion strategy: {strategy}")


def fuse_ensemble_grad(
    zs: list[Gaussian1D] | tuple[Gaussian1D, ...],
    variance: str = "paper",
) -> list[tuple[float, float]]:
    """Partials of the Kalman-folded mean w.r.t. every member's mean and std.

    The gains depend on the stds, so they are differentiated too (not frozen);
    the result is the exact reverse-mode derivative of the left fold.  Needed
    to push the policy gradient through the fused critic mean.
    """
    _check_variance_mode(variance)
    n = len(zs)
    if n == 0:
        raise ValueError("cannot differentiate an empty ensemble")
    means = np.array([z.mean for z in zs])
    stds = np.array([z.std for z in zs])
    dmu, dstd = fuse_kalman_grad_batch(means[:, None], stds[:, None], variance=variance)
    return [(float(dmu[i, 0]), float(dstd[i, 0])) for i in range(n)]


# ---------------------------------------------------------------------------
# Batched forms: identical arithmetic, vectorised over the sample axis.
# Shapes are (n_members, n_samples) in, (n_samples,) out.
# ---------------------------------------------------------------------------


def fuse_kalman_batch(
    means: np.ndarray, stds: np.ndarray, variance: str = "paper"
) -> tuple[np.ndarray, np.ndarray]:
    """Left fold of the Kalman pair rule down axis 0, vectorised over axis 1."""
    _check_variance_mode(variance)
    if means.shape[0] == 0:
        raise ValueError("cannot fuse an empty ensemble")
    varr = stds * stds
    mu_f = means[0].copy()
    v_f = varr[0].copy()
    for i in range(1, means.shape[0]):
        k = v_f / (v_f + varr[i])
        if variance == "paper":
            v_f = (1.0 - k) * v_f + k * varr[i]
        else:
            v_f = (1.0 - k) * v_f
        mu_f = mu_f + k * (means[i] - mu_f)
    return mu_f, np.sqrt(v_f)


def fuse_kalman_grad_batch(
    means: np.ndarray, stds: np.ndarray, variance: str = "paper"
) -> tuple[np.ndarray, np.ndarray]:
    """Reverse-mode gradients of the folded mean, batched.

    Returns (dmu, dstd), each shaped like ``means``: the partial of the fused
    mean with respect to each member's mean and std.
    """
    _check_variance_mode(variance)
    n, m = means.shape
    if n == 0:
        raise ValueError("cannot differentiate an empty ensemble")
    varr = stds * stds

    # Forward fold, recording the state entering each step and its gain.
    mu_hist = np.empty((n, m))
    v_hist = np.empty((n, m))
    k_hist = np.empty((n, m))  # k_hist[i] pairs state i-1 with member i
    mu_f = means[0].copy()
    v_f = varr[0].copy()
    mu_hist[0] = mu_f
    v_hist[0] = v_f
    for i in range(1, n):
        k = v_f / (v_f + varr[i])
        k_hist[i] = k
        if variance == "paper":
            v_f = (1.0 - k) * v_f + k * varr[i]
        else:
            v_f = (1.0 - k) * v_f
        mu_f = mu_f + k * (means[i] - mu_f)
        mu_hist[i] = mu_f
        v_hist[i] = v_f

    # Reverse pass: adjoints of the running (mean, variance) state.
    dmu = np.zeros((n, m))
    dvar = np.zeros((n, m))
    g_mu = np.ones(m)
    g_v = np.zeros(m)
    for i in range(n - 1, 0, -1):
        k = k_hist[i]
        mu_prev = mu_hist[i - 1]
        v_prev = v_hist[i - 1]
        v_i = varr[i]

        g_k = g_mu * (means[i] - mu_prev)
        if variance == "paper":
            g_k = g_k + g_v * (v_i - v_prev)
            g_vi = g_v * k
        else:
            g_k = g_k - g_v * v_prev
            g_vi = np.zeros(m)
        dmu[i] = g_mu * k

        denom = v_prev + v_i
        dk_dvprev = v_i / (denom * denom)
        dk_dvi = -v_prev / (denom * denom)
        g_vprev = g_v * (1.0 - k) + g_k * dk_dvprev
        dvar[i] = g_vi + g_k * dk_dvi

        g_mu = g_mu * (1.0 - k)
        g_v = g_vprev
    dmu[0] = g_mu
    dvar[0] = g_v

    return dmu, dvar * 2.0 * stds


def fuse_min_batch(means: np.ndarray, stds: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pick the member with the smallest mean per sample; ties go to the lowest index."""
    if means.shape[0] == 0:
        raise ValueError("cannot fuse an empty ensemble")
    idx = np.argmin(means, axis=0)
    cols = np.arange(means.shape[1])
    return means[idx, cols], stds[idx, cols]


def fuse_average_batch(means: np.ndarray, stds: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Arithmetic mean of the means; variance is the mean of the variances."""
    if means.shape[0] == 0:
        raise ValueError("cannot fuse an empty ensemble")
    return means.mean(axis=0), np.sqrt((stds * stds).mean(axis=0))


def fuse_batch(
    means: np.ndarray,
    stds: np.ndarray,
    strategy: FusionStrategy,
    variance: str = "paper",
) -> tuple[np.ndarray, np.ndarray]:
    """Dispatch to the batched fusion matching ``strategy``."""
    if strategy is FusionStrategy.KALMAN:
        return fuse_kalman_batch(means, stds, variance=variance)
    if strategy is FusionStrategy.MIN_MEAN:
        return fuse_min_batch(means, stds)
    if strategy is FusionStrategy.AVERAGE:
        return fuse_average_batch(means, stds)
    raise ValueError(f"unknown fusion strategy: {strategy}")


def kl_batch(
    mu_p: np.ndarray, std_p: np.ndarray, mu_q: np.ndarray, std_q: np.ndarray
) -> np.ndarray:
    """Elementwise closed-form KL divergence D(p || q)."""
    dmu = mu_p - mu_q
    qvar = std_q * std_q
    return np.log(std_q / std_p) + (std_p * std_p + dmu * dmu) / (2.0 * qvar) - 0.5


def kl_grad_batch(
    mu_p: np.ndarray, std_p: np.ndarray, mu_q: np.ndarray, std_q: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Elementwise gradients of kl_batch w.r.t. p's mean and std."""
    qvar = std_q * std_q
    return (mu_p - mu_q) / qvar, std_p / qvar - 1.0 / std_p
