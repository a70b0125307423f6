"""Gaussian families with one planted pairwise correlation.

``eta_0`` is the standard normal law on R^d and ``eta_I`` has covariance equal
to the identity except for ``sigma`` at the coordinate pair ``I``.  Pairs are
given as 1-based index pairs.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

__all__ = [
    "B",
    "planted_cov",
    "planted_inverse",
    "planted_det",
    "max_stack_sigma",
    "CovarianceStack",
    "stack_build",
    "stack_precision",
    "high_order_closed",
    "same_pair_moment",
    "centered_high_order_closed",
    "has_unique_coordinate",
    "log_density_ratio",
    "mc_high_order",
    "mc_centered_high_order",
    "gauss_tail",
    "norm_cdf",
    "TruncationConfig",
    "truncation_params",
    "box_mass",
    "truncated_rho",
    "RatioCheck",
    "truncated_ratio_check",
    "sample_planted",
]

B = 5


def _pair(I, d: int) -> tuple[int, int]:
    i, j = sorted(int(v) for v in I)
    if i == j or i < 1 or j > d:
        raise ValueError(f"{tuple(I)} is not a pair of distinct coordinates in 1..{d}")
    return i - 1, j - 1


def _check_sigma(sigma: float) -> None:
    if not 0 <= sigma < 1:
        raise ValueError(f"sigma must lie in [0, 1), got {sigma}")


def planted_cov(I, sigma: float, d: int) -> np.ndarray:
    _check_sigma(sigma)
    i, j = _pair(I, d)
    S = np.eye(d)
    S[i, j] = S[j, i] = sigma
    return S


def planted_inverse(I, sigma: float, d: int) -> np.ndarray:
    """Closed-form inverse of the planted covariance."""
    _check_sigma(sigma)
    i, j = _pair(I, d)
    P = np.eye(d)
    c = 1.0 / (1.0 - sigma * sigma)
    P[i, i] = P[j, j] = c
    P[i, j] = P[j, i] = -sigma * c
    return P


def planted_det(sigma: float) -> float:
    _check_sigma(sigma)
    return 1.0 - sigma * sigma


def max_stack_sigma(b: int = B) -> float:
    """Largest sigma with ``4 b^2 sigma / (1 - sigma^2) <= 1/2``."""
    c = 8.0 * b * b  # sigma^2 + c sigma - 1 <= 0
    return 2.0 / (c + math.sqrt(c * c + 4.0))


def stack_precision(pairs, sigma: float, d: int) -> np.ndarray:
    """``I_d + sum_i (Sigma_{I_i}^{-1} - I_d)``, repeats allowed."""
    P = np.eye(d)
    for I in pairs:
        P += planted_inverse(I, sigma, d) - np.eye(d)
    return P


@dataclass(frozen=True, eq=False)
class CovarianceStack:
    pairs: tuple
    sigma: float
    d: int
    precision: np.ndarray
    matrix: np.ndarray
    det: float


def stack_build(pairs, sigma: float, d: int) -> CovarianceStack:
    """Build ``Sigma_{I_1..I_r}`` for 2..5 distinct pairs and check its bounds.

    Raises ``ValueError`` when sigma is above :func:`max_stack_sigma` or the
    pairs are not distinct, and ``ArithmeticError`` if a structural bound fails.
    """
    norm = tuple(sorted((tuple(sorted(int(v) for v in I)) for I in pairs)))
    if not 2 <= len(norm) <= B:
        raise ValueError(f"need between 2 and {B} pairs, got {len(norm)}")
    if len(set(norm)) != len(norm):
        raise ValueError("pairs must be distinct")
    smax = max_stack_sigma()
    if sigma > smax:
        raise ValueError(f"sigma={sigma} exceeds the maximal admissible value {smax:.6g}")
    P = stack_precision(norm, sigma, d)
    S = np.linalg.inv(P)
    try:
        np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise ArithmeticError("stacked covariance is not positive definite") from None
    det = float(np.linalg.det(S))
    if not np.allclose(S, S.T, atol=1e-14, rtol=0):
        raise ArithmeticError("stacked covariance is not symmetric")
    if det > 2.0 or np.max(np.abs(S)) > 2.0:
        raise ArithmeticError(f"stack bound violated: det={det}, max entry={np.max(np.abs(S))}")
    return CovarianceStack(norm, sigma, d, P, S, det)


def high_order_closed(pairs, sigma: float, d: int) -> float:
    """``E_{eta_0} prod_i eta_{I_i}/eta_0`` as ``sqrt(det Sigma / (1 - sigma^2)^r)``.

    Any list of pairs is accepted (repeats included) as long as the stacked
    precision matrix is positive definite; otherwise the integral diverges.
    """
    pairs = list(pairs)
    r = len(pairs)
    if r == 0:
        return 1.0
    P = stack_precision(pairs, sigma, d)
    sign, logdet_p = np.linalg.slogdet(P)
    if sign <= 0 or np.min(np.linalg.eigvalsh(P)) <= 0:
        raise ArithmeticError("stacked precision is not positive definite; the moment is infinite")
    return math.exp(0.5 * (-logdet_p - r * math.log1p(-sigma * sigma)))


def same_pair_moment(I, sigma: float, d: int) -> float:
    """Second moment ``E_{eta_0} (eta_I/eta_0)^2``; equals ``1/(1 - sigma^2)``."""
    return high_order_closed([I, I], sigma, d)


def centered_high_order_closed(pairs, sigma: float, d: int) -> float:
    """``E_{eta_0} prod_i (eta_{I_i}/eta_0 - 1)`` by inclusion-exclusion."""
    pairs = list(pairs)
    r = len(pairs)
    total = 0.0
    for size in range(r + 1):
        for S in itertools.combinations(pairs, size):
            total += (-1) ** (r - size) * high_order_closed(S, sigma, d)
    return total


def has_unique_coordinate(pairs) -> bool:
    """Whether some pair owns a coordinate that no other pair touches."""
    counts: dict = {}
    for I in pairs:
        for v in I:
            counts[v] = counts.get(v, 0) + 1
    return any(counts[v] == 1 for I in pairs for v in I)


def log_density_ratio(x: np.ndarray, I, sigma: float) -> np.ndarray:
    """``log eta_I(x)/eta_0(x)`` for rows of ``x``."""
    d = x.shape[-1]
    i, j = _pair(I, d)
    s2 = 1.0 - sigma * sigma
    xi, xj = x[..., i], x[..., j]
    quad = (sigma * sigma * (xi * xi + xj * xj) - 2.0 * sigma * xi * xj) / (2.0 * s2)
    return -0.5 * math.log(s2) - quad


def _mc(values_fn, d: int, N: int, seed: int, chunk: int = 200_000):
    if N < 10**4:
        raise ValueError("Monte Carlo needs at least 10^4 draws")
    rng = np.random.default_rng(seed)
    total = total_sq = 0.0
    done = 0
    while done < N:
        m = min(chunk, N - done)
        v = values_fn(rng.standard_normal((m, d)))
        total += float(v.sum())
        total_sq += float((v * v).sum())
        done += m
    mean = total / N
    var = max(total_sq / N - mean * mean, 0.0)
    return mean, math.sqrt(var / (N - 1))


def mc_high_order(pairs, sigma: float, d: int, N: int, seed: int) -> tuple[float, float]:
    """Monte Carlo estimate and standard error of :func:`high_order_closed`."""
    pairs = list(pairs)

    def values(x):
        return np.exp(sum(log_density_ratio(x, I, sigma) for I in pairs))

    return _mc(values, d, N, seed)


def mc_centered_high_order(pairs, sigma: float, d: int, N: int, seed: int) -> tuple[float, float]:
    """Monte Carlo estimate of :func:`centered_high_order_closed`."""
    pairs = list(pairs)

    def values(x):
        out = np.ones(len(x))
        for I in pairs:
            out *= np.exp(log_density_ratio(x, I, sigma)) - 1.0
        return out

    return _mc(values, d, N, seed)


def gauss_tail(w: float, variance: float = 1.0) -> float:
    """Upper bound ``2 exp(-w^2/(2 s^2)) / ((w/s) sqrt(2 pi))`` on ``P(|W| >= w)``."""
    if w <= 0:
        raise ValueError("w must be positive")
    s = math.sqrt(variance)
    return 2.0 * math.exp(-w * w / (2.0 * variance)) / ((w / s) * math.sqrt(2.0 * math.pi))


def norm_cdf(x):
    """Standard normal CDF through ``erfc``, accurate in both tails."""
    return 0.5 * special.erfc(-np.asarray(x, dtype=float) / math.sqrt(2.0))


def _interval_mass(R: float) -> float:
    return float(1.0 - special.erfc(R / math.sqrt(2.0)))


@dataclass(frozen=True)
class TruncationConfig:
    d: int
    m: int
    n: int
    sigma: float
    b: int
    log_p: float
    R: float

    @property
    def p(self) -> float:
        return math.exp(self.log_p)

    def escape_bound(self) -> float:
        """``d exp(-R^2/2)``, the union bound on leaving the box."""
        return self.d * math.exp(-self.R * self.R / 2.0)


def truncation_params(d: int, m: int, n: int, sigma: float) -> TruncationConfig:
    """Escape level ``p`` and box radius ``R`` for a truncated planted family."""
    if min(d, m, n) < 1 or sigma <= 0:
        raise ValueError("d, m, n and sigma must be positive")
    binom_le = sum(math.comb(n, i) for i in range(B + 1))
    log_p = B * math.log(sigma) - (math.log(64 * B * n) + math.log(binom_le) + B * math.log(2))
    R = max(
        math.sqrt(2.0 * math.log(2.0 * d * m * n)),
        math.sqrt(4.0 * (math.log(2.0 * d) - log_p)),
        math.sqrt(max(2.0 * math.log(d / sigma), 0.0)),
        1.0,
    )
    return TruncationConfig(d, m, n, sigma, B, log_p, R)


def box_mass(I, sigma: float, R: float, d: int) -> float:
    """``eta_I([-R, R]^d)`` via the conditional law of the planted pair."""
    if R < 1:
        raise ValueError("R must be at least 1")
    _check_sigma(sigma)
    _pair(I, d)
    s = math.sqrt(1.0 - sigma * sigma)

    def inner(x):
        phi = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
        hi = (R - sigma * x) / s
        lo = (-R - sigma * x) / s
        # difference of upper tails keeps precision when both ends are far out
        return phi * 0.5 * (special.erfc(lo / math.sqrt(2.0)) - special.erfc(hi / math.sqrt(2.0)))

    pair_mass, err = integrate.quad(inner, -R, R, epsabs=1e-13, epsrel=1e-13, limit=200)
    if err > 1e-10:
        raise ArithmeticError(f"quadrature error estimate {err} above 1e-10")
    return float(pair_mass * _interval_mass(R) ** (d - 2))


def truncated_rho(sigma: float, R: float) -> float:
    """Centering radius ``2s^2/(1-s^2) + 4 s R^2/(1-s^2)^2 + 2s`` of the truncated family."""
    s2 = 1.0 - sigma * sigma
    return 2.0 * sigma * sigma / s2 + 4.0 * sigma * R * R / s2**2 + 2.0 * sigma


@dataclass(frozen=True)
class RatioCheck:
    deviation: float
    bound: float
    points: int

    @property
    def passed(self) -> bool:
        return self.deviation <= self.bound + 1e-12


def truncated_ratio_check(I, sigma: float, R: float, d: int, num_points: int, seed: int,
                          enforce_gate: bool = True) -> RatioCheck:
    """Worst ``|eta_{I,R}/eta_{0,R} - 1|`` over random box points and all pair corners."""
    if enforce_gate and sigma * R * R / (1.0 - sigma * sigma) > 1.0:
        raise ValueError(f"sigma R^2/(1 - sigma^2) = {sigma * R * R / (1 - sigma * sigma):.4g} exceeds 1")
    i, j = _pair(I, d)
    rng = np.random.default_rng(seed)
    x = rng.uniform(-R, R, size=(num_points, d))
    corners = np.zeros((4, d))
    corners[:, [i, j]] = R * np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]])
    x = np.vstack([x, corners])
    mass_ratio = _interval_mass(R) ** d / box_mass(I, sigma, R, d)
    ratio = np.exp(log_density_ratio(x, I, sigma)) * mass_ratio
    return RatioCheck(float(np.max(np.abs(ratio - 1.0))), truncated_rho(sigma, R), len(x))


def sample_planted(I, sigma: float, d: int, count: int, seed: int) -> np.ndarray:
    """Draws from ``eta_I``: the planted pair is ``(g1, sigma g1 + sqrt(1 - sigma^2) g2)``."""
    _check_sigma(sigma)
    i, j = _pair(I, d)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((count, d))
    x[:, j] = sigma * x[:, i] + math.sqrt(1.0 - sigma * sigma) * x[:, j]
    return x
