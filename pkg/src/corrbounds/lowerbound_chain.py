"""Constructive pieces of the single-party lower bound.

A binary centred family lives on a subset of {-1,+1}^k with
``mu_i(x) = mu_0(x) (1 + rho x_i)`` and unbiased base coordinates.  For such a
family and ``n`` samples this module builds the exact Markov chain
X -> Y -> Z: ``X ~ mu_0^n``, each ``Y_i`` a clipped likelihood-ratio coin and
``Z_i`` a noisy copy of ``Y_i``.  The audits check the bias identities of the
chain, the escape mass of the good set and the information inequalities
that link a transcript channel to the chain.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .finite_dist import (
    ATOM_BUDGET,
    CenteredFamily,
    Pmf,
    ResourceError,
    Space,
    binary_space,
    power_pmf,
)
from .infotheory import (
    Channel,
    JointPmf,
    entropy,
    hellinger_sq,
    mutual_info,
)

__all__ = [
    "AlphaSolution",
    "max_admissible_rho",
    "alpha_residual",
    "alpha_bounds",
    "solve_alpha",
    "psi",
    "is_bcd",
    "likelihood_ratios",
    "in_truncation_set",
    "y_channel",
    "z_channel",
    "ChainInstance",
    "build_chain",
    "BiasReport",
    "verify_bias",
    "entropy_deficit",
    "centered_moments",
    "reduce_cd_to_bcd",
    "MainAudit",
    "transcript_audit",
    "ChainMargins",
    "chain_inequalities",
]


@dataclass(frozen=True)
class AlphaSolution:
    alpha: float
    k: int
    n: int
    rho: float
    residual: float


def max_admissible_rho(k: int, n: int) -> float:
    """Largest ``rho`` for which the clipping scale stays at most 1/2."""
    return 1.0 / (2.0 * math.sqrt(n) * (2.0 * math.sqrt(2.0 * math.log(8.0 * k * k)) + 3.0))


def alpha_residual(alpha: float, k: int, n: int, rho: float) -> float:
    """``(2 sqrt(2 ln(2k^2/alpha^2)) + 3) rho sqrt(n) - alpha``; decreasing in alpha."""
    return (2.0 * math.sqrt(2.0 * math.log(2.0 * k * k / alpha**2)) + 3.0) * rho * math.sqrt(n) - alpha


def alpha_bounds(k: int, n: int, rho: float) -> tuple[float, float]:
    lower = 3.0 * math.sqrt(n) * rho
    upper = rho * math.sqrt(n) * (2.0 * math.sqrt(2.0 * math.log(2.0 * k * k / (9.0 * n * rho * rho))) + 3.0)
    return lower, min(0.5, upper)


def solve_alpha(k: int, n: int, rho: float) -> AlphaSolution:
    """Unique root of :func:`alpha_residual` in (0, 1/2], found by bisection.

    Raises ``ValueError`` when ``rho`` exceeds :func:`max_admissible_rho`.
    """
    if k < 1 or n < 1 or rho <= 0:
        raise ValueError("need k >= 1, n >= 1 and rho > 0")
    rmax = max_admissible_rho(k, n)
    if rho > rmax:
        raise ValueError(f"rho={rho} exceeds the maximal admissible value {rmax:.6g}")
    # the root is at least 3 sqrt(n) rho, which gives a safe positive left end
    lo, hi = 1.5 * math.sqrt(n) * rho, 0.5
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if alpha_residual(mid, k, n, rho) > 0:
            lo = mid
        else:
            hi = mid
    alpha = hi if abs(alpha_residual(hi, k, n, rho)) <= abs(alpha_residual(lo, k, n, rho)) else lo
    return AlphaSolution(alpha, k, n, rho, alpha_residual(alpha, k, n, rho))


def psi(s):
    """Clamp to [-1, 1]."""
    return np.clip(s, -1.0, 1.0)


def is_bcd(family: CenteredFamily, tol: float = 1e-12) -> bool:
    """True when ``mu_i = mu_0 (1 + rho x_i)`` and base coordinates are unbiased."""
    atoms = family.space.atoms
    if atoms.ndim != 2 or atoms.shape[1] != family.k or not np.all(np.abs(atoms) == 1):
        return False
    base = family.base.mass
    if np.max(np.abs(base @ atoms)) > tol:
        return False
    expected = base[None, :] * (1.0 + family.rho * atoms.T)
    actual = np.stack([q.mass for q in family.alternatives])
    return bool(np.max(np.abs(expected - actual)) <= tol)


def likelihood_ratios(family: CenteredFamily, n: int, budget: int = ATOM_BUDGET):
    """``mu_0^n`` and the ratios ``mu_i^n / mu_0^n`` on every atom of Omega^n."""
    base_n = power_pmf(family.base, n, budget)
    N = len(family.space)
    digits = (np.arange(N**n)[:, None] // N ** np.arange(n)) % N
    per_atom = family.ratios()
    ratios = np.prod(per_atom[:, digits], axis=2)
    return base_n, ratios


def _alpha_value(alpha) -> float:
    return alpha.alpha if isinstance(alpha, AlphaSolution) else float(alpha)


def in_truncation_set(x, family: CenteredFamily, alpha) -> bool:
    """Whether every ratio ``mu_i^n(x)/mu_0^n(x)`` lies within ``alpha`` of 1.

    ``x`` is a sequence of atoms of the family's space (one per sample).
    """
    atoms = family.space.atoms
    per_atom = family.ratios()
    total = np.ones(family.k)
    for sample in np.asarray(x).reshape((-1,) + atoms.shape[1:]):
        hits = np.flatnonzero(np.all((atoms == sample).reshape(len(atoms), -1), axis=1))
        if len(hits) != 1:
            raise ValueError(f"{sample} is not an atom of the family's space")
        total = total * per_atom[:, hits[0]]
    return bool(np.all(np.abs(total - 1.0) <= _alpha_value(alpha)))


def _coin_table(prob_plus: np.ndarray, k: int) -> np.ndarray:
    """Product law over {-1,+1}^k from per-coordinate ``P(+1)``, shape ``(rows, 2^k)``."""
    ys = binary_space(k).atoms
    table = np.ones((prob_plus.shape[0], len(ys)))
    for i in range(k):
        table *= np.where(ys[None, :, i] == 1, prob_plus[:, i : i + 1], 1.0 - prob_plus[:, i : i + 1])
    return table


def y_channel(family: CenteredFamily, n: int, alpha, budget: int = ATOM_BUDGET) -> Channel:
    """Coordinates of ``Y`` independent given ``x`` with ``P(Y_i=1|x) = 1/2 + psi(dev_i/alpha)/4``."""
    base_n, ratios = likelihood_ratios(family, n, budget)
    p_plus = 0.5 + 0.25 * psi((ratios.T - 1.0) / _alpha_value(alpha))
    return Channel(base_n.space, binary_space(family.k), _coin_table(p_plus, family.k))


def z_channel(alpha, k: int) -> Channel:
    """Independent binary symmetric channels that keep each bit with probability ``(1+2 alpha)/2``."""
    a = _alpha_value(alpha)
    if not 0 < a <= 0.5:
        raise ValueError("alpha must lie in (0, 1/2]")
    ys = binary_space(k)
    keep = (1.0 + 2.0 * a) / 2.0
    same = ys.atoms[:, None, :] == ys.atoms[None, :, :]
    return Channel(ys, ys, np.prod(np.where(same, keep, 1.0 - keep), axis=2))


@dataclass(frozen=True, eq=False)
class ChainInstance:
    family: CenteredFamily
    n: int
    alpha: AlphaSolution
    base_n: Pmf
    ratios: np.ndarray
    good: np.ndarray
    y_given_x: Channel
    z_given_y: Channel
    joint: JointPmf

    @property
    def k(self) -> int:
        return self.family.k

    def alternative_n(self, i: int) -> np.ndarray:
        """Mass of ``mu_i^n`` on Omega^n (``i`` 1-based, 0 for the base)."""
        if i == 0:
            return self.base_n.mass
        return self.base_n.mass * self.ratios[i - 1]


def build_chain(family: CenteredFamily, n: int, budget: int = ATOM_BUDGET) -> ChainInstance:
    """Exact joint law of ``(X, Y, Z)`` for a binary centred family."""
    if not is_bcd(family):
        raise ValueError("the chain is defined for binary centred families only")
    k = family.k
    N = len(family.space)
    size = N**n * 4**k
    if size > budget:
        raise ResourceError(f"joint over {size} atoms exceeds the atom budget {budget}")
    sol = solve_alpha(k, n, family.rho)
    base_n, ratios = likelihood_ratios(family, n, budget)
    good = np.all(np.abs(ratios - 1.0) <= sol.alpha, axis=0)
    ych = y_channel(family, n, sol, budget)
    zch = z_channel(sol, k)
    mass = base_n.mass[:, None, None] * ych.matrix[:, :, None] * zch.matrix[None, :, :]
    joint = JointPmf(mass, (base_n.space, ych.out, zch.out))
    return ChainInstance(family, n, sol, base_n, ratios, good, ych, zch, joint)


@dataclass(frozen=True)
class BiasReport:
    item1_error: float
    item2_error: float
    item3_error: float
    item4_value: float
    escape_mass: float
    item4_bound: float
    item5_error: float
    item5_value: float
    item5_bound: float
    good_fraction: float
    tol: float = 1e-12

    @property
    def passed(self) -> bool:
        t = self.tol
        return (
            max(self.item1_error, self.item2_error, self.item3_error, self.item5_error) <= t
            and self.item4_value <= self.escape_mass + t
            and self.escape_mass <= self.item4_bound + t
            and self.item5_value <= self.item5_bound + t
        )


def verify_bias(chain: ChainInstance, tol: float = 1e-12) -> BiasReport:
    """Compare the chain against the closed forms for its bias structure."""
    k, a = chain.k, chain.alpha.alpha
    ys = binary_space(k).atoms
    base = chain.base_n.mass
    clipped = psi((chain.ratios.T - 1.0) / a)  # (NX, k)

    pxy = chain.joint.marginal(0, 1)
    closed_xy = 2.0**-k * base[:, None] * np.prod(1.0 + 0.5 * ys[None, :, :] * clipped[:, None, :], axis=2)
    item1 = float(np.max(np.abs(pxy - closed_xy)))

    pxz = chain.joint.marginal(0, 2)
    closed_xz = 2.0**-k * base[:, None] * np.prod(1.0 + a * ys[None, :, :] * clipped[:, None, :], axis=2)
    item2 = float(np.max(np.abs(pxz - closed_xz)))

    item3 = 0.0
    z_plus = np.zeros(k)
    y_plus = np.zeros(k)
    pxy_all = pxy
    for i in range(k):
        xz1 = pxz[:, ys[:, i] == 1].sum(axis=1)
        z_plus[i] = xz1.sum()
        y_plus[i] = pxy_all[:, ys[:, i] == 1].sum()
        target = chain.alternative_n(i + 1) / 2.0
        if np.any(chain.good):
            item3 = max(item3, float(np.max(np.abs(xz1 - target)[chain.good])))

    escape = max(float(chain.alternative_n(i)[~chain.good].sum()) for i in range(k + 1))
    zdev = np.abs(z_plus - 0.5)
    ydev = np.abs(y_plus - 0.5)
    return BiasReport(
        item1_error=item1,
        item2_error=item2,
        item3_error=item3,
        item4_value=float(zdev.max()),
        escape_mass=escape,
        item4_bound=a * a / k,
        item5_error=float(np.max(np.abs(ydev - zdev / (2.0 * a)))),
        item5_value=float(ydev.max()),
        item5_bound=a / (2.0 * k),
        good_fraction=float(chain.good.mean()),
        tol=tol,
    )


def entropy_deficit(chain: ChainInstance) -> float:
    """``k - H(Y)`` in bits."""
    return chain.k - entropy(chain.joint.marginal(1))


def centered_moments(family: CenteredFamily, max_order: int) -> dict:
    """``E_{mu_0} prod_{i in S} (mu_i/mu_0 - 1)`` for every nonempty ``S`` up to ``max_order``.

    Keys are 0-based index tuples.
    """
    dev = family.ratios() - 1.0
    w = family.base.mass
    out = {}
    for size in range(1, min(max_order, family.k) + 1):
        for S in itertools.combinations(range(family.k), size):
            out[S] = float(np.dot(w, np.prod(dev[list(S)], axis=0)))
    return out


def reduce_cd_to_bcd(eta: CenteredFamily, tol: float = 1e-12):
    """Map a centred family to a binary one plus a channel that undoes the map.

    The forward channel draws each bit ``x_i`` independently with
    ``P(x_i = 1 | y) = (eta_i(y)/eta_0(y) - (1 - rho)) / (2 rho)``.  The base of
    the binary family is the forward image of ``eta_0`` restricted to its
    support, the alternatives are ``mu_0 (1 + rho x_i)``, and the returned
    channel is the Bayes inverse of the forward channel under ``eta_0``.

    Returns
    -------
    bcd : CenteredFamily
    back : Channel
        From the binary family's space to ``eta``'s space; pushes each
        ``mu_i`` onto ``eta_i``.
    """
    rho, k = eta.rho, eta.k
    ratios = eta.ratios()  # (k, M)
    if np.any(np.abs(ratios - 1.0) > rho + tol):
        raise ValueError("density ratio outside [1 - rho, 1 + rho]")
    q = np.clip((ratios.T - (1.0 - rho)) / (2.0 * rho), 0.0, 1.0)  # (M, k)
    forward = _coin_table(q, k)  # (M, 2^k)
    mu0_full = eta.base.mass @ forward
    support = np.flatnonzero(mu0_full > 0)
    cube = binary_space(k)
    space = Space(f"bcd{k}:{eta.space.label}", cube.atoms[support])
    mu0 = mu0_full[support] / mu0_full[support].sum()
    atoms = space.atoms
    base = Pmf(space, mu0)
    alts = tuple(Pmf(space, mu0 * (1.0 + rho * atoms[:, i])) for i in range(k))
    bcd = CenteredFamily(base, alts, rho)
    back = forward[:, support].T * eta.base.mass[None, :] / mu0_full[support][:, None]
    back = back / back.sum(axis=1, keepdims=True)
    return bcd, Channel(space, eta.space, back)


@dataclass(frozen=True)
class MainAudit:
    lhs: float
    mutual_information: float
    bracket: float
    ratio: float


def transcript_audit(chain: ChainInstance, pi_channel: Channel) -> MainAudit:
    """Hellinger sum of a transcript channel against its information bracket.

    ``lhs`` is ``sum_i H^2(Pi | X ~ mu_0^n, Pi | X ~ mu_i^n)`` and ``bracket`` is
    ``n rho^2 log2(k^2/(n rho^2)) (I(Pi; X) + 1)``; only their ratio is
    reported because the constant relating them is not fixed.
    """
    P = pi_channel.matrix
    if P.shape[0] != len(chain.base_n):
        raise ValueError("transcript channel must read the n-sample input")
    k, n, rho = chain.k, chain.n, chain.family.rho
    p0 = chain.base_n.mass @ P
    lhs = sum(hellinger_sq(p0, chain.alternative_n(i) @ P) for i in range(1, k + 1))
    info = mutual_info(chain.base_n.mass[:, None] * P)
    bracket = n * rho**2 * math.log2(k * k / (n * rho**2)) * (info + 1.0)
    return MainAudit(lhs, info, bracket, lhs / bracket)


@dataclass(frozen=True)
class ChainMargins:
    """Smallest margin of each step linking a transcript to the chain (``>= 0`` when valid)."""

    mixture: float
    biased_hellinger: float
    two_info: float
    strong_dpi: float
    coordinate_sum: float
    processing: float
    transfer: float

    def minimum(self) -> float:
        return min(self.mixture, self.biased_hellinger, self.two_info, self.strong_dpi,
                   self.coordinate_sum, self.processing, self.transfer)


def chain_inequalities(chain: ChainInstance, pi_channel: Channel) -> ChainMargins:
    """Evaluate every step from ``I(Pi; X)`` down to the per-hypothesis Hellinger terms."""
    k, a = chain.k, chain.alpha.alpha
    P = pi_channel.matrix
    px = chain.base_n.mass
    ys = binary_space(k).atoms
    p_pi_x = (px[:, None] * P).T  # (NPi, NX)
    p_pi_y = p_pi_x @ chain.y_given_x.matrix
    p_pi_z = p_pi_y @ chain.z_given_y.matrix
    p_pi = p_pi_x.sum(axis=1)
    mixture = biased = two = sdpi = transfer = math.inf
    info_y_coords = 0.0
    for i in range(k):
        plus = ys[:, i] == 1
        yi = np.stack([p_pi_y[:, ~plus].sum(axis=1), p_pi_y[:, plus].sum(axis=1)], axis=1)
        zi = np.stack([p_pi_z[:, ~plus].sum(axis=1), p_pi_z[:, plus].sum(axis=1)], axis=1)
        pz = zi.sum(axis=0)
        given_minus, given_plus = zi[:, 0] / pz[0], zi[:, 1] / pz[1]
        h_split = hellinger_sq(given_minus, given_plus)
        h_plus = hellinger_sq(p_pi, given_plus)
        i_z, i_y = mutual_info(zi), mutual_info(yi)
        info_y_coords += i_y
        mixture = min(mixture, h_split - h_plus)
        biased = min(biased, i_z / (2.0 * pz.min()) - h_split)
        two = min(two, 2.0 * i_z - h_split)
        sdpi = min(sdpi, 4.0 * a * a * i_y - i_z)
        h_alt = hellinger_sq(p_pi, chain.alternative_n(i + 1) @ P)
        transfer = min(transfer, 2.0 * h_plus + 5.0 * a * a / k - h_alt)
    i_y_all = mutual_info(p_pi_y)
    coord = k - entropy(p_pi_y.sum(axis=0)) + i_y_all - info_y_coords
    processing = mutual_info(p_pi_x) - i_y_all
    return ChainMargins(mixture, biased, two, sdpi, coord, processing, transfer)
