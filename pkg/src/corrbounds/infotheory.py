"""Divergences, channels and information inequalities on finite spaces.

Every inequality is exposed as a *margin*: the right-hand side minus the
left-hand side, so a valid instance yields a value ``>= -1e-12``.  Logs are
base 2 throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .finite_dist import MASS_TOL, Pmf, Space, binary_space

__all__ = [
    "Channel",
    "JointPmf",
    "tv",
    "hellinger_sq",
    "hellinger",
    "sandwich_margin",
    "entropy",
    "binary_entropy",
    "mutual_info",
    "compose",
    "joint",
    "flip_channel",
    "dpi_margin",
    "mi_dpi_margin",
    "sdpi_margin",
    "hel_i_margin",
    "zzi_margin",
    "mix_contraction_margin",
    "info_superadditivity_margin",
    "random_pmf",
]


def _as_mass(p) -> np.ndarray:
    return p.mass if isinstance(p, Pmf) else np.asarray(p, dtype=float)


def _pair(p, q) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(p, Pmf) and isinstance(q, Pmf) and not p.space.compatible(q.space):
        raise ValueError(f"space mismatch: {p.space.label} vs {q.space.label}")
    a, b = _as_mass(p), _as_mass(q)
    if a.shape != b.shape:
        raise ValueError(f"space mismatch: {a.shape} vs {b.shape}")
    return a, b


@dataclass(frozen=True, eq=False)
class Channel:
    """A row-stochastic matrix from ``inp`` atoms to ``out`` atoms."""

    inp: Space
    out: Space
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (len(self.inp), len(self.out)):
            raise ValueError(f"channel matrix shape {m.shape} does not match its spaces")
        if np.any(m < 0) or np.max(np.abs(m.sum(axis=1) - 1.0)) > MASS_TOL:
            raise ValueError("channel rows must be probability vectors")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def row(self, a: int) -> Pmf:
        return Pmf(self.out, self.matrix[a])

    @classmethod
    def identity(cls, space: Space) -> "Channel":
        return cls(space, space, np.eye(len(space)))

    @classmethod
    def constant(cls, inp: Space, q: Pmf) -> "Channel":
        return cls(inp, q.space, np.tile(q.mass, (len(inp), 1)))


@dataclass(frozen=True, eq=False)
class JointPmf:
    """A joint pmf stored as a dense array, one axis per variable."""

    mass: np.ndarray
    spaces: tuple | None = None

    def __post_init__(self):
        m = np.asarray(self.mass, dtype=float)
        if m.ndim < 2:
            raise ValueError("a joint pmf needs at least two axes")
        if np.any(m < 0) or abs(m.sum() - 1.0) > MASS_TOL:
            raise ValueError("joint masses must be nonnegative and sum to 1")
        m.setflags(write=False)
        object.__setattr__(self, "mass", m)

    def marginal(self, *axes: int) -> np.ndarray:
        drop = tuple(a for a in range(self.mass.ndim) if a not in axes)
        return self.mass.sum(axis=drop)

    def conditional_rows(self) -> np.ndarray:
        """``P(B | A = a)`` for a two-axis joint; zero-mass rows are left at zero."""
        pa = self.mass.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(pa > 0, self.mass / np.where(pa > 0, pa, 1.0), 0.0)


def tv(p, q) -> float:
    """Total variation distance ``1/2 sum |p - q|``."""
    a, b = _pair(p, q)
    return 0.5 * float(np.abs(a - b).sum())


def hellinger_sq(p, q) -> float:
    """Squared Hellinger distance ``1/2 sum (sqrt p - sqrt q)^2``."""
    a, b = _pair(p, q)
    return 0.5 * float(((np.sqrt(a) - np.sqrt(b)) ** 2).sum())


def hellinger(p, q) -> float:
    return math.sqrt(hellinger_sq(p, q))


def sandwich_margin(p, q) -> tuple[float, float]:
    """Margins of ``H^2 <= TV`` and ``TV <= sqrt(2) H``."""
    t, h2 = tv(p, q), hellinger_sq(p, q)
    return t - h2, math.sqrt(2.0 * h2) - t


def entropy(p) -> float:
    """Shannon entropy in bits with ``0 log 0 = 0``."""
    m = _as_mass(p).ravel()
    m = m[m > 0]
    return float(-(m * np.log2(m)).sum())


def binary_entropy(x: float) -> float:
    return entropy(np.array([x, 1.0 - x]))


def mutual_info(j, axes_a=(0,), axes_b=None) -> float:
    """``I(A; B) = H(A) + H(B) - H(A, B)`` in bits.

    By default ``A`` is axis 0 and ``B`` is every remaining axis.
    """
    mass = j.mass if isinstance(j, JointPmf) else np.asarray(j, dtype=float)
    axes_a = tuple(axes_a)
    if axes_b is None:
        axes_b = tuple(a for a in range(mass.ndim) if a not in axes_a)
    axes_b = tuple(axes_b)
    keep = axes_a + axes_b
    drop = tuple(a for a in range(mass.ndim) if a not in keep)
    m = mass.sum(axis=drop) if drop else mass
    remaining = sorted(keep)
    m = m.transpose([remaining.index(a) for a in keep])
    na = int(np.prod([mass.shape[a] for a in axes_a]))
    table = m.reshape(na, -1)
    return entropy(table.sum(axis=1)) + entropy(table.sum(axis=0)) - entropy(table)


def compose(c: Channel, p) -> Pmf:
    """Push ``p`` through ``c``."""
    if isinstance(p, Pmf) and not p.space.compatible(c.inp):
        raise ValueError("channel input space does not match the pmf")
    m = _as_mass(p)
    if m.shape != (len(c.inp),):
        raise ValueError("channel input space does not match the pmf")
    out = m @ c.matrix
    return Pmf(c.out, out / out.sum())


def joint(p, c: Channel) -> JointPmf:
    """Joint law of ``(X, Y)`` with ``X ~ p`` and ``Y ~ c(X)``."""
    if isinstance(p, Pmf) and not p.space.compatible(c.inp):
        raise ValueError("channel input space does not match the pmf")
    m = _as_mass(p)
    return JointPmf(m[:, None] * c.matrix, (c.inp, c.out))


def flip_channel(keep: float) -> Channel:
    """Binary symmetric channel on {-1,+1} that keeps its input with probability ``keep``."""
    if not 0 <= keep <= 1:
        raise ValueError("keep probability must lie in [0, 1]")
    s = binary_space(1)
    return Channel(s, s, np.array([[keep, 1 - keep], [1 - keep, keep]]))


_DIVERGENCES = {"tv": tv, "hellinger": hellinger_sq}


def dpi_margin(p1, p2, c: Channel, divergence: str = "tv") -> float:
    """``d(p1, p2) - d(c p1, c p2)`` for ``d`` in {tv, hellinger}."""
    try:
        dist = _DIVERGENCES[divergence]
    except KeyError:
        raise ValueError(f"unknown divergence {divergence!r}") from None
    return dist(p1, p2) - dist(compose(c, p1), compose(c, p2))


def mi_dpi_margin(j: JointPmf, c: Channel) -> float:
    """``I(W; X) - I(W; Y)`` where ``Y`` is ``X`` passed through ``c``."""
    wy = j.mass @ c.matrix
    return mutual_info(j) - mutual_info(wy)


def _binary_b(j: JointPmf) -> np.ndarray:
    m = j.mass
    if m.ndim != 2 or m.shape[1] != 2:
        raise ValueError("second variable must be binary")
    return m


def sdpi_margin(j: JointPmf, q: float) -> float:
    """``q^2 I(A; B) - I(A; C)`` where ``C`` keeps ``B`` with probability ``(1+q)/2``."""
    if not 0 <= q <= 1:
        raise ValueError("q must lie in [0, 1]")
    m = _binary_b(j)
    ac = m @ flip_channel((1 + q) / 2).matrix
    return q * q * mutual_info(m) - mutual_info(ac)


def _binary_a(j: JointPmf) -> np.ndarray:
    m = j.mass
    if m.ndim != 2 or m.shape[0] != 2:
        raise ValueError("first variable must be binary")
    return m


def _conditional_hellinger(m: np.ndarray) -> float:
    pa = m.sum(axis=1)
    return hellinger_sq(m[0] / pa[0], m[1] / pa[1])


def hel_i_margin(j: JointPmf) -> float:
    """``I(A; B) - H^2(P_{B|A=-1}, P_{B|A=1})`` for uniform binary ``A``."""
    m = _binary_a(j)
    pa = m.sum(axis=1)
    if np.max(np.abs(pa - 0.5)) > MASS_TOL:
        raise ValueError("A is not uniform; use zzi_margin for biased A")
    return mutual_info(m) - _conditional_hellinger(m)


def zzi_margin(j: JointPmf) -> float:
    """``I(A; B) / (2 min P(A)) - H^2(P_{B|A=-1}, P_{B|A=1})`` for binary ``A``."""
    m = _binary_a(j)
    pa = m.sum(axis=1)
    if np.min(pa) <= 0:
        raise ValueError("both values of A need positive mass")
    return mutual_info(m) / (2 * float(np.min(pa))) - _conditional_hellinger(m)


def mix_contraction_margin(p, q, lam: float) -> float:
    """``H(p, q) - H((1-lam) p + lam q, q)`` with ``H`` the Hellinger distance."""
    if not 0 <= lam <= 1:
        raise ValueError("lambda must lie in [0, 1]")
    a, b = _pair(p, q)
    return hellinger(a, b) - hellinger((1 - lam) * a + lam * b, b)


def info_superadditivity_margin(j, tol: float = 1e-12) -> float:
    """``I(Pi; X_1..X_m) - sum_j I(Pi; X_j)`` for independent ``X_j``.

    Axis 0 of the joint is ``Pi``; each further axis is one ``X_j``.
    """
    mass = j.mass if isinstance(j, JointPmf) else np.asarray(j, dtype=float)
    m = mass.ndim - 1
    if m < 1:
        raise ValueError("need at least one X component")
    xs = mass.sum(axis=0)
    product = np.ones(())
    for a in range(m):
        marg = xs.sum(axis=tuple(b for b in range(m) if b != a))
        product = np.multiply.outer(product, marg)
    if np.max(np.abs(product - xs)) > tol:
        raise ValueError("X components are not independent")
    whole = mutual_info(mass)
    parts = sum(mutual_info(mass, (0,), (a + 1,)) for a in range(m))
    return whole - parts


def random_pmf(rng: np.random.Generator, size, sparsity: float = 0.0) -> np.ndarray:
    """Dirichlet(1) masses, with roughly a ``sparsity`` fraction of atoms zeroed."""
    m = rng.dirichlet(np.ones(int(np.prod(size)))).reshape(size)
    if sparsity > 0:
        m = np.where(rng.random(m.shape) < sparsity, 0.0, m)
        if m.sum() == 0:
            m.flat[0] = 1.0
        m = m / m.sum()
    return m
