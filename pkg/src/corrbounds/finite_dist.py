"""Exact finite distributions on enumerable sample spaces.

Atoms of the binary cube {-1,+1}^d are indexed by a little-endian bit code:
coordinate ``i`` (1-based) of atom ``a`` is ``+1`` when bit ``i-1`` of ``a`` is
set and ``-1`` otherwise.  Product spaces Omega^n use the same convention one
level up: sample ``j`` contributes ``idx_j * |Omega|**j`` to the atom index.

Index subsets are always given over ``{1, ..., d}``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "ATOM_BUDGET",
    "MASS_TOL",
    "ResourceError",
    "Space",
    "Pmf",
    "CenteredFamily",
    "binary_space",
    "atom_index",
    "subset_mask",
    "parity_pmf",
    "uniform_pmf",
    "build_parity_family",
    "expected_monomial",
    "symmetric_difference",
    "collection_moment",
    "count_closed_collections",
    "count_even_cover_collections",
    "tuples_bound",
    "power_pmf",
    "correlation_condition_lhs",
    "gate_statistic",
    "corr_tail_bound",
    "parity_sample",
    "random_centered_family",
]

ATOM_BUDGET = 2**20
MASS_TOL = 1e-12


class ResourceError(RuntimeError):
    """Raised when an exact enumeration would exceed its configured budget."""


@dataclass(frozen=True, eq=False)
class Space:
    """An enumerable sample space.

    ``atoms`` has shape ``(N, ...)``; row ``a`` is the value of atom ``a``.
    Two spaces are compatible when their labels and sizes agree.
    """

    label: str
    atoms: np.ndarray

    def __len__(self) -> int:
        return len(self.atoms)

    def compatible(self, other: "Space") -> bool:
        return self is other or (self.label == other.label and len(self) == len(other))


def binary_space(d: int) -> Space:
    """The cube {-1,+1}^d in little-endian atom order."""
    if not 1 <= d <= 20:
        raise ValueError(f"binary spaces are enumerable only for 1 <= d <= 20, got {d}")
    codes = np.arange(2**d)[:, None]
    bits = (codes >> np.arange(d)) & 1
    return Space(f"binary{d}", (2 * bits - 1).astype(np.int8))


def atom_index(x: Sequence[int]) -> int:
    """Little-endian index of a +-1 vector."""
    return sum(1 << i for i, v in enumerate(x) if v == 1)


def _check_subset(I: Iterable[int], d: int) -> tuple[int, ...]:
    members = tuple(sorted(set(int(i) for i in I)))
    if not members:
        raise ValueError("index subset must be nonempty")
    if members[0] < 1 or members[-1] > d:
        raise ValueError(f"index subset {members} is not contained in 1..{d}")
    return members


def subset_mask(I: Iterable[int]) -> int:
    """Bitmask with bit ``i-1`` set for each member ``i``."""
    mask = 0
    for i in I:
        mask |= 1 << (int(i) - 1)
    return mask


@dataclass(frozen=True, eq=False)
class Pmf:
    """A probability mass function over an enumerable :class:`Space`."""

    space: Space
    mass: np.ndarray

    def __post_init__(self):
        mass = np.asarray(self.mass, dtype=float)
        if mass.shape != (len(self.space),):
            raise ValueError(f"mass has shape {mass.shape}, space has {len(self.space)} atoms")
        if np.any(mass < 0):
            raise ValueError("negative probability mass")
        if abs(mass.sum() - 1.0) > MASS_TOL:
            raise ValueError(f"masses sum to {mass.sum()!r}, not 1")
        mass.setflags(write=False)
        object.__setattr__(self, "mass", mass)

    def __len__(self) -> int:
        return len(self.mass)

    def prob(self, x) -> float:
        """Mass of a +-1 atom (binary spaces) or of an atom index."""
        if isinstance(x, (int, np.integer)):
            return float(self.mass[x])
        return float(self.mass[atom_index(x)])

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        idx = rng.choice(len(self.mass), size=count, p=self.mass)
        return self.space.atoms[idx]


def uniform_pmf(space: Space) -> Pmf:
    return Pmf(space, np.full(len(space), 1.0 / len(space)))


def _monomial(space: Space, members: Sequence[int]) -> np.ndarray:
    cols = [m - 1 for m in members]
    return np.prod(space.atoms[:, cols].astype(np.int64), axis=1)


def parity_pmf(I: Iterable[int], rho: float, d: int) -> Pmf:
    """The parity-biased distribution ``2^-d (1 + rho * prod_{i in I} x_i)``.

    Parameters
    ----------
    I : iterable of int
        Nonempty subset of ``1..d``.
    rho : float
        Bias strength in (0, 1).
    d : int
        Dimension of the cube.
    """
    members = _check_subset(I, d)
    if not 0 < rho < 1:
        raise ValueError(f"rho must lie in (0, 1), got {rho}")
    space = binary_space(d)
    return Pmf(space, (1.0 + rho * _monomial(space, members)) / 2**d)


@dataclass(frozen=True, eq=False)
class CenteredFamily:
    """A base pmf together with ``k`` alternatives within ratio ``1 +- rho``.

    ``labels`` holds the index subsets of a parity family and is ``None``
    for general families.
    """

    base: Pmf
    alternatives: tuple
    rho: float
    labels: tuple | None = None
    max_deviation: float = field(init=False)
    _ratios: np.ndarray = field(init=False, repr=False)
    _lookup: dict | None = field(init=False, repr=False)

    def __post_init__(self):
        alts = tuple(self.alternatives)
        object.__setattr__(self, "alternatives", alts)
        if not 0 < self.rho < 1:
            raise ValueError(f"rho must lie in (0, 1), got {self.rho}")
        if len(alts) < 1:
            raise ValueError("a family needs at least one alternative")
        for q in alts:
            if not q.space.compatible(self.base.space):
                raise ValueError("all pmfs of a family must share one space")
        if np.any(self.base.mass <= 0):
            raise ValueError("base pmf must have full support; drop zero-mass atoms first")
        ratios = np.stack([q.mass for q in alts]) / self.base.mass
        ratios.flags.writeable = False
        object.__setattr__(self, "_ratios", ratios)
        dev = float(np.max(np.abs(ratios - 1.0)))
        if dev > self.rho + MASS_TOL:
            raise ValueError(f"atomwise ratio deviation {dev} exceeds rho={self.rho}")
        object.__setattr__(self, "max_deviation", dev)
        if self.labels is not None:
            labels = tuple(tuple(sorted(lab)) for lab in self.labels)
            if len(labels) != len(alts):
                raise ValueError("one label per alternative is required")
            object.__setattr__(self, "labels", labels)
        lookup = {lab: i for i, lab in enumerate(self.labels)} if self.labels is not None else None
        object.__setattr__(self, "_lookup", lookup)

    @property
    def k(self) -> int:
        return len(self.alternatives)

    @property
    def space(self) -> Space:
        return self.base.space

    def ratios(self) -> np.ndarray:
        """Density ratios ``mu_i / mu_0``, shape ``(k, N)``, read-only."""
        return self._ratios

    def member(self, index: int) -> Pmf:
        """``index`` 0 is the base, ``1..k`` the alternatives."""
        return self.base if index == 0 else self.alternatives[index - 1]


def build_parity_family(U: Sequence[Iterable[int]], rho: float, d: int) -> CenteredFamily:
    """Parity pmfs for every member of ``U`` against the uniform base."""
    members = [_check_subset(I, d) for I in U]
    if len(members) < 2:
        raise ValueError("identification needs at least two hypotheses")
    if len(set(members)) != len(members):
        raise ValueError("hypothesis subsets must be distinct")
    alts = [parity_pmf(I, rho, d) for I in members]
    return CenteredFamily(uniform_pmf(binary_space(d)), tuple(alts), rho, tuple(members))


def expected_monomial(p: Pmf, Iprime: Iterable[int]) -> float:
    """``E_{X~p} prod_{i in I'} X_i`` by exact summation."""
    d = p.space.atoms.shape[1]
    members = _check_subset(Iprime, d)
    return float(np.dot(p.mass, _monomial(p.space, members)))


def symmetric_difference(J: Iterable[Iterable[int]]) -> frozenset:
    """Coordinates that appear in an odd number of members of ``J``."""
    out: set = set()
    for I in J:
        out ^= set(I)
    return frozenset(out)


def collection_moment(family: CenteredFamily, J: Sequence) -> float:
    """``E_{A~mu_0} prod_{I in J} (mu_I(A)/mu_0(A) - 1)/rho``.

    Members of ``J`` are labels of a parity family, or 0-based alternative
    indices for general families.  Parity families are evaluated twice, by
    the symmetric-difference rule and by summation over atoms, and the two
    values must agree.
    """
    ratios = family.ratios()
    if family.labels is not None:
        try:
            rows = [family._lookup[tuple(sorted(I))] for I in J]
        except KeyError as exc:
            raise ValueError(f"{exc.args[0]} is not a label of this family") from None
    else:
        rows = [int(i) for i in J]
    centered = (ratios[rows] - 1.0) / family.rho
    brute = float(np.dot(family.base.mass, np.prod(centered, axis=0)))
    if family.labels is None:
        return brute
    fast = 0.0 if symmetric_difference(J) else 1.0
    if abs(fast - brute) > 1e-12:
        raise ArithmeticError(f"collection moment mismatch: rule {fast}, summation {brute}")
    return fast


def _collections(d: int, r: int, l: int, budget: int):
    if not (2 <= r <= d and l >= 2):
        raise ValueError("need 2 <= r <= d and l >= 2")
    subsets = [subset_mask(c) for c in itertools.combinations(range(1, d + 1), r)]
    total = math.comb(len(subsets), l)
    if total > budget:
        raise ResourceError(f"{total} collections exceed the enumeration budget {budget}")
    return itertools.combinations(subsets, l)


def count_closed_collections(d: int, r: int, l: int, budget: int = 10**7) -> int:
    """Number of ``l``-sets of ``r``-subsets of ``1..d`` with no lone element.

    An element is lone when exactly one chosen subset contains it.  Elements
    may appear three or more times, so this count can be positive when
    ``l r`` is odd; see :func:`count_even_cover_collections`.
    """
    count = 0
    for combo in _collections(d, r, l, budget):
        once = twice = 0
        for m in combo:
            twice |= once & m
            once |= m
        if once == twice:
            count += 1
    return count


def count_even_cover_collections(d: int, r: int, l: int, budget: int = 10**7) -> int:
    """Number of ``l``-sets of ``r``-subsets whose symmetric difference is empty.

    These are the collections with nonzero parity moment.  Every element is
    covered an even number of times, so the count is zero when ``l r`` is odd.
    """
    count = 0
    for combo in _collections(d, r, l, budget):
        acc = 0
        for m in combo:
            acc ^= m
        count += acc == 0
    return count


def tuples_bound(d: int, r: int, l: int) -> float:
    """Upper bound ``d^(lr/2) / (lr/2)! * C(C(lr/2, r), l)``; zero when ``lr`` is odd."""
    if (l * r) % 2:
        return 0.0
    h = l * r // 2
    return d**h / math.factorial(h) * math.comb(math.comb(h, r), l)


def power_pmf(p: Pmf, n: int, budget: int = ATOM_BUDGET) -> Pmf:
    """The law of ``n`` independent draws from ``p`` as an exact pmf."""
    if n < 1:
        raise ValueError("n must be positive")
    N = len(p)
    if N**n > budget:
        raise ResourceError(f"{N}^{n} atoms exceed the atom budget {budget}")
    if n == 1:
        return p
    mass = p.mass
    for _ in range(n - 1):
        mass = np.outer(p.mass, mass).ravel()
    digits = (np.arange(N**n)[:, None] // N ** np.arange(n)) % N
    atoms = p.space.atoms[digits]
    return Pmf(Space(f"{p.space.label}^{n}", atoms), mass / mass.sum())


def correlation_condition_lhs(family: CenteredFamily, n: int, max_order: int) -> float:
    """Partial correlation sum over hypothesis subsets ``S`` with ``2 <= |S| <= max_order``.

    Each term is ``n^(-|S|/2) rho^(-|S|) |E_{mu_0} prod_{i in S} (mu_i/mu_0 - 1)|``.
    """
    k = family.k
    if not 2 <= max_order <= k:
        raise ValueError(f"max_order must lie in 2..{k}")
    rho = family.rho
    total = 0.0
    if family.labels is not None:
        masks = [subset_mask(lab) for lab in family.labels]
        for size in range(2, max_order + 1):
            weight = n ** (-size / 2)
            for S in itertools.combinations(range(k), size):
                acc = 0
                for i in S:
                    acc ^= masks[i]
                if acc == 0:
                    total += weight
        return total
    centered = family.ratios() - 1.0
    w = family.base.mass
    for size in range(2, max_order + 1):
        weight = n ** (-size / 2) * rho ** (-size)
        for S in itertools.combinations(range(k), size):
            total += weight * abs(float(np.dot(w, np.prod(centered[list(S)], axis=0))))
    return total


def gate_statistic(family: CenteredFamily, n: int) -> float:
    """``rho * sqrt(n ln k)``, for callers applying their own constant gate."""
    return family.rho * math.sqrt(n * math.log(family.k))


def corr_tail_bound(k: int, n: int, order: int) -> float:
    """Tail ``sum_{r > order} k^r n^(-r/2) / r!`` of the correlation sum.

    Requires ``n >= k^(2(order+1)/(order-1))``, under which the tail is at
    most ``1/(2n)``.
    """
    if order < 2:
        raise ValueError("order must be at least 2")
    threshold = k ** (2 * (order + 1) / (order - 1))
    if n < threshold * (1 - 1e-12):
        raise ValueError(f"n={n} is below the required threshold {threshold:.6g}")
    value = sum(k**r * n ** (-r / 2) / math.factorial(r) for r in range(order + 1, k + 1))
    if value > 1 / (2 * n) + 1e-15:
        raise ArithmeticError(f"tail {value} exceeds 1/(2n) = {1 / (2 * n)}")
    return value


def parity_sample(I: Iterable[int] | None, rho: float, d: int, count: int,
                  rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` samples of ``mu_{I,rho}`` on the d-cube (uniform if ``I`` is None).

    A uniform point is kept when its parity on ``I`` matches a
    ``(1+rho)/2``-biased coin and otherwise has one coordinate of ``I``
    flipped, which yields the parity law exactly.
    """
    x = rng.integers(0, 2, size=(count, d), dtype=np.int8) * 2 - 1
    if I is None or rho == 0:
        return x.astype(np.int8)
    cols = [i - 1 for i in _check_subset(I, d)]
    want = np.where(rng.random(count) < (1 + rho) / 2, 1, -1)
    have = np.prod(x[:, cols], axis=1)
    x[have != want, cols[0]] *= -1
    return x.astype(np.int8)


def random_centered_family(rng: np.random.Generator, size: int, k: int, rho: float) -> CenteredFamily:
    """A random full-support base on ``size`` atoms with ``k`` alternatives.

    Each alternative is ``mu_0 (1 + rho u)`` for a random direction ``u``
    centred under ``mu_0`` and scaled so that ``max |u| = 1``.
    """
    if size < 2 or k < 1:
        raise ValueError("need at least two atoms and one alternative")
    space = Space(f"omega{size}", np.arange(size)[:, None])
    base = rng.dirichlet(np.ones(size)) * 0.9 + 0.1 / size
    alts = []
    for _ in range(k):
        u = rng.uniform(-1.0, 1.0, size)
        u -= np.dot(base, u)
        u /= np.max(np.abs(u))
        mass = base * (1.0 + rho * u)
        alts.append(Pmf(space, mass / mass.sum()))
    return CenteredFamily(Pmf(space, base), tuple(alts), rho)
