"""Memory-bounded multi-pass streaming with bit-exact state.

An algorithm keeps its whole memory in an ``s``-bit vector and updates it
one sample at a time, ``u_{i+1} = f_i(x_i, u_i)``.  States are held as
``uint8`` arrays of zeros and ones; a batch of independent runs is a
``(B, s)`` matrix, which lets many seeded trials advance in lockstep while
each row still obeys the ``s``-bit budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .finite_dist import parity_sample

__all__ = [
    "MemoryViolation",
    "BitState",
    "StreamPosition",
    "StreamAlgorithm",
    "ConstantEcho",
    "StreamAudit",
    "run_stream",
    "run_stream_batch",
    "GroupScanConfig",
    "GroupScan",
    "build_group_scan",
    "required_samples",
    "ParitySource",
    "trial_seeds",
    "success_rate",
    "TradeoffRecord",
    "sweep_tradeoff",
]


class MemoryViolation(RuntimeError):
    """An update produced a state that does not fit the declared budget."""


def _bits_for(values: int) -> int:
    """Bits needed to store one of ``values`` distinct values."""
    return max(1, math.ceil(math.log2(values))) if values > 1 else 1


class BitState:
    """A fixed-length bit vector."""

    __slots__ = ("bits",)

    def __init__(self, bits):
        arr = np.asarray(bits, dtype=np.uint8).ravel()
        if np.any(arr > 1):
            raise ValueError("bit vectors hold only zeros and ones")
        self.bits = arr

    @property
    def s(self) -> int:
        return len(self.bits)

    def to_bytes(self) -> bytes:
        return np.packbits(self.bits, bitorder="little").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, s: int) -> "BitState":
        raw = np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little")
        if len(raw) < s or np.any(raw[s:]):
            raise ValueError("byte string does not hold an s-bit state")
        return cls(raw[:s])

    def to_str(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)

    @classmethod
    def from_str(cls, text: str) -> "BitState":
        return cls([1 if c == "1" else 0 for c in text])

    def __eq__(self, other) -> bool:
        return isinstance(other, BitState) and np.array_equal(self.bits, other.bits)

    def __repr__(self) -> str:
        return f"BitState({self.to_str()!r})"


class StreamPosition(NamedTuple):
    pass_index: int
    offset: int


class StreamAlgorithm:
    """Base class for ``s``-bit, ``passes``-pass streaming algorithms.

    Subclasses implement the batch methods; the single-run helpers wrap them.
    """

    s: int
    passes: int

    def init_batch(self, count: int) -> np.ndarray:
        return np.zeros((count, self.s), dtype=np.uint8)

    def update_batch(self, states: np.ndarray, samples: np.ndarray, pos: StreamPosition) -> np.ndarray:
        raise NotImplementedError

    def finish_batch(self, states: np.ndarray) -> list:
        raise NotImplementedError

    def init(self) -> BitState:
        return BitState(self.init_batch(1)[0])

    def update(self, sample, state: BitState, pos: StreamPosition) -> BitState:
        out = self.update_batch(state.bits[None, :], np.asarray(sample)[None, :], pos)
        return BitState(out[0])

    def finish(self, state: BitState):
        return self.finish_batch(state.bits[None, :])[0]


class ConstantEcho(StreamAlgorithm):
    """Keeps a single constant bit and outputs it."""

    def __init__(self, value: int = 1, passes: int = 1):
        self.s, self.passes, self.value = 1, passes, int(value)

    def init_batch(self, count):
        return np.full((count, 1), self.value, dtype=np.uint8)

    def update_batch(self, states, samples, pos):
        return states

    def finish_batch(self, states):
        return [int(v) for v in states[:, 0]]


@dataclass(frozen=True)
class StreamAudit:
    steps: int
    max_bits: int
    budget: int


def _audit(states: np.ndarray, s: int, step: int, full: bool) -> int:
    if states.ndim != 2 or states.shape[1] > s:
        raise MemoryViolation(f"step {step}: state has {states.shape[-1]} bits, budget {s}")
    if full and (states.dtype != np.uint8 or np.any(states > 1)):
        raise MemoryViolation(f"step {step}: state is not a bit vector")
    return states.shape[1]


def run_stream_batch(alg: StreamAlgorithm, data: np.ndarray, passes: int | None = None,
                     debug: bool = False) -> tuple[list, StreamAudit]:
    """Run ``alg`` on ``data`` of shape ``(B, t, d)``, replaying it for every pass.

    The state size is checked after every update; in ``debug`` mode the
    contents are also checked to be bits.
    """
    passes = alg.passes if passes is None else passes
    B, t = data.shape[0], data.shape[1]
    if t < 1:
        raise ValueError("need at least one sample")
    states = alg.init_batch(B)
    max_bits = _audit(states, alg.s, -1, True)
    step = 0
    spot = max(1, (t * passes) // 16)
    for p in range(passes):
        for o in range(t):
            states = alg.update_batch(states, data[:, o], StreamPosition(p, o))
            max_bits = max(max_bits, _audit(states, alg.s, step, debug or step % spot == 0))
            step += 1
    return alg.finish_batch(states), StreamAudit(step, max_bits, alg.s)


def run_stream(alg: StreamAlgorithm, sampler: Callable, t: int, passes: int | None = None,
               seed: int = 0, debug: bool = False):
    """Draw ``t`` samples once from ``sampler(rng, t)`` and stream them ``passes`` times.

    Returns ``(output, audit)``.
    """
    rng = np.random.default_rng(seed)
    data = np.asarray(sampler(rng, t))
    out, audit = run_stream_batch(alg, data[None], passes, debug)
    return out[0], audit


@dataclass(frozen=True)
class GroupScanConfig:
    """Hypotheses to scan, their planted correlation and the failure budget."""

    hypotheses: tuple
    rho: float
    delta: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "hypotheses", tuple(tuple(sorted(h)) for h in self.hypotheses))
        if len(self.hypotheses) < 1 or not 0 < self.rho < 1 or not 0 < self.delta < 1:
            raise ValueError("need hypotheses, 0 < rho < 1 and 0 < delta < 1")

    @property
    def k(self) -> int:
        return len(self.hypotheses)

    @property
    def t0(self) -> int:
        """Samples per phase, ``ceil(8/rho^2 ln(4k/delta))``."""
        return math.ceil(8.0 / self.rho**2 * math.log(4.0 * self.k / self.delta))

    @property
    def index_bits(self) -> int:
        return _bits_for(self.k)

    @property
    def counter_bits(self) -> int:
        return _bits_for(2 * self.t0 + 1)

    @property
    def slot_bits(self) -> int:
        return self.index_bits + self.counter_bits

    @property
    def control_bits(self) -> int:
        """Phase counter; its upper range also records the final decision."""
        return _bits_for(2 * self.k + 1)

    def slots_for(self, s: int) -> int:
        return max(0, (s - self.control_bits) // self.slot_bits)

    def bits_for_slots(self, slots: int) -> int:
        return self.control_bits + slots * self.slot_bits


def required_samples(cfg: GroupScanConfig, slots: int, passes: int = 1) -> int:
    """Stream length per pass that lets every phase finish."""
    if slots < 1:
        raise ValueError("need at least one slot")
    phases = math.ceil(cfg.k / slots)
    return math.ceil(phases / passes) * cfg.t0


def _to_bits(values: np.ndarray, width: int) -> np.ndarray:
    v = np.asarray(values, dtype=np.int32)
    return ((v[..., None] >> np.arange(width, dtype=np.int32)) & 1).astype(np.uint8)


def _from_bits(bits: np.ndarray) -> np.ndarray:
    # float64 dot products are exact for fields narrower than 53 bits
    weights = np.exp2(np.arange(bits.shape[-1]))
    return (bits @ weights).astype(np.int64)


class GroupScan(StreamAlgorithm):
    """Scan hypotheses a block of ``slots`` at a time, one block per phase.

    Memory layout: a control field, then per slot the hypothesis index and
    the running sum of products shifted by ``t0`` so it is nonnegative.
    Control values below the phase count name the current phase; ``P + h``
    records acceptance of hypothesis ``h`` and ``P + k`` a finished scan
    with no acceptance.
    """

    def __init__(self, cfg: GroupScanConfig, s: int, passes: int = 1):
        slots = cfg.slots_for(s)
        if slots < 1:
            raise ValueError(f"s={s} is below one slot; the minimal budget is {cfg.bits_for_slots(1)} bits")
        self.cfg, self.s, self.passes = cfg, s, passes
        self.slots = min(slots, cfg.k)
        self.phases = math.ceil(cfg.k / self.slots)
        self.phases_per_pass = math.ceil(self.phases / passes)
        cols = np.zeros((2, cfg.k), dtype=np.int64)
        for h, hyp in enumerate(cfg.hypotheses):
            cols[0, h] = hyp[0] - 1
            cols[1, h] = (hyp[1] if len(hyp) > 1 else hyp[0]) - 1
        if any(len(h) > 2 for h in cfg.hypotheses):
            raise ValueError("the scan handles subsets of size one or two")
        self._cols = cols
        self._single = np.array([len(h) == 1 for h in cfg.hypotheses])

    def _decode(self, states):
        cb, sb, ib = self.cfg.control_bits, self.cfg.slot_bits, self.cfg.index_bits
        control = _from_bits(states[:, :cb])
        region = states[:, cb : cb + self.slots * sb].reshape(len(states), self.slots, sb)
        return control, _from_bits(region[:, :, :ib]), _from_bits(region[:, :, ib:])

    def _encode(self, control, index, counter):
        cb, ib, ctb = self.cfg.control_bits, self.cfg.index_bits, self.cfg.counter_bits
        B = len(control)
        out = np.zeros((B, self.s), dtype=np.uint8)
        out[:, :cb] = _to_bits(control, cb)
        slots = np.concatenate([_to_bits(index, ib), _to_bits(counter, ctb)], axis=2)
        out[:, cb : cb + self.slots * (ib + ctb)] = slots.reshape(B, -1)
        return out

    def _counter_view(self, states):
        cb, sb, ib = self.cfg.control_bits, self.cfg.slot_bits, self.cfg.index_bits
        region = states[:, cb : cb + self.slots * sb].reshape(len(states), self.slots, sb)
        return region[:, :, ib:]

    def update_batch(self, states, samples, pos):
        t0, P = self.cfg.t0, self.phases
        local, within = divmod(pos.offset, t0)
        phase = pos.pass_index * self.phases_per_pass + local
        if local >= self.phases_per_pass or phase >= P:
            return states
        control = _from_bits(states[:, : self.cfg.control_bits])
        active = control < P
        if not np.any(active):
            return states
        lo = phase * self.slots
        valid = np.arange(self.slots) + lo < self.cfg.k
        if within == 0:
            _, index, counter = self._decode(states)
            control = np.where(active, phase, control)
            fresh = np.where(valid, np.arange(self.slots) + lo, 0)
            index = np.where(active[:, None], fresh[None, :], index)
            counter = np.where(active[:, None], t0, counter)
            states = self._encode(control, index, counter)
        # inside a phase every active run holds the same hypothesis block
        hyp = np.where(valid, np.arange(self.slots) + lo, 0)
        a = samples[:, self._cols[0][hyp]].astype(np.int64)
        b = samples[:, self._cols[1][hyp]].astype(np.int64)
        prod = np.where(self._single[hyp], a, a * b)
        step = active[:, None] & valid[None, :]
        counter = _from_bits(self._counter_view(states)) + np.where(step, prod, 0)
        out = states.copy()
        self._counter_view(out)[:] = _to_bits(counter, self.cfg.counter_bits)
        if within == t0 - 1:
            index = self._decode(out)[1]
            total = np.abs(counter - t0)
            hit = (total * 2 >= self.cfg.rho * t0) & step
            first = np.where(hit.any(axis=1), np.argmax(hit, axis=1), -1)
            accepted = first >= 0
            chosen = np.take_along_axis(index, np.maximum(first, 0)[:, None], axis=1)[:, 0]
            control = np.where(accepted, P + chosen, control)
            if phase == P - 1:
                control = np.where(active & ~accepted, P + self.cfg.k, control)
            out[:, : self.cfg.control_bits] = _to_bits(control, self.cfg.control_bits)
        return out

    def finish_batch(self, states):
        control = _from_bits(states[:, : self.cfg.control_bits])
        P, k = self.phases, self.cfg.k
        return [int(c - P) if P <= c < P + k else None for c in control]


def build_group_scan(cfg: GroupScanConfig, s: int, passes: int = 1) -> GroupScan:
    return GroupScan(cfg, s, passes)


@dataclass(frozen=True)
class ParitySource:
    """Samples from a parity hypothesis on the d-cube.

    ``planted`` fixes the hypothesis index; ``None`` draws one uniformly per
    trial.  With ``rho == 0`` samples are uniform and the truth is ``None``.
    """

    hypotheses: tuple
    rho: float
    d: int
    planted: int | None = None

    def draw(self, rng: np.random.Generator, count: int):
        if self.rho == 0:
            return None, parity_sample(None, 0.0, self.d, count, rng)
        h = self.planted if self.planted is not None else int(rng.integers(len(self.hypotheses)))
        return h, parity_sample(self.hypotheses[h], self.rho, self.d, count, rng)


def trial_seeds(seed: int, trials: int) -> list:
    """Independent per-trial seed sequences derived from one root seed."""
    return np.random.SeedSequence(seed).spawn(trials)


def _trial_data(source: ParitySource, t: int, seed: int, trials: int):
    truths, data = [], []
    for ss in trial_seeds(seed, trials):
        h, x = source.draw(np.random.default_rng(ss), t)
        truths.append(h)
        data.append(x)
    return truths, np.stack(data)


def success_rate(cfg: GroupScanConfig, s: int, source: ParitySource, trials: int, seed: int,
                 t: int | None = None, passes: int = 1) -> float:
    """Fraction of seeded trials whose output equals the planted hypothesis."""
    if trials < 1:
        raise ValueError("need at least one trial")
    alg = build_group_scan(cfg, s, passes)
    if t is None:
        t = required_samples(cfg, alg.slots, passes)
    truths, data = _trial_data(source, t, seed, trials)
    outputs, _ = run_stream_batch(alg, data, passes)
    return sum(o == h for o, h in zip(outputs, truths)) / trials


@dataclass(frozen=True)
class TradeoffRecord:
    s: int
    slots: int
    passes: int
    t: int | None
    success: float | None

    @property
    def feasible(self) -> bool:
        return self.t is not None

    @property
    def total_samples(self) -> int | None:
        return None if self.t is None else self.t * self.passes

    @property
    def ts_ell(self) -> int | None:
        return None if self.t is None else self.t * self.s * self.passes


def sweep_tradeoff(cfg: GroupScanConfig, budgets: Sequence[int], source: ParitySource, trials: int,
                   seed: int, passes: int = 1, target: float = 0.9) -> list:
    """Smallest stream length, in multiples of ``t0``, reaching ``target`` success per budget.

    The search doubles the number of phases' worth of samples until the
    target is met and then bisects down to single-phase granularity.
    """
    if not budgets:
        raise ValueError("need at least one budget")
    records = []
    for s in budgets:
        slots = cfg.slots_for(s)
        if slots < 1:
            records.append(TradeoffRecord(s, 0, passes, None, None))
            continue
        full = required_samples(cfg, min(slots, cfg.k), passes) // cfg.t0
        cache: dict = {}

        def rate(units):
            if units not in cache:
                cache[units] = success_rate(cfg, s, source, trials, seed, units * cfg.t0, passes)
            return cache[units]

        hi = 1
        while hi < full and rate(hi) < target:
            hi = min(2 * hi, full)
        if rate(hi) < target:
            records.append(TradeoffRecord(s, min(slots, cfg.k), passes, None, rate(hi)))
            continue
        lo = hi // 2  # rate(lo) < target, or lo == 0
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if rate(mid) >= target:
                hi = mid
            else:
                lo = mid
        records.append(TradeoffRecord(s, min(slots, cfg.k), passes, hi * cfg.t0, rate(hi)))
    return records
