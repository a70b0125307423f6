"""Broadcast protocols among ``m`` parties holding ``n`` samples each.

Messages are strings of ``'0'``/``'1'`` written to a shared board.  The
speaker rule and the output rule see only the board; the message rule
additionally sees the speaking party's own samples.  Every protocol declares
its worst-case communication up front and a run that would exceed it stops
with :class:`BudgetExceeded`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .finite_dist import ATOM_BUDGET, CenteredFamily, Pmf, ResourceError, Space, power_pmf
from .infotheory import hellinger_sq, tv
from .streaming import BitState, ParitySource, StreamAlgorithm, StreamPosition, trial_seeds

__all__ = [
    "BudgetExceeded",
    "Transcript",
    "Protocol",
    "run_protocol",
    "ConstantProtocol",
    "FullBroadcast",
    "ThresholdProtocol",
    "GroupBroadcast",
    "build_group_broadcast",
    "LocalDecision",
    "StreamRelay",
    "stream_to_protocol",
    "partition_stream",
    "transcript_distribution",
    "transcript_pmfs",
    "SeparationReport",
    "tv_separation_check",
    "protocol_success_rate",
]


class BudgetExceeded(RuntimeError):
    """A run tried to send more bits than the protocol declared."""


@dataclass(frozen=True)
class Transcript:
    messages: tuple = ()

    @property
    def bits(self) -> int:
        return sum(len(b) for _, b in self.messages)

    def key(self) -> str:
        return "|".join(f"{p}:{b}" for p, b in self.messages)

    def extended(self, party: int, bits: str) -> "Transcript":
        return Transcript(self.messages + ((party, bits),))


def _encode(value: int, width: int) -> str:
    return format(int(value), f"0{width}b") if width else ""


class Protocol:
    """Base class.  Subclasses set ``m``, ``n`` and ``budget``."""

    m: int
    n: int
    budget: int

    def next_speaker(self, transcript: Transcript) -> int | None:
        raise NotImplementedError

    def message(self, party: int, inputs: np.ndarray, transcript: Transcript,
                rng: np.random.Generator) -> str:
        raise NotImplementedError

    def output(self, transcript: Transcript):
        raise NotImplementedError


def run_protocol(p: Protocol, inputs: Sequence[np.ndarray], seed: int = 0, max_messages: int = 10**6):
    """Run ``p`` on per-party sample sets; returns ``(label, transcript)``."""
    if len(inputs) != p.m:
        raise ValueError(f"protocol expects {p.m} parties, got {len(inputs)} input sets")
    for x in inputs:
        if len(x) != p.n:
            raise ValueError(f"each party needs {p.n} samples")
    rng = np.random.default_rng(seed)
    tr = Transcript()
    for _ in range(max_messages):
        speaker = p.next_speaker(tr)
        if speaker is None:
            return p.output(tr), tr
        bits = p.message(speaker, inputs[speaker], tr, rng)
        if set(bits) - {"0", "1"}:
            raise ValueError("messages must be bit strings")
        if tr.bits + len(bits) > p.budget:
            raise BudgetExceeded(f"message of {len(bits)} bits would pass the declared {p.budget}")
        tr = tr.extended(speaker, bits)
    raise BudgetExceeded(f"more than {max_messages} messages")


class ConstantProtocol(Protocol):
    def __init__(self, m: int, n: int, label=0):
        self.m, self.n, self.budget, self.label = m, n, 0, label

    def next_speaker(self, transcript):
        return None

    def output(self, transcript):
        return self.label


class FullBroadcast(Protocol):
    """Listed parties broadcast their samples, one bit per coordinate.

    ``decide`` maps the stacked broadcast samples (shape ``(count, d)``) to
    the output label; by default the output is ``None``.
    """

    def __init__(self, m: int, n: int, d: int, speakers: Sequence[int] | None = None,
                 samples: int | None = None, decide: Callable | None = None):
        self.m, self.n, self.d = m, n, d
        self.speakers = tuple(range(m)) if speakers is None else tuple(speakers)
        self.samples = n if samples is None else samples
        self.decide = decide
        self.budget = len(self.speakers) * self.samples * d

    def next_speaker(self, transcript):
        q = len(transcript.messages)
        return self.speakers[q] if q < len(self.speakers) else None

    def message(self, party, inputs, transcript, rng):
        x = np.asarray(inputs)[: self.samples]
        return "".join("1" if v == 1 else "0" for v in x.ravel())

    def output(self, transcript):
        if self.decide is None:
            return None
        bits = "".join(b for _, b in transcript.messages)
        x = np.array([1 if c == "1" else -1 for c in bits], dtype=np.int64).reshape(-1, self.d)
        return self.decide(x)


class ThresholdProtocol(Protocol):
    """Party 0 sends one bit: whether its sum of products over ``coords`` exceeds ``threshold``.

    The output is that bit.
    """

    def __init__(self, m: int, n: int, coords: Sequence[int], threshold: float = 0.0):
        self.m, self.n, self.budget = m, n, 1
        self.cols = [c - 1 for c in coords]
        self.threshold = threshold

    def next_speaker(self, transcript):
        return 0 if not transcript.messages else None

    def message(self, party, inputs, transcript, rng):
        stat = np.prod(np.asarray(inputs)[:, self.cols], axis=1).sum()
        return "1" if stat > self.threshold else "0"

    def output(self, transcript):
        return int(transcript.messages[0][1])


def _hypothesis_columns(hypotheses):
    return [[c - 1 for c in h] for h in hypotheses]


def _phase_samples(rho: float, k: int, delta: float) -> int:
    return math.ceil(8.0 / rho**2 * math.log(4.0 * k / delta))


class GroupBroadcast(Protocol):
    """Machines split into groups; each group estimates a block of hypotheses.

    Every machine broadcasts, for each hypothesis of its group's block, the
    integer sum of that hypothesis' product over its samples, offset by
    ``n`` and written in ``ceil(log2(2n+1))`` bits.  Blocks are padded to a
    fixed width so all machines send the same number of bits.  The output
    is the 0-based index of the hypothesis with the largest pooled
    ``|mean|``, lowest index on ties.
    """

    def __init__(self, hypotheses, rho: float, m: int, n: int, s_per_machine: int, delta: float = 0.1):
        self.hypotheses = tuple(tuple(sorted(h)) for h in hypotheses)
        self.k, self.rho, self.m, self.n, self.delta = len(self.hypotheses), rho, m, n, delta
        self.sum_bits = math.ceil(math.log2(2 * n + 1))
        self.per_machine = min(s_per_machine // self.sum_bits, self.k)
        if self.per_machine < 1:
            raise ValueError(f"s_per_machine={s_per_machine} cannot hold one {self.sum_bits}-bit sum")
        self.groups = math.ceil(self.k / self.per_machine)
        self.t0 = _phase_samples(rho, self.k, delta)
        need = self.groups * math.ceil(self.t0 / n)
        if m < need:
            raise ValueError(f"m={m} machines give a group fewer than {self.t0} samples; need m >= {need}")
        self.budget = m * self.per_machine * self.sum_bits
        self._cols = _hypothesis_columns(self.hypotheses)

    def block(self, group: int) -> range:
        return range(group * self.per_machine, min((group + 1) * self.per_machine, self.k))

    def next_speaker(self, transcript):
        q = len(transcript.messages)
        return q if q < self.m else None

    def message(self, party, inputs, transcript, rng):
        x = np.asarray(inputs, dtype=np.int64)
        fields = []
        for slot in range(self.per_machine):
            h = party % self.groups * self.per_machine + slot
            total = int(np.prod(x[:, self._cols[h]], axis=1).sum()) if h < self.k else 0
            fields.append(_encode(total + self.n, self.sum_bits))
        return "".join(fields)

    def output(self, transcript):
        sums = np.zeros(self.k)
        counts = np.zeros(self.k)
        w = self.sum_bits
        for party, bits in transcript.messages:
            g = party % self.groups
            for slot, h in enumerate(self.block(g)):
                sums[h] += int(bits[slot * w : (slot + 1) * w], 2) - self.n
                counts[h] += 1
        means = np.abs(sums) / (self.n * np.maximum(counts, 1))
        return int(np.argmax(means))


def build_group_broadcast(U, rho: float, m: int, n: int, s_per_machine: int, delta: float = 0.1) -> GroupBroadcast:
    return GroupBroadcast(U, rho, m, n, s_per_machine, delta)


class LocalDecision(Protocol):
    """Party 0 decides from its own samples and broadcasts only the index."""

    def __init__(self, hypotheses, rho: float, m: int, n: int, delta: float = 0.1):
        self.hypotheses = tuple(tuple(sorted(h)) for h in hypotheses)
        self.k, self.rho, self.m, self.n = len(self.hypotheses), rho, m, n
        self.t0 = _phase_samples(rho, self.k, delta)
        if n < self.t0:
            raise ValueError(f"one machine needs n >= {self.t0} samples to decide alone")
        self.width = max(1, math.ceil(math.log2(self.k)))
        self.budget = self.width
        self._cols = _hypothesis_columns(self.hypotheses)

    def next_speaker(self, transcript):
        return 0 if not transcript.messages else None

    def message(self, party, inputs, transcript, rng):
        x = np.asarray(inputs, dtype=np.int64)
        sums = [abs(int(np.prod(x[:, c], axis=1).sum())) for c in self._cols]
        return _encode(int(np.argmax(sums)), self.width)

    def output(self, transcript):
        return int(transcript.messages[0][1], 2)


class StreamRelay(Protocol):
    """Parties run a streaming algorithm over their shares and broadcast its state.

    Party ``u`` holds stream positions ``u n .. u n + n - 1``.  In every pass
    each of the first ``ceil(t/n)`` parties continues from the last state on
    the board, feeds its share and broadcasts the new ``s``-bit state; the
    last broadcast of a pass hands the state back to party 0.
    """

    def __init__(self, alg: StreamAlgorithm, t: int, m: int, n: int, passes: int | None = None):
        if m * n < t:
            raise ValueError(f"m n = {m * n} samples cannot hold a stream of length {t}")
        self.alg, self.t, self.m, self.n = alg, t, m, n
        self.passes = alg.passes if passes is None else passes
        self.active = math.ceil(t / n)
        self.budget = self.active * self.passes * alg.s

    def next_speaker(self, transcript):
        q = len(transcript.messages)
        return q % self.active if q < self.active * self.passes else None

    def message(self, party, inputs, transcript, rng):
        q = len(transcript.messages)
        p = q // self.active
        state = BitState.from_str(transcript.messages[-1][1]) if transcript.messages else self.alg.init()
        start = party * self.n
        for j in range(min(self.n, self.t - start)):
            state = self.alg.update(inputs[j], state, StreamPosition(p, start + j))
            if state.s > self.alg.s:
                raise BudgetExceeded("streaming state outgrew its budget")
        return state.to_str()

    def output(self, transcript):
        return self.alg.finish(BitState.from_str(transcript.messages[-1][1]))


def stream_to_protocol(alg: StreamAlgorithm, t: int, m: int, n: int, passes: int | None = None) -> StreamRelay:
    return StreamRelay(alg, t, m, n, passes)


def partition_stream(samples: np.ndarray, m: int, n: int, filler: np.ndarray | None = None) -> list:
    """Split a stream into ``m`` shares of ``n`` samples, padding past its end.

    Padding rows come from ``filler`` (or repeat the last sample); relays
    never read them.
    """
    samples = np.asarray(samples)
    missing = m * n - len(samples)
    if missing < 0:
        raise ValueError("stream is longer than m n")
    if missing:
        pad = filler[:missing] if filler is not None else np.repeat(samples[-1:], missing, axis=0)
        samples = np.concatenate([samples, pad])
    return [samples[j * n : (j + 1) * n] for j in range(m)]


def transcript_distribution(p: Protocol, family: CenteredFamily, index: int,
                            budget: int = ATOM_BUDGET, seeds: Sequence[int] = (0,)) -> dict:
    """Exact law of the transcript when all ``m n`` samples come from member ``index``.

    ``index`` 0 is the base.  Returns ``{key: (probability, transcript)}``;
    randomised protocols are averaged over the listed ``seeds``.
    """
    total = p.m * p.n
    if len(family.space) ** total * len(seeds) > budget:
        raise ResourceError("transcript enumeration exceeds the atom budget")
    joint = power_pmf(family.member(index), total, budget)
    out: dict = {}
    for mass, atom in zip(joint.mass, joint.space.atoms):
        if mass == 0:
            continue
        rows = np.asarray(atom).reshape(total, -1)
        shares = [rows[j * p.n : (j + 1) * p.n] for j in range(p.m)]
        for seed in seeds:
            _, tr = run_protocol(p, shares, seed)
            key = tr.key()
            prev = out.get(key, (0.0, tr))[0]
            out[key] = (prev + mass / len(seeds), tr)
    return out


def transcript_pmfs(p: Protocol, family: CenteredFamily, budget: int = ATOM_BUDGET):
    """Transcript laws under the base and every alternative on one shared space.

    Returns ``(pmfs, transcripts)`` where ``pmfs[i]`` is the law under member
    ``i`` and ``transcripts`` lists the atoms of the shared space.
    """
    dists = [transcript_distribution(p, family, i, budget) for i in range(family.k + 1)]
    keys = sorted(set().union(*dists))
    trs = {}
    for dist in dists:
        for key, (_, tr) in dist.items():
            trs[key] = tr
    space = Space(f"transcripts:{id(p)}", np.array(keys, dtype=object))
    pmfs = []
    for dist in dists:
        mass = np.array([dist.get(key, (0.0, None))[0] for key in keys])
        pmfs.append(Pmf(space, mass / mass.sum()))
    return pmfs, [trs[key] for key in keys]


@dataclass(frozen=True)
class SeparationReport:
    epsilon: float
    min_pairwise_tv: float
    tv_bound: float
    hellinger_sum: float
    hellinger_bound: float

    @property
    def passed(self) -> bool:
        return self.min_pairwise_tv >= self.tv_bound - 1e-12 and self.hellinger_sum >= self.hellinger_bound - 1e-12


def tv_separation_check(p: Protocol, family: CenteredFamily, epsilon: float | None = None,
                        budget: int = ATOM_BUDGET) -> SeparationReport:
    """Transcript separation implied by identifying the family with error ``epsilon``.

    The protocol's output is read as a 0-based hypothesis index.  The
    measured worst-case error is used when ``epsilon`` is omitted, and a
    supplied ``epsilon`` below the measured error is rejected.
    """
    pmfs, transcripts = transcript_pmfs(p, family, budget)
    labels = [p.output(tr) for tr in transcripts]
    k = family.k
    errors = []
    for i in range(1, k + 1):
        wrong = np.array([lab != i - 1 for lab in labels])
        errors.append(float(pmfs[i].mass[wrong].sum()))
    measured = max(errors)
    eps = measured if epsilon is None else epsilon
    if eps < measured - 1e-12:
        raise ValueError(f"measured error {measured} exceeds the supplied epsilon {eps}")
    pair_tv = min(tv(pmfs[i], pmfs[j]) for i in range(1, k + 1) for j in range(i + 1, k + 1))
    hsum = sum(hellinger_sq(pmfs[0], pmfs[i]) for i in range(1, k + 1))
    slack = max(1.0 - 2.0 * eps, 0.0)
    return SeparationReport(eps, pair_tv, 1.0 - 2.0 * eps, hsum, (k - 1) * slack**2 / 8.0)


def protocol_success_rate(p: Protocol, source: ParitySource, trials: int, seed: int) -> float:
    """Fraction of seeded trials whose output equals the planted hypothesis.

    Each trial draws ``m n`` samples from ``source`` with its own spawned
    seed and deals them to the parties in order.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    hits = 0
    for ss in trial_seeds(seed, trials):
        rng = np.random.default_rng(ss)
        truth, x = source.draw(rng, p.m * p.n)
        label, _ = run_protocol(p, [x[j * p.n : (j + 1) * p.n] for j in range(p.m)], int(rng.integers(2**32)))
        hits += label == truth
    return hits / trials
