"""Command-line driver: verification suites, trade-off sweeps and Gaussian checks.

Subcommands ``verify`` and ``gaussian`` write a JSON report; ``sweep-stream``
and ``sweep-protocol`` write CSV.  Exit status is 0 when every check passes,
1 when a check fails and 2 on usage or configuration errors.

Configuration files are flat ``key = value`` lines; ``#`` starts a comment.
``--set key=value`` overrides a file entry and ``--seed`` / ``--suite``
override everything else.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import sys
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import finite_dist as fd
from . import gaussian as gs
from . import infotheory as it
from . import lowerbound_chain as lc
from . import protocol as pr
from . import streaming as st


class ConfigError(ValueError):
    """Bad configuration: unknown key, malformed or out-of-range value."""


# ---------------------------------------------------------------- config


def _int_list(text: str) -> list:
    return [int(v) for v in text.split(",") if v.strip()]


def _float_list(text: str) -> list:
    return [float(v) for v in text.split(",") if v.strip()]


def _str_list(text: str) -> list:
    return [v.strip() for v in text.split(",") if v.strip()]


def _opt_float(text: str):
    return None if text.strip().lower() in ("", "none") else float(text)


VERIFY_SUITES = ("moments", "collections", "counting", "condition", "margins", "sdpi",
                 "alpha", "bias", "reduction", "entropy", "audit", "gaussian-closed")
GAUSSIAN_SUITES = ("gaussian-closed", "gaussian-mc", "gaussian-truncation")

_COMMON = {"seed": (int, 0), "tolerance": (_opt_float, None)}

SCHEMAS = {
    "verify": {
        **_COMMON,
        "suite": (_str_list, list(VERIFY_SUITES)),
        "instances": (int, 1000),
        "d_max": (int, 6),
        "gauss_d_max": (int, 6),
    },
    "gaussian": {
        **_COMMON,
        "suite": (_str_list, list(GAUSSIAN_SUITES)),
        "sigma": (float, 0.001),
        "d": (int, 4),
        "gauss_d_max": (int, 6),
        "N": (int, 200_000),
        "stacks": (int, 5),
        "points": (int, 10_000),
        "m": (int, 1),
        "n": (int, 1),
    },
    "sweep-stream": {
        **_COMMON,
        "d": (int, 16),
        "rho": (float, 0.25),
        "delta": (float, 0.1),
        "budgets": (_int_list, [2288, 1148, 578, 293]),
        "passes": (_int_list, [1]),
        "trials": (int, 100),
        "target": (float, 0.9),
    },
    "sweep-protocol": {
        **_COMMON,
        "d": (int, 4),
        "rho": (float, 0.3),
        "delta": (float, 0.1),
        "m": (_int_list, [6, 12, 30]),
        "n": (_int_list, [100, 244, 488]),
        "s_per_machine": (_int_list, [10, 20, 60]),
        "trials": (int, 200),
    },
}


def _positive(key, value):
    items = value if isinstance(value, list) else [value]
    if not items:
        raise ConfigError(f"{key} must not be empty")
    for v in items:
        if isinstance(v, (int, float)) and not v > 0:
            raise ConfigError(f"{key} values must be positive, got {v}")


def parse_config_text(text: str) -> dict:
    out = {}
    for num, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {num}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = value
    return out


def build_config(command: str, raw: dict) -> dict:
    """Parse raw string values against the command's schema and fill defaults."""
    schema = SCHEMAS[command]
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"unknown config key(s) for {command}: {', '.join(unknown)}")
    cfg = {}
    for key, (parse, default) in schema.items():
        if key in raw:
            try:
                cfg[key] = parse(raw[key]) if isinstance(raw[key], str) else raw[key]
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}") from None
        else:
            cfg[key] = list(default) if isinstance(default, list) else default
    seed = cfg["seed"]
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    if cfg["tolerance"] is not None and cfg["tolerance"] < 0:
        raise ConfigError("tolerance must be nonnegative")
    for key, value in cfg.items():
        if key not in ("seed", "tolerance", "suite"):
            _positive(key, value)
    if "suite" in cfg:
        allowed = VERIFY_SUITES if command == "verify" else GAUSSIAN_SUITES
        bad = [s for s in cfg["suite"] if s not in allowed]
        if bad:
            raise ConfigError(f"unknown suite(s): {', '.join(bad)}")
    for key in ("rho", "delta", "target"):
        if key in cfg and not cfg[key] < 1:
            raise ConfigError(f"{key} must be below 1")
    return cfg


# ---------------------------------------------------------------- report


@dataclass
class Report:
    tolerance: float | None = None
    records: list = field(default_factory=list)
    suite: str = ""

    def _tol(self, tol):
        return tol if self.tolerance is None else self.tolerance

    def _add(self, name, anchor, status, value, bound, slack, note=None):
        rec = {"suite": self.suite, "name": name, "anchor": anchor, "status": status,
               "value": _num(value), "bound": _num(bound), "slack": _num(slack)}
        if note:
            rec["note"] = note
        self.records.append(rec)

    def close(self, name, anchor, value, target, tol=1e-12):
        err = abs(value - target)
        self._add(name, anchor, "pass" if err <= self._tol(tol) else "fail", value, target,
                  self._tol(tol) - err)

    def at_most(self, name, anchor, value, bound, tol=1e-12):
        self._add(name, anchor, "pass" if value <= bound + self._tol(tol) else "fail", value, bound,
                  bound - value)

    def at_least(self, name, anchor, value, bound, tol=1e-12):
        self._add(name, anchor, "pass" if value >= bound - self._tol(tol) else "fail", value, bound,
                  value - bound)

    def holds(self, name, anchor, ok: bool, value=None, note=None):
        self._add(name, anchor, "pass" if ok else "fail", value, None, None, note)

    def note(self, name, anchor, value, bound=None, note=None):
        self._add(name, anchor, "report-only", value, bound, None, note)

    @property
    def failed(self) -> bool:
        return any(r["status"] == "fail" for r in self.records)

    def summary(self) -> dict:
        out: dict = {}
        for r in self.records:
            counts = out.setdefault(r["suite"], {"pass": 0, "fail": 0, "report-only": 0})
            counts[r["status"]] += 1
        return out


def _num(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else str(v)


# ---------------------------------------------------------------- verify suites


def _subsets(d, max_size):
    for size in range(1, max_size + 1):
        yield from itertools.combinations(range(1, d + 1), size)


def suite_moments(rep: Report, cfg, rng):
    worst = 0.0
    for d in range(1, min(cfg["d_max"], 6) + 1):
        for rho in (0.1, 0.5, 0.9):
            for I in _subsets(d, 3):
                p = fd.parity_pmf(I, rho, d)
                for J in _subsets(d, 3):
                    worst = max(worst, abs(fd.expected_monomial(p, J) - (rho if I == J else 0.0)))
    rep.close("parity monomial expectations", "parity-moment-identity", worst, 0.0)


def suite_collections(rep: Report, cfg, rng):
    mismatches = 0
    checked = 0
    for d in range(2, min(cfg["d_max"], 6) + 1):
        subsets = list(_subsets(d, d))
        fam = fd.build_parity_family(subsets, 0.5, d)
        for _ in range(200):
            J = tuple(subsets[i] for i in rng.choice(len(subsets), size=int(rng.integers(1, 5))))
            value = fd.collection_moment(fam, J)  # raises when fast path and brute force disagree
            expect = 1.0 if not fd.symmetric_difference(J) else 0.0
            mismatches += value != expect
            checked += 1
    rep.holds("collection moments match the empty-symmetric-difference rule", "collection-moment-rule",
              mismatches == 0, checked, note=f"{checked} collections")


def suite_counting(rep: Report, cfg, rng):
    worst = worst_even = -math.inf
    odd_lone_free = []
    for d in range(2, min(cfg["d_max"], 6) + 1):
        for r in range(2, min(3, d) + 1):
            for l in range(2, 5):
                bound = fd.tuples_bound(d, r, l)
                worst_even = max(worst_even, fd.count_even_cover_collections(d, r, l) - bound)
                count = fd.count_closed_collections(d, r, l)
                if (l * r) % 2:
                    if count:
                        odd_lone_free.append(f"(d={d},r={r},l={l}):{count}")
                else:
                    worst = max(worst, count - bound)
    rep.at_most("lone-element-free counts against bound, even l r", "closed-collection-count", worst, 0.0, 0.0)
    rep.at_most("even-cover counts against bound, zero for odd l r", "even-cover-count", worst_even, 0.0, 0.0)
    rep.note("lone-element-free counts with odd l r", "closed-collection-count-odd", len(odd_lone_free),
             0, note="nonzero: " + " ".join(odd_lone_free) if odd_lone_free else None)


def suite_condition(rep: Report, cfg, rng):
    pairs = list(itertools.combinations(range(1, 5), 2))
    fam = fd.build_parity_family(pairs, 0.3, 4)
    rep.close("pairs family second-order terms", "correlation-sum-order2",
              fd.correlation_condition_lhs(fam, 100, 2), 0.0)
    rep.close("pairs family sum through order 3, n=100", "correlation-sum-order3",
              fd.correlation_condition_lhs(fam, 100, 3), 4 * 100**-1.5)
    rep.at_most("tail of the correlation sum", "correlation-tail",
                fd.corr_tail_bound(4, 4**8, 3), 1 / (2 * 4**8))


def _random_joint(rng, shape):
    return it.JointPmf(it.random_pmf(rng, shape, sparsity=rng.choice([0.0, 0.3])))


def _random_channel(rng, a, b):
    return it.Channel(fd.Space(f"a{a}", np.arange(a)), fd.Space(f"b{b}", np.arange(b)),
                      rng.dirichlet(np.ones(b), a))


def suite_margins(rep: Report, cfg, rng):
    N = cfg["instances"]
    worst: dict = {}

    def keep(name, value):
        worst[name] = min(worst.get(name, math.inf), value)

    for _ in range(N):
        size = int(rng.integers(2, 9))
        p, q = it.random_pmf(rng, size, 0.2), it.random_pmf(rng, size, 0.2)
        lo, hi = it.sandwich_margin(p, q)
        keep("hellinger below tv", lo)
        keep("tv below sqrt2 hellinger", hi)
        c = it.Channel(fd.Space("s", np.arange(size)), fd.Space("o", np.arange(3)),
                       rng.dirichlet(np.ones(3), size))
        keep("data processing, tv", it.dpi_margin(p, q, c, "tv"))
        keep("data processing, hellinger", it.dpi_margin(p, q, c, "hellinger"))
        j = _random_joint(rng, (int(rng.integers(2, 5)), size))
        keep("data processing, mutual information", it.mi_dpi_margin(j, c))
        b = int(rng.integers(2, 6))
        m = it.random_pmf(rng, (2, b))
        rows = m / m.sum(axis=1, keepdims=True)
        keep("information against hellinger, uniform bit", it.hel_i_margin(it.JointPmf(0.5 * rows)))
        pa = rng.uniform(0.05, 0.95)
        keep("information against hellinger, biased bit",
             it.zzi_margin(it.JointPmf(np.array([[pa], [1 - pa]]) * rows)))
        keep("mixture contraction", it.mix_contraction_margin(p, q, float(rng.uniform())))
        parts = [it.random_pmf(rng, int(rng.integers(2, 4))) for _ in range(int(rng.integers(2, 4)))]
        xs = parts[0]
        for part in parts[1:]:
            xs = np.multiply.outer(xs, part)
        npi = int(rng.integers(2, 4))
        kernel = rng.dirichlet(np.ones(npi), xs.size).T.reshape((npi,) + xs.shape)
        keep("information superadditivity", it.info_superadditivity_margin(kernel * xs[None]))
    for name, value in worst.items():
        rep.at_least(name, "margin:" + name.replace(" ", "-").replace(",", ""), value, 0.0)


def suite_sdpi(rep: Report, cfg, rng):
    j = it.JointPmf(np.array([[0.5, 0.0], [0.0, 0.5]]))
    ac = j.mass @ it.flip_channel(0.75).matrix
    value = it.mutual_info(ac)
    rep.close("uniform bit through q=0.5", "sdpi-closed-form", value, 1 - it.binary_entropy(0.75), 1e-6)
    rep.at_most("uniform bit through q=0.5 against q^2", "sdpi-closed-form-bound", value, 0.25)
    worst = math.inf
    for _ in range(cfg["instances"]):
        j = _random_joint(rng, (int(rng.integers(2, 6)), 2))
        worst = min(worst, it.sdpi_margin(j, float(rng.uniform())))
    rep.at_least("strong data processing on random instances", "sdpi-random", worst, 0.0)


def suite_alpha(rep: Report, cfg, rng):
    sol = lc.solve_alpha(10, 100, 0.001)
    rep.close("alpha at k=10, n=100, rho=0.001", "alpha-example", sol.alpha, 0.117545, 1e-6)
    lower_gap = upper_gap = math.inf
    residual = 0.0
    for _ in range(cfg["instances"]):
        k = int(rng.integers(2, 1001))
        n = int(rng.integers(1, 10_001))
        rho = float(rng.uniform(0.01, 1.0)) * lc.max_admissible_rho(k, n)
        s = lc.solve_alpha(k, n, rho)
        lo, hi = lc.alpha_bounds(k, n, rho)
        lower_gap = min(lower_gap, s.alpha - lo)
        upper_gap = min(upper_gap, hi - s.alpha)
        residual = max(residual, abs(s.residual))
    rep.at_least("alpha above its lower bound", "alpha-lower", lower_gap, 0.0, 1e-9)
    rep.at_least("alpha below its upper bound", "alpha-upper", upper_gap, 0.0, 1e-9)
    rep.at_most("fixed-point residual", "alpha-residual", residual, 0.0, 1e-9)


def _demo_chains():
    yield "singletons d=2 n=2", lc.build_chain(fd.build_parity_family([(1,), (2,)], 0.01, 2), 2)
    yield "singletons d=3 n=1", lc.build_chain(fd.build_parity_family([(1,), (2,), (3,)], 0.02, 3), 1)
    yield "singletons d=3 n=2", lc.build_chain(fd.build_parity_family([(1,), (2,), (3,)], 0.01, 3), 2)


def suite_bias(rep: Report, cfg, rng):
    for label, chain in _demo_chains():
        b = lc.verify_bias(chain)
        rep.at_most(f"{label}: joint with Y matches product form", "bias-item1", b.item1_error, 0.0)
        rep.at_most(f"{label}: joint with Z matches product form", "bias-item2", b.item2_error, 0.0)
        rep.at_most(f"{label}: Z_i=1 mass on good atoms", "bias-item3", b.item3_error, 0.0)
        rep.at_most(f"{label}: Z_i bias", "bias-item4", b.item4_value, b.item4_bound)
        rep.at_most(f"{label}: escape mass of the good set", "escape-mass", b.escape_mass, b.item4_bound)
        rep.at_most(f"{label}: Y_i to Z_i bias ratio", "bias-item5", b.item5_error, 0.0)
        rep.at_most(f"{label}: Y_i bias", "bias-item5-bound", b.item5_value, b.item5_bound)


def suite_reduction(rep: Report, cfg, rng):
    push = moment = 0.0
    for _ in range(max(1, cfg["instances"] // 20)):
        fam = fd.random_centered_family(rng, int(rng.integers(2, 9)), int(rng.integers(1, 5)), 0.2)
        bcd, back = lc.reduce_cd_to_bcd(fam)
        for i in range(fam.k + 1):
            push = max(push, float(np.max(np.abs(it.compose(back, bcd.member(i)).mass - fam.member(i).mass))))
        a, b = lc.centered_moments(fam, 3), lc.centered_moments(bcd, 3)
        moment = max(moment, max(abs(a[s] - b[s]) for s in a))
    rep.at_most("back channel reproduces every member", "reduction-pushforward", push, 0.0, 1e-10)
    rep.at_most("centred moments up to order 3 preserved", "reduction-moments", moment, 0.0, 1e-10)


def suite_entropy(rep: Report, cfg, rng):
    for label, chain in _demo_chains():
        rep.note(f"{label}: k - H(Y)", "entropy-deficit", lc.entropy_deficit(chain), chain.k)


def suite_audit(rep: Report, cfg, rng):
    for label, chain in _demo_chains():
        N = len(chain.base_n)
        pi = _random_channel(rng, N, 4)
        pi = it.Channel(chain.base_n.space, pi.out, pi.matrix)
        audit = lc.transcript_audit(chain, pi)
        rep.note(f"{label}: Hellinger sum over information bracket", "transcript-audit", audit.ratio,
                 note=f"lhs={audit.lhs:.6g} bracket={audit.bracket:.6g}")
        margins = lc.chain_inequalities(chain, pi)
        rep.at_least(f"{label}: chain inequalities", "chain-steps", margins.minimum(), 0.0)


def _gaussian_closed(rep: Report, cfg, rng, sigma=None):
    d_max = cfg["gauss_d_max"]
    s = 0.3
    rep.close("determinant of planted covariance", "gaussian-det",
              float(np.linalg.det(gs.planted_cov((1, 2), s, 4))), gs.planted_det(s))
    rep.close("distinct pair product moment", "gaussian-pair-moment",
              gs.high_order_closed([(1, 2), (3, 4)], 0.1, 4), 1.0)
    rep.close("same pair second moment", "gaussian-same-pair",
              gs.same_pair_moment((1, 2), 0.1, 4), 1 / (1 - 0.01), 1e-10)
    worst = 0.0
    count = 0
    for d in range(2, d_max + 1):
        pairs = list(itertools.combinations(range(1, d + 1), 2))
        for r in range(1, 5):
            for combo in itertools.combinations_with_replacement(pairs, r):
                if gs.has_unique_coordinate(combo):
                    worst = max(worst, abs(gs.centered_high_order_closed(combo, 0.2, d)))
                    count += 1
    rep.at_most("centred moments vanish with a lone coordinate", "gaussian-unique-coordinate", worst, 0.0, 1e-10)
    sigma = gs.max_stack_sigma() * 0.999 if sigma is None else sigma
    if sigma > gs.max_stack_sigma():
        rep.note("stacked covariance bounds", "gaussian-stack", None,
                 note=f"skipped: sigma={sigma} above the stack gate {gs.max_stack_sigma():.6g}")
        return
    det_worst = entry_worst = 0.0
    for d in range(4, d_max + 1):
        pairs = list(itertools.combinations(range(1, d + 1), 2))
        for r in range(2, gs.B + 1):
            for _ in range(20):
                combo = [pairs[i] for i in rng.choice(len(pairs), size=r, replace=False)]
                stack = gs.stack_build(combo, sigma, d)
                det_worst = max(det_worst, stack.det)
                entry_worst = max(entry_worst, float(np.max(np.abs(stack.matrix))))
    rep.at_most("stacked covariance determinant", "gaussian-stack-det", det_worst, 2.0)
    rep.at_most("stacked covariance entries", "gaussian-stack-entries", entry_worst, 2.0)


def suite_gaussian_mc(rep: Report, cfg, rng):
    d, N = cfg["d"], cfg["N"]
    sigma = 0.2
    pairs = list(itertools.combinations(range(1, d + 1), 2))
    worst = 0.0
    for _ in range(cfg["stacks"]):
        r = int(rng.integers(1, min(4, len(pairs)) + 1))
        combo = [pairs[i] for i in rng.choice(len(pairs), size=r, replace=True)]
        exact = gs.high_order_closed(combo, sigma, d)
        est, se = gs.mc_high_order(combo, sigma, d, N, int(rng.integers(2**32)))
        worst = max(worst, abs(est - exact) / se)
    rep.at_most("Monte Carlo moments within 3 standard errors", "gaussian-mc", worst, 3.0, 0.0)


def suite_gaussian_truncation(rep: Report, cfg, rng):
    d, sigma = cfg["d"], cfg["sigma"]
    tc = gs.truncation_params(d, cfg["m"], cfg["n"], sigma)
    x = gs.sample_planted((1, 2), sigma, d, cfg["N"], int(rng.integers(2**32)))
    escape = float(np.mean(np.any(np.abs(x) > tc.R, axis=1)))
    rep.at_most("empirical box escape", "gaussian-box-escape", escape, tc.escape_bound(), 0.0)
    if sigma * tc.R**2 / (1 - sigma**2) > 1:
        rep.note("truncated ratio bound", "gaussian-truncated-ratio", None,
                 note=f"skipped: sigma R^2/(1-sigma^2) > 1 at sigma={sigma}, R={tc.R:.4g}")
        return
    check = gs.truncated_ratio_check((1, 2), sigma, tc.R, d, cfg["points"], int(rng.integers(2**32)))
    rep.at_most("truncated ratio deviation", "gaussian-truncated-ratio", check.deviation, check.bound)


SUITES: dict[str, Callable] = {
    "moments": suite_moments,
    "collections": suite_collections,
    "counting": suite_counting,
    "condition": suite_condition,
    "margins": suite_margins,
    "sdpi": suite_sdpi,
    "alpha": suite_alpha,
    "bias": suite_bias,
    "reduction": suite_reduction,
    "entropy": suite_entropy,
    "audit": suite_audit,
    "gaussian-closed": lambda rep, cfg, rng: _gaussian_closed(rep, cfg, rng, cfg.get("sigma")),
    "gaussian-mc": suite_gaussian_mc,
    "gaussian-truncation": suite_gaussian_truncation,
}


def run_suites(command: str, cfg: dict) -> Report:
    rep = Report(cfg["tolerance"])
    root = np.random.SeedSequence(cfg["seed"])
    for name, ss in zip(cfg["suite"], root.spawn(len(cfg["suite"]))):
        rep.suite = name
        try:
            SUITES[name](rep, cfg, np.random.default_rng(ss))
        except (ArithmeticError, ValueError, fd.ResourceError) as exc:
            rep.holds(f"suite {name} ran to completion", "suite-error", False, note=f"{type(exc).__name__}: {exc}")
    return rep


# ---------------------------------------------------------------- sweeps


def _pairs(d):
    return tuple(itertools.combinations(range(1, d + 1), 2))


def sweep_stream_rows(cfg: dict):
    scan = st.GroupScanConfig(_pairs(cfg["d"]), cfg["rho"], cfg["delta"])
    source = st.ParitySource(scan.hypotheses, cfg["rho"], cfg["d"])
    rows = []
    for passes in cfg["passes"]:
        records = st.sweep_tradeoff(scan, cfg["budgets"], source, cfg["trials"], cfg["seed"], passes, cfg["target"])
        for r in records:
            rows.append({
                "d": cfg["d"], "k": scan.k, "rho": cfg["rho"], "delta": cfg["delta"],
                "s_bits": r.s, "slots": r.slots, "passes": r.passes,
                "t": "" if r.t is None else r.t,
                "total_samples": "" if r.t is None else r.total_samples,
                "ts_ell": "" if r.t is None else r.ts_ell,
                "success_rate": "infeasible" if r.success is None else f"{r.success:.4f}",
                "trials": cfg["trials"], "seed": cfg["seed"],
            })
    return rows


STREAM_COLUMNS = ["d", "k", "rho", "delta", "s_bits", "slots", "passes", "t", "total_samples", "ts_ell",
                  "success_rate", "trials", "seed"]
PROTOCOL_COLUMNS = ["d", "k", "rho", "m", "n", "s_per_machine", "groups", "total_bits", "success_rate",
                    "trials", "seed"]


def stream_band(rows) -> tuple[float | None, bool]:
    values = [r["ts_ell"] for r in rows if r["ts_ell"] != ""]
    if not values:
        return None, False
    band = max(values) / min(values)
    return band, band <= 2.0


def sweep_protocol_rows(cfg: dict):
    hyps = _pairs(cfg["d"])
    k, rho, delta = len(hyps), cfg["rho"], cfg["delta"]
    source = st.ParitySource(hyps, rho, cfg["d"])
    rows = []
    base = {"d": cfg["d"], "k": k, "rho": rho}
    tail = {"trials": cfg["trials"], "seed": cfg["seed"]}
    for m, n in itertools.product(cfg["m"], cfg["n"]):
        for s in cfg["s_per_machine"]:
            row = {**base, "m": m, "n": n, "s_per_machine": s}
            try:
                p = pr.build_group_broadcast(hyps, rho, m, n, s, delta)
            except ValueError:
                sum_bits = math.ceil(math.log2(2 * n + 1))
                ppm = min(s // sum_bits, k)
                groups = math.ceil(k / ppm) if ppm else ""
                total = m * ppm * sum_bits if ppm else ""
                rows.append({**row, "groups": groups, "total_bits": total, "success_rate": "infeasible", **tail})
                continue
            rate = pr.protocol_success_rate(p, source, cfg["trials"], cfg["seed"])
            rows.append({**row, "groups": p.groups, "total_bits": p.budget, "success_rate": f"{rate:.4f}", **tail})
        try:
            local = pr.LocalDecision(hyps, rho, m, n, delta)
        except ValueError:
            continue
        rate = pr.protocol_success_rate(local, source, cfg["trials"], cfg["seed"])
        rows.append({**base, "m": m, "n": n, "s_per_machine": local.budget, "groups": "local",
                     "total_bits": local.budget, "success_rate": f"{rate:.4f}", **tail})
    return rows


def write_csv(rows, columns, stream, comment: str | None = None):
    writer = csv.DictWriter(stream, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    if comment:
        stream.write(f"# {comment}\n")


# ---------------------------------------------------------------- entry point


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="corrbounds", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("verify", "gaussian", "sweep-stream", "sweep-protocol"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output path (stdout when omitted)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
        if name in ("verify", "gaussian"):
            p.add_argument("--suite", help="comma-separated suite names")
    return ap


def load_config(args) -> dict:
    raw: dict = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                raw.update(parse_config_text(fh.read()))
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        raw[key.strip()] = value.strip()
    if args.seed is not None:
        raw["seed"] = str(args.seed)
    if getattr(args, "suite", None):
        raw["suite"] = args.suite
    return build_config(args.command, raw)


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        cfg = load_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    if args.command in ("verify", "gaussian"):
        rep = run_suites(args.command, cfg)
        doc = {"command": args.command, "seed": cfg["seed"], "status": "fail" if rep.failed else "pass",
               "summary": rep.summary(), "checks": rep.records}
        _emit(json.dumps(doc, indent=2) + "\n", args.out)
        for r in rep.records:
            if r["status"] == "fail":
                print(f"FAIL {r['suite']}: {r['name']} value={r['value']} bound={r['bound']}", file=sys.stderr)
        return 1 if rep.failed else 0

    buf = io.StringIO()
    if args.command == "sweep-stream":
        rows = sweep_stream_rows(cfg)
        band, ok = stream_band(rows)
        comment = f"ts_ell_band={'' if band is None else f'{band:.4f}'} within_factor_2={str(ok).lower()}"
        write_csv(rows, STREAM_COLUMNS, buf, comment)
    else:
        write_csv(sweep_protocol_rows(cfg), PROTOCOL_COLUMNS, buf)
    _emit(buf.getvalue(), args.out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
