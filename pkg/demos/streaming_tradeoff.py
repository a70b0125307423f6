"""
Memory against samples for the group-scan detector
==================================================

The detector tests ``slots`` pair hypotheses per phase of ``t0`` samples.
Halving the memory doubles the number of phases, so ``t * s`` stays roughly
flat across budgets.
"""

# %%
import itertools

from corrbounds import streaming as sm

d, rho = 10, 0.3
pairs = tuple(itertools.combinations(range(1, d + 1), 2))
cfg = sm.GroupScanConfig(pairs, rho, 0.1)
src = sm.ParitySource(pairs, rho, d)
print(f"k={cfg.k}, t0={cfg.t0}, {cfg.slot_bits} bits per slot, {cfg.control_bits} control bits")

# %%
budgets = [cfg.bits_for_slots(v) for v in (45, 15, 5)] + [10]
for r in sm.sweep_tradeoff(cfg, budgets, src, trials=60, seed=1):
    if not r.feasible:
        print(f"s={r.s:5d}: no room for a slot")
        continue
    print(f"s={r.s:5d} slots={r.slots:3d} t={r.t:6d} t*s={r.ts_ell:9d} success={r.success:.2f}")

# %%
# Two passes over half the stream cover the same phases.
s = cfg.bits_for_slots(5)
print("one pass :", sm.required_samples(cfg, 5), sm.success_rate(cfg, s, src, 60, 2))
print("two passes:", sm.required_samples(cfg, 5, 2), sm.success_rate(cfg, s, src, 60, 2, passes=2))
