"""
Blackboard protocols and the stream relay
=========================================

Six machines each hold t0 samples from a pair family on four coordinates.
Each broadcasts one product sum, which is enough to name the planted pair.
A streaming detector also runs as a protocol by handing its memory from
machine to machine.
"""

# %%
import itertools
import math

import numpy as np

from corrbounds import finite_dist as fd
from corrbounds import protocol as pr
from corrbounds import streaming as sm

pairs = tuple(itertools.combinations(range(1, 5), 2))
p = pr.build_group_broadcast(pairs, 0.3, m=6, n=488, s_per_machine=10)
src = sm.ParitySource(pairs, 0.3, 4)
print(f"{p.groups} groups, {p.sum_bits}-bit sums, {p.budget} bits in total")
print("success over 200 runs:", pr.protocol_success_rate(p, src, 200, 0))
try:
    pr.build_group_broadcast(pairs, 0.3, m=6, n=100, s_per_machine=10)
except ValueError as exc:
    print("n=100:", exc)

# %%
cfg = sm.GroupScanConfig(pairs, 0.5)
alg = sm.build_group_scan(cfg, cfg.bits_for_slots(2))
t = sm.required_samples(cfg, 2)
m, n = 3, math.ceil(t / 3)
data = src.draw(np.random.default_rng(4), t)[1]
relay = pr.stream_to_protocol(alg, t, m, n)
label, tr = pr.run_protocol(relay, pr.partition_stream(data, m, n))
direct, _ = sm.run_stream_batch(alg, data[None])
print(f"relay says {label}, direct run says {direct[0]}; {len(tr.messages)} messages, {tr.bits} bits")

# %%
# Exact transcript laws for a two-party broadcast of one sample each.
fam = fd.build_parity_family([(1,), (2,), (3,)], 0.8, 3)
broadcast = pr.FullBroadcast(2, 1, 3, decide=lambda x: int(np.argmax(x.sum(axis=0))))
rep = pr.tv_separation_check(broadcast, fam)
print(f"error {rep.epsilon:.3f}: pairwise TV {rep.min_pairwise_tv:.3f} >= {rep.tv_bound:.3f}, "
      f"Hellinger sum {rep.hellinger_sum:.3f} >= {rep.hellinger_bound:.3f}")
