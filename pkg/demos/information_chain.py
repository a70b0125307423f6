"""
The X -> Y -> Z chain on a small binary family
==============================================

Builds the exact joint law of n samples, the clipped Y channel and the
symmetric Z channel for three single-coordinate hypotheses, then checks the
bias structure and runs the transcript audit with a random protocol channel.
"""

# %%
import numpy as np

from corrbounds import finite_dist as fd
from corrbounds import infotheory as it
from corrbounds import lowerbound_chain as lc

k, n, rho = 3, 2, 0.01
fam = fd.build_parity_family([(i,) for i in range(1, k + 1)], rho, k)
chain = lc.build_chain(fam, n)
print(f"alpha = {chain.alpha.alpha:.6f}, joint shape {chain.joint.mass.shape}")
print(f"good set holds {chain.good.mean():.1%} of the atoms")

# %%
rep = lc.verify_bias(chain)
print(f"Z bias {rep.item4_value:.3e} <= escape {rep.escape_mass:.3e} <= alpha^2/k {rep.item4_bound:.3e}")
print(f"Y bias {rep.item5_value:.3e} <= alpha/(2k) {rep.item5_bound:.3e}")
print("k - H(Y) =", lc.entropy_deficit(chain))

# %%
# A random 4-message protocol applied to the n samples.
rng = np.random.default_rng(0)
rows = rng.dirichlet(np.ones(4), len(chain.base_n))
pi = it.Channel(chain.base_n.space, fd.Space("pi4", np.arange(4)), rows)
audit = lc.transcript_audit(chain, pi)
print(f"Hellinger sum {audit.lhs:.3e}, information bracket {audit.bracket:.3e}, ratio {audit.ratio:.3g}")
print("smallest chain-step margin:", lc.chain_inequalities(chain, pi).minimum())

# %%
# Strong data processing through a bit that is kept with probability 3/4.
j = it.JointPmf(np.array([[0.5, 0.0], [0.0, 0.5]]))
print("I(A;C) =", it.mutual_info(j.mass @ it.flip_channel(0.75).matrix))
