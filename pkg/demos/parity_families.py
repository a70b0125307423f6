"""
Parity families and their correlation structure
================================================

A parity family biases the uniform cube toward even parity on one subset of
coordinates.  Products of the normalised density ratios average to 1 when the
subsets cancel coordinatewise and to 0 otherwise, which is what makes the
pairwise family on four coordinates cheap to analyse.
"""

# %%
import itertools

from corrbounds import finite_dist as fd

d, rho = 4, 0.3
pairs = list(itertools.combinations(range(1, d + 1), 2))
fam = fd.build_parity_family(pairs, rho, d)
print(f"{fam.k} hypotheses on {len(fam.space)} atoms, max ratio deviation {fam.max_deviation:.2f}")

# %%
# A monomial sees its own bias and nothing else.
p = fd.parity_pmf((1, 2), rho, d)
for J in [(1, 2), (1,), (1, 2, 3), (3, 4)]:
    print(f"E prod X_{J} = {fd.expected_monomial(p, J):+.3f}")

# %%
# Collections of hypotheses: a 3-cycle of pairs covers each coordinate twice.
for J in [((1, 2), (2, 3), (1, 3)), ((1, 2), (3, 4)), ((1, 2), (1, 2))]:
    print(J, "->", fd.collection_moment(fam, J))

# %%
# The partial correlation sum only picks up the four triangles at order 3.
n = 100
for order in (2, 3, 4):
    print(f"through order {order}: {fd.correlation_condition_lhs(fam, n, order):.6f}")
print("4 n^-1.5 =", 4 * n**-1.5)

# %%
# Lone-element-free versus even-cover collections of 3-subsets.
for l in (2, 3, 4):
    print(f"l={l}: lone-free {fd.count_closed_collections(5, 3, l):4d}  "
          f"even-cover {fd.count_even_cover_collections(5, 3, l):4d}  "
          f"bound {fd.tuples_bound(5, 3, l):.1f}")
