#!/usr/bin/env python3
"""The cancellations the estimator lives on, checked numerically.

Three families.  The counting identity sum_h (-1)^(h+1) C(k,h) C(h,j)
collapses to 1 at j=0, to (-1)^(k+1) at j=k, and to 0 everywhere in
between: the alternating combination wipes out every intermediate
collision order.  The bias identity telescopes (1+gamma)^h into
1 + (-1)^(k+1) gamma^k, one power of gamma per order.  The two centered
families (product form and subset-sum form) are the reason pilot error
multiplies rather than adds.

The bias identity residual is exactly 0.0 because that check runs in
rational arithmetic; the centered families run in doubles and sit around
1e-13.
"""

from noisysum.identities import (
    bias_cancellation_identity,
    centered_product_identity,
    centered_sum_identity,
    collision_coefficient_identity,
    identity_report,
)

print("counting identity, rows k = 1..6, columns j = 0..k:")
for k in range(1, 7):
    row = [collision_coefficient_identity(k, j) for j in range(0, k + 1)]
    print(f"  k={k}: {row}")

print("\nbias identity at gamma = 0.5:")
for k in (1, 2, 3, 8):
    r = bias_cancellation_identity(k, 0.5)
    print(f"  k={k}: lhs = {r.lhs:.10f}  rhs = {r.rhs:.10f}  residual = {r.residual}")

r = centered_product_identity([2.0, 3.0], 1.0)
print(f"\ncentered product on betas (2, 3), alpha 1: lhs = {r.lhs}, residual = {r.residual}")
r = centered_sum_identity([0.5, -0.25, 2.0], 0.3, 2)
print(f"centered subset-sum, m = 3, k = 2: residual = {r.residual:.2e}")

print("\nfull randomized report (kmax 20, 100 draws per family):")
for key, value in identity_report(kmax=20, seed=1, trials=100).items():
    print(f"  {key}: {value}")
