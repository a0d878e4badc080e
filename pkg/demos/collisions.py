"""How many preamble collisions survive each retransmission round.

Compares the closed-form expectation and its upper bound with a Monte Carlo
draw of index sliding. Run with ``python3 demos/collisions.py``.
"""

import numpy as np

from uralab.collision import collision_analytics, simulate_collisions

Ka, Bp, B0, B, rounds = 8, 4, 2, 32, 3
a = collision_analytics(Ka, 2 ** Bp, B0, Bp, rounds)
sim = simulate_collisions(Ka, Bp, B0, B, rounds, 5000, np.random.default_rng(0))

print(f"P(no collision) analytic {a['p_no_colli']:.4f}, "
      f"simulated {(sim[:, 0] == 0).mean():.4f}")
print("round  expected  bound   simulated")
for r in range(rounds + 1):
    print(f"{r:5d}  {a['expected_collided'][r]:8.3f}  {a['bound'][r]:6.3f}  {sim[:, r].mean():8.3f}")
