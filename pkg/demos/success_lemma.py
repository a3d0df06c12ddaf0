"""Monte Carlo check of the search success bound.

A synthetic policy is gamma-correct at every correct prefix and
backtracks to the right ancestor once a wrong chain hits depth T_max,
each except with a small probability eps. With B attempts per node the
tree should finish with a correct chain at least 1 - 4 delta of the time,
using at most (B-1)(T_max-1) backtrack leaves.

    python demos/success_lemma.py
"""

from diligent.core import EngineConfig
from diligent.engine import simulate_success_lemma

for gamma, delta, T in [(1.0, 0.1, 10), (0.5, 0.1, 5), (0.3, 0.05, 8)]:
    cfg = EngineConfig.create(gamma, delta, T)
    print(f"gamma={gamma} delta={delta} T_max={T}: eps={cfg.epsilon:.5f} B={cfg.B}")
    # wrong chains run on to T_max; backtracking earlier only saves nodes
    st = simulate_success_lemma(cfg, 10_000, seed=0)
    print(f"  solve {st.success_rate:.4f} (99% low {st.lower99:.4f}, need {st.bound:.2f})"
          f"  leaves max {st.max_backtrack_leaves} mean {st.mean_backtrack_leaves:.2f}"
          f"  (bound {st.leaf_bound})")

# undershooting only costs leaves, never correctness
cfg = EngineConfig.create(0.5, 0.1, 5)
for u in (0.0, 0.5):
    st = simulate_success_lemma(cfg, 10_000, seed=1, undershoot=u)
    print(f"undershoot {u}: solve {st.success_rate:.4f}, mean leaves {st.mean_backtrack_leaves:.2f}")
