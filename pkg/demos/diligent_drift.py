"""Reverse-curriculum training on a small drift task.

Stage t learns to finish a golden chain from t steps before its end,
exploring B sampled candidates for the new step and harvesting node,
done and backtrack examples from the resulting subtrees. When the
curriculum reaches the parity step the model still cannot predict it,
but it has learned to come back and try the other value.

    python demos/diligent_drift.py [n]
"""

import sys

from diligent.problems import Task
from diligent.train import TrainConfig, evaluate, stage_report_csv, train_full

n = int(sys.argv[1]) if len(sys.argv) > 1 else 6
task = Task("drift", n)
state = train_full(task, task.instances(range(500)), TrainConfig(heldout=100))
print(stage_report_csv(state, wall_time=False))
res = evaluate(state, task.instances(range(10**6, 10**6 + 300)))
print(f"drift n={n}: solve {res.solve_rate:.3f} (99% low {res.lower99:.3f}), "
      f"{res.mean_nodes:.1f} nodes and {res.mean_backtracks:.2f} backtracks per tree")
