"""Teacher forcing fits every local step and none of the parity step.

The first step of a drift chain is an n-bit parity of the input; the rest
only look one step back. A degree-2 model trained on golden chains gets
the local steps right and guesses the first one, so free-running
inference is right about half the time. With several independent copies
the chance of guessing all of them right shrinks like 2^-copies.

    python demos/sft_coin_flip.py
"""

import numpy as np

from diligent.baselines import sft_infer, sft_train, teacher_forced_accuracy
from diligent.problems import Task

rng = np.random.default_rng(0)
task = Task("drift", 8)
gen = sft_train(task, task.instances(range(2000)))
acc = teacher_forced_accuracy(gen, task.instances(range(10_000, 10_300)))
print("teacher-forced accuracy by step:", " ".join(f"{a:.2f}" for a in acc[1:]))
rate = np.mean([sft_infer(gen, i, rng).solved for i in task.instances(range(20_000, 20_500))])
print(f"drift n=8 inference solve rate: {rate:.3f}")

for k in (1, 2, 3):
    task = Task("boosted-drift", 8, components=k)
    gen = sft_train(task, task.instances(range(1000)))
    rate = np.mean([sft_infer(gen, i, rng).solved for i in task.instances(range(20_000, 20_400))])
    print(f"boosted drift, {k} copies: {rate:.3f}  (2^-{k} = {2.0**-k:.3f})")
