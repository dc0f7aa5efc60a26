"""Mitigating a two-qubit CNOT chain under depolarizing noise and T1 decay.

Run with ``python demos/01_chain_sweep.py``. Prints one table per error rate.
"""
# %% Setup
import numpy as np

from zne_lab import (
    NoiseModel,
    TargetProbability,
    exact_expectation,
    fiim_plan,
    generate_cnot_chain,
    riim_plan,
)
from zne_lab.estimator import exact_plan_value
from zne_lab.noise import exact_probabilities

damping = dict(t1_us=50.0, cnot_duration_ns=200.0)


def ideal_target(c):
    # probability of the noiseless output bitstring
    i = int(np.argmax(exact_probabilities(c, NoiseModel())))
    return TargetProbability(format(i, "02b")[::-1])


# %% Damping alone already pulls the value below 1
for n in (2, 10, 40):
    c = generate_cnot_chain(n, "11")
    print(f"n={n:2d}  damping only: {exact_expectation(c, NoiseModel.uniform(0.0, **damping), ideal_target(c)):.5f}")

# %% Sweep chain length for two error rates, exact (infinite-shot) mode
for eps in (0.001, 0.005):
    nm = NoiseModel.uniform(eps, **damping)
    print(f"\neps = {eps}")
    print(f"{'n':>3} {'raw':>9} {'fiim1':>9} {'riim':>9}")
    for n in range(2, 41, 6):
        c = generate_cnot_chain(n, "11")
        obs = ideal_target(c)
        raw = exact_expectation(c, nm, obs)
        print(f"{n:3d} {raw:9.5f} {exact_plan_value(fiim_plan(c), nm, obs):9.5f} "
              f"{exact_plan_value(riim_plan(c), nm, obs):9.5f}")
