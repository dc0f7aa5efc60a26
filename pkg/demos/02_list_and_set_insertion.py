"""Targeting only the noisy gates (LIIM) and grouping gates into sets (SIIM).

A three-qubit chain alternates CNOT(0,1) and CNOT(1,2). When one pair is much
noisier than the other, folding only that pair's gates removes most of the
error for a fraction of the extra gates.
"""
# %% Setup
from zne_lab import (
    BitValue,
    NoiseModel,
    exact_expectation,
    fiim_plan,
    generate_alternating_pair_chain,
    liim_fiim_plan,
    liim_riim_plan,
    siim_plan,
)
from zne_lab.estimator import exact_plan_value
from zne_lab.insertion import list_for_pair

c = generate_alternating_pair_chain(8, "111")
ideal = exact_expectation(c, NoiseModel(), BitValue())
nm = NoiseModel({(0, 1): 0.03, (1, 2): 0.002})
noisy = list_for_pair(c, (0, 1))
print("noiseless value:", ideal, " noisy CNOT indices:", noisy)

# %% Compare plans by residual error and total CNOTs executed
plans = {
    "fiim1": fiim_plan(c),
    "liim_fiim": liim_fiim_plan(c, noisy),
    "liim_riim": liim_riim_plan(c, noisy),
    "siim2": siim_plan(c, 2),
    "siim4": siim_plan(c, 4),
}
print(f"\n{'method':<10} {'|error|':>10} {'CNOTs':>6}")
print(f"{'none':<10} {abs(exact_expectation(c, nm, BitValue()) - ideal):10.6f} {c.n_cnots:6d}")
for name, plan in plans.items():
    err = abs(exact_plan_value(plan, nm, BitValue()) - ideal)
    print(f"{name:<10} {err:10.6f} {sum(e.circuit.n_cnots for e in plan):6d}")

# %% Coefficients are exact rationals
for e in plans["siim2"]:
    print(e.label, e.coefficient)
