"""Single device versus the bundled calibration profiles on deepened circuits.

The four-CNOT benchmark is deepened by folding every gate k times. One device
with a fixed error runs the plan, and so do the bundled device profiles,
either each running everything (replicated) or sharing the entries
(sharded, round-robin).
"""
# %% Setup
from zne_lab import (
    BitValue,
    DeviceEnsemble,
    DeviceProfile,
    deepen,
    fiim_plan,
    generate_cnot_chain,
    load_device_profiles,
    run_replicated,
    run_sharded,
)

devices = load_device_profiles()
print("devices:", ", ".join(devices.names))
print("mean CX error: %.4f" % (sum(p.mean_cx_error for p in devices) / len(devices)))
single = DeviceEnsemble([DeviceProfile("single", {(0, 1): 0.0104})])
base = generate_cnot_chain(4, "10")

# %% 8192 shots per circuit; every device has its own random stream
print(f"\n{'CNOTs':>5} {'single':>9} {'replicated':>11} {'sharded':>9}")
for k in (1, 3, 7, 15, 31):
    c = deepen(base, k)
    plan = fiim_plan(c)
    budget = [8192] * len(plan)
    a = run_replicated(plan, single, budget, 1, BitValue()).value
    b = run_replicated(plan, devices, budget, 1, BitValue()).value
    s = run_sharded(plan, devices, budget, 1, BitValue()).value
    print(f"{c.n_cnots:5d} {a:9.4f} {b:11.4f} {s:9.4f}")
