import json
from importlib import resources

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zne_lab import (
    BitValue,
    DeviceEnsemble,
    DeviceProfile,
    Estimate,
    JobLimits,
    NoiseModel,
    TargetProbability,
    additional_error,
    batch_jobs,
    fiim_plan,
    generate_cnot_chain,
    load_device_profiles,
    noise_model_of,
    riim_plan,
    run_plan,
    run_replicated,
    run_sharded,
    sample_normal_profiles,
)
from zne_lab.ensemble import (
    DATA_ENV,
    DeviceDataError,
    assign_entries,
    convert_tables,
    device_estimates,
    load_device_records,
    parse_bracketed,
    single_rate_ensemble,
)

BUNDLED_NAMES = [
    "ibmq_belem",
    "ibmq_bogota",
    "ibmq_casablanca",
    "ibmq_guadalupe",
    "ibmq_lima",
    "ibmq_manila",
    "ibmq_montreal",
    "ibmq_quito",
    "ibmq_santiago",
]


# -- synthetic profiles -----------------------------------------------------


def rates(ens):
    return np.array([p.cx_errors[(0, 1)] for p in ens])


def test_normal_profiles_deterministic():
    a = sample_normal_profiles(20, 0.01, 0.003, seed=4)
    b = sample_normal_profiles(20, 0.01, 0.003, seed=4)
    assert np.array_equal(rates(a), rates(b))
    assert not np.array_equal(rates(a), rates(sample_normal_profiles(20, 0.01, 0.003, seed=5)))


def test_sigma_zero_gives_mu():
    assert np.all(rates(sample_normal_profiles(50, 0.1, 0.0, seed=1)) == 0.1)


@pytest.mark.parametrize("antithetic", [False, True])
def test_sample_mean_near_mu(antithetic):
    r = rates(sample_normal_profiles(10_000, 0.1, 0.02, seed=8, antithetic=antithetic))
    assert abs(r.mean() - 0.1) <= 5 * r.std(ddof=1) / np.sqrt(len(r))
    assert r.std(ddof=1) == pytest.approx(0.02, rel=0.05)


def test_antithetic_mean_exact():
    r = rates(sample_normal_profiles(1000, 0.1, 0.03, seed=2, antithetic=True))
    assert r.mean() == pytest.approx(0.1, abs=1e-15)


def test_rejection_keeps_rates_in_range():
    r = rates(sample_normal_profiles(2000, 0.01, 0.02, seed=3))
    assert r.min() > 0 and r.max() <= 1


@pytest.mark.parametrize("mu, sigma", [(0.0, 0.1), (-0.1, 0.0), (0.1, -0.01)])
def test_normal_profiles_invalid(mu, sigma):
    with pytest.raises(ValueError):
        sample_normal_profiles(3, mu, sigma, 0)


def test_ensemble_validation():
    with pytest.raises(DeviceDataError):
        DeviceEnsemble([])
    p = DeviceProfile("a", {(0, 1): 0.01})
    with pytest.raises(DeviceDataError):
        DeviceEnsemble([p, p])
    assert DeviceEnsemble([p])["a"] is p


def test_profile_validation():
    assert DeviceProfile("x", {(1, 0): 0.02}).cx_errors == {(0, 1): 0.02}
    with pytest.raises(DeviceDataError):
        DeviceProfile("x", {(0, 1): 0.02, (1, 0): 0.03})
    with pytest.raises(DeviceDataError):
        DeviceProfile("x", {(0, 1): 1.5})
    with pytest.raises(DeviceDataError):
        DeviceProfile("x", {(0, 1): 0.1}, t1_us=(0.0, 10.0))


# -- calibration data -------------------------------------------------------


@pytest.mark.parametrize(
    "text, value", [("1.437[-2]", 1.437e-2), ("3.556[1]", 35.56), ("3.342[2]", 334.2), ("5.090", 5.09)]
)
def test_parse_bracketed(text, value):
    assert parse_bracketed(text) == pytest.approx(value, rel=1e-15)


def test_parse_bracketed_garbage():
    with pytest.raises(DeviceDataError):
        parse_bracketed("n/a")


def test_bundled_dataset_spot_values():
    ens = load_device_profiles()
    assert ens.names == BUNDLED_NAMES
    g = ens["ibmq_guadalupe"]
    assert g.cx_errors[(0, 1)] == 1.437e-2
    assert g.cx_length_ns[(0, 1)] == 334.2
    assert ens["ibmq_lima"].t1_us == (90.90, 98.64)
    assert ens["ibmq_belem"].readout_p0_given_1 == (2.720e-2, 3.660e-2)
    assert ens["ibmq_belem"].x_length_ns == 35.56


def test_retired_systems_are_marked():
    records = load_device_records()
    retired = [p.name for p in records if p.retired]
    assert len(retired) == 5
    assert len(records) == 14
    with pytest.raises(DeviceDataError):
        noise_model_of(next(p for p in records if p.retired))


def test_bundled_json_matches_converter():
    root = resources.files("zne_lab") / "data"
    converted = convert_tables((root / "device_tables.txt").read_text())
    assert json.loads((root / "devices.json").read_text()) == converted


def test_converter_schema():
    text = (
        r"\texttt{ibmq\_x} & 1.0[2], 2.0[2] & 3.0[1], 4.0[1] & 5.0, 5.1 & 1.0[-2], 2.0[-2] & 3.0[-3], 4.0[-3] \\" "\n"
        r"\texttt{ibmq\_x} & 1.0[-4], 2.0[-4] & 3.556[1] & 1.5[-2] & 3.0[2] \\" "\n"
    )
    data = convert_tables(text)
    assert data["schema_version"] == 1
    (rec,) = data["systems"]
    assert rec["name"] == "ibmq_x"
    assert rec["qubits"][1] == {
        "t1_us": 200.0, "t2_us": 40.0, "frequency_ghz": 5.1, "p0_given_1": 0.02, "p1_given_0": 0.004,
    }
    assert rec["cx"] == [{"pair": [0, 1], "error": 0.015, "length_ns": 300.0}]
    assert rec["x_length_ns"] == 35.56


def test_empty_file_errors(tmp_path):
    f = tmp_path / "empty.json"
    f.write_text("")
    with pytest.raises(DeviceDataError):
        load_device_profiles(f)


def test_no_active_systems_errors(tmp_path):
    f = tmp_path / "d.json"
    f.write_text(json.dumps({"systems": [{"name": "old", "retired": True}]}))
    with pytest.raises(DeviceDataError):
        load_device_profiles(f)


def test_schema_violation_names_field(tmp_path):
    f = tmp_path / "d.json"
    f.write_text(json.dumps({"systems": [{"name": "a", "qubits": [], "x_error": [], "cx": [{"pair": [0, 1]}]}]}))
    with pytest.raises(DeviceDataError, match="error"):
        load_device_profiles(f)


def test_env_override(tmp_path, monkeypatch):
    src = json.loads((resources.files("zne_lab") / "data" / "devices.json").read_text())
    src["systems"] = src["systems"][:2]
    f = tmp_path / "d.json"
    f.write_text(json.dumps(src))
    monkeypatch.setenv(DATA_ENV, str(f))
    assert load_device_profiles().names == BUNDLED_NAMES[:2]


# -- noise models -----------------------------------------------------------


def test_noise_model_of_guadalupe():
    g = load_device_profiles()["ibmq_guadalupe"]
    nm = noise_model_of(g)
    assert nm.epsilon((0, 1)) == 1.437e-2
    assert not nm.has_damping


def test_noise_model_with_damping():
    g = load_device_profiles()["ibmq_guadalupe"]
    nm = noise_model_of(g, include_damping=True)
    assert nm.has_damping
    assert nm.gamma(0) == pytest.approx(1 - np.exp(-334.2e-3 / 125.8))


def test_empty_profile_is_noiseless(four_cnot):
    nm = noise_model_of(DeviceProfile("quiet"), default_epsilon=0.0)
    from zne_lab import exact_expectation

    assert exact_expectation(four_cnot, nm, BitValue()) == 3.0


def test_synthetic_single_device_parameter():
    assert noise_model_of(DeviceProfile("s", {(0, 1): 0.0104})).epsilon((1, 0)) == 0.0104


def test_missing_pair_rejected():
    plan = fiim_plan(generate_cnot_chain(2, "00"))
    ens = DeviceEnsemble([DeviceProfile("far", {(1, 2): 0.01})])
    with pytest.raises(DeviceDataError):
        run_replicated(plan, ens, None, 0, BitValue())
    with pytest.raises(DeviceDataError):
        run_sharded(plan, ens, None, 0, BitValue())


# -- replicated and sharded execution ---------------------------------------


def test_replicated_single_device_equals_run_plan(four_cnot):
    plan = riim_plan(four_cnot)
    prof = DeviceProfile("one", {(0, 1): 0.03})
    budget = [500] * len(plan)
    got = run_replicated(plan, DeviceEnsemble([prof]), budget, 17, BitValue())
    assert got == run_plan(plan, noise_model_of(prof), budget, 17, BitValue())


def test_replicated_mean_of_device_estimates(four_cnot):
    plan = fiim_plan(four_cnot)
    ens = sample_normal_profiles(6, 0.02, 0.005, seed=1)
    budget = [400, 400]
    per = device_estimates(plan, ens, budget, 3, BitValue())
    got = run_replicated(plan, ens, budget, 3, BitValue())
    assert got.value == pytest.approx(np.mean([e.value for e in per]), abs=1e-15)
    assert got.variance == pytest.approx(sum(e.variance for e in per) / 36)
    assert got.shots_used == 6 * 800


def test_replicated_exact_sigma_zero_matches_single_device(two_cnot):
    plan = fiim_plan(two_cnot)
    obs = TargetProbability("10")
    ens = single_rate_ensemble(5, 0.01)
    single = run_plan(plan, NoiseModel.uniform(0.01), None, 0, obs)
    assert run_replicated(plan, ens, None, 0, obs).value == pytest.approx(single.value, abs=1e-15)


def test_sharded_identical_devices_equals_run_plan(four_cnot):
    plan = riim_plan(four_cnot)
    ens = single_rate_ensemble(3, 0.02)
    budget = [300] * len(plan)
    got = run_sharded(plan, ens, budget, 5, BitValue())
    assert got == run_plan(plan, NoiseModel({(0, 1): 0.02}), budget, 5, BitValue())


def test_round_robin_reuses_devices():
    c = generate_cnot_chain(20, "00")
    plan = riim_plan(c)
    assert len(plan) == 21
    assignment = assign_entries(len(plan), 14)
    assert assignment == [p % 14 for p in range(21)]
    ens = sample_normal_profiles(14, 0.01, 0.003, seed=0)
    est = run_sharded(plan, ens, None, 0, BitValue())
    assert np.isfinite(est.value)


def test_explicit_assignment():
    assert assign_entries(3, 2, {0: 1, 1: 0, 2: 1}) == [1, 0, 1]
    assert assign_entries(3, 2, [0, 0, 1]) == [0, 0, 1]
    for bad in [{0: 1, 1: 0}, [0, 2, 1], [0, 1], "random"]:
        with pytest.raises(ValueError):
            assign_entries(3, 2, bad)


def test_sharded_uses_assigned_device(two_cnot):
    plan = fiim_plan(two_cnot)
    obs = TargetProbability("10")
    ens = DeviceEnsemble([DeviceProfile("a", {(0, 1): 0.01}), DeviceProfile("b", {(0, 1): 0.05})])
    from zne_lab import exact_expectation

    expected = 1.5 * exact_expectation(two_cnot, NoiseModel({(0, 1): 0.05}), obs) - 0.5 * exact_expectation(
        plan.entries[1].circuit, NoiseModel({(0, 1): 0.01}), obs
    )
    assert run_sharded(plan, ens, None, 0, obs, strategy=[1, 0]).value == pytest.approx(expected, abs=1e-14)


def test_worker_count_invariance(four_cnot):
    plan = riim_plan(four_cnot)
    ens = sample_normal_profiles(8, 0.02, 0.005, seed=9)
    budget = [200] * len(plan)
    serial = run_replicated(plan, ens, budget, 21, BitValue(), workers=1)
    parallel = run_replicated(plan, ens, budget, 21, BitValue(), workers=3)
    assert serial == parallel


def test_replicated_variance_scales_as_one_over_n(two_cnot):
    plan = fiim_plan(two_cnot)
    obs = TargetProbability("10")
    n = 4
    ens = single_rate_ensemble(n, 0.05)
    budget = [256, 256]
    single = np.array([run_plan(plan, NoiseModel.uniform(0.05), budget, s, obs).value for s in range(10_000)])
    multi = np.array([run_replicated(plan, ens, budget, s, obs).value for s in range(10_000)])
    assert multi.var(ddof=1) == pytest.approx(single.var(ddof=1) / n, rel=0.05)


# -- batching ---------------------------------------------------------------


def test_batch_single_circuit():
    jobs = batch_jobs([8192], JobLimits(8192, 900))
    assert len(jobs) == 1 and [s.shots for s in jobs[0]] == [8192]


def test_batch_split_shots():
    jobs = batch_jobs([20000], JobLimits(8192, 900))
    assert [s.shots for s in jobs[0]] == [8192, 8192, 3616]


def test_batch_circuit_limit():
    jobs = batch_jobs([100] * 150, JobLimits(8192, 75))
    assert [len(j) for j in jobs] == [75, 75]


def test_job_limits_validation():
    with pytest.raises(ValueError):
        JobLimits(0, 10)


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.integers(0, 40000), max_size=60),
    st.integers(1, 9000),
    st.integers(1, 100),
)
def test_batch_covers_demands(demands, max_shots, max_circuits):
    jobs = batch_jobs(demands, JobLimits(max_shots, max_circuits))
    totals = [0] * len(demands)
    for job in jobs:
        assert 1 <= len(job) <= max_circuits
        for sub in job:
            assert 1 <= sub.shots <= max_shots
            totals[sub.circuit] += sub.shots
    assert totals == list(demands)


# -- metrics ----------------------------------------------------------------


def test_additional_error():
    assert additional_error(Estimate(1.0, 0.1), Estimate(1.0, 0.2)) == 0.0
    assert additional_error(Estimate(0.98, 0.0), Estimate(1.01, 0.0)) == pytest.approx(0.03)


def test_additional_error_sigma_zero_matched_seeds(four_cnot):
    plan = fiim_plan(four_cnot)
    a = run_replicated(plan, sample_normal_profiles(10, 0.1, 0.0, seed=1), [300, 300], 7, BitValue())
    b = run_replicated(plan, single_rate_ensemble(10, 0.1), [300, 300], 7, BitValue())
    assert additional_error(a, b) == 0.0
