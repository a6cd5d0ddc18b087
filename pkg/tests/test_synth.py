from types import SimpleNamespace

import numpy as np
import pytest

from treeslic.errors import ConfigError, DataError, SingularLineError
from treeslic.grid import LineParams, it_class
from treeslic.synth import (SLOTS, BranchMeasurements, NoiseConfig, SynthConfig, TrajectoryProfile, corrupt,
                            generate_trajectories, slot_for, synthesize_campaign, synthesize_field_dataset,
                            true_branch_currents)

from conftest import AB_LINE


def test_single_sample_flat_profile(replica):
    prof = TrajectoryProfile(mag_jitter=0.0)
    trajs = generate_trajectories(replica, 1, prof)
    for bt in trajs:
        assert bt.samples.shape == (1,)
        assert abs(bt.samples[0]) == pytest.approx(prof.nominal, abs=1e-15)


def test_zero_samples_rejected(replica):
    with pytest.raises(ConfigError):
        generate_trajectories(replica, 0)


def test_default_profile_spans_and_bounds(replica):
    for bt in generate_trajectories(replica, 600):
        mag = np.abs(bt.samples)
        assert mag.max() - mag.min() >= 0.005
        assert mag.min() >= 0.9 and mag.max() <= 1.1


def test_trajectories_deterministic(replica):
    a = generate_trajectories(replica, 50, seed=1)
    b = generate_trajectories(replica, 50, seed=1)
    c = generate_trajectories(replica, 50, seed=2)
    assert all(np.array_equal(x.samples, y.samples) for x, y in zip(a, b))
    assert not all(np.array_equal(x.samples, y.samples) for x, y in zip(a, c))


def test_trajectories_give_time_varying_flows(replica):
    trajs = {bt.bus: bt.samples for bt in generate_trajectories(replica, 600)}
    for br in replica.branches:
        i_pq, _ = true_branch_currents(trajs[br.from_bus], trajs[br.to_bus], br.params_db)
        assert np.ptp(np.abs(i_pq)) > 0
        assert np.abs(trajs[br.from_bus] - trajs[br.to_bus]).min() > 0


def test_currents_no_drop_no_shunt():
    i_pq, i_qp = true_branch_currents(1 + 0j, 1 + 0j, LineParams(0.01, 0.1, 0.0))
    assert i_pq == 0 and i_qp == 0


def test_currents_pure_charging():
    i_pq, i_qp = true_branch_currents(1 + 0j, 1 + 0j, LineParams(0.01, 0.1, 0.1))
    assert i_pq == pytest.approx(0.1j) and i_qp == pytest.approx(0.1j)


def test_currents_match_nodal_admittance_oracle():
    v_p = 1.02 * np.exp(1j * 0.0)
    v_q = 1.00 * np.exp(1j * np.deg2rad(-2.0))
    p = AB_LINE
    y = 1 / complex(p.r, p.x)
    ybus = np.array([[y + 1j * p.b, -y], [-y, y + 1j * p.b]])
    expected = ybus @ np.array([v_p, v_q])
    got = true_branch_currents(v_p, v_q, p)
    assert np.allclose(got, expected, rtol=1e-13, atol=0)


def test_currents_singular_line():
    with pytest.raises(SingularLineError):
        true_branch_currents(1, 1, SimpleNamespace(r=0.0, x=0.0, b=0.1))


def test_corrupt_identity_channel(rng):
    s = rng.standard_normal(20) + 1j * rng.standard_normal(20)
    out = corrupt(s, 1 + 0j, NoiseConfig(0.0))
    assert np.array_equal(out, s)


def test_corrupt_pure_multiplicative(rng):
    s = rng.standard_normal(20) + 1j * rng.standard_normal(20)
    alpha = 1.006 * np.exp(0.003j)
    assert np.array_equal(corrupt(s, alpha, NoiseConfig(0.0)), alpha * s)


def test_corrupt_noise_moments():
    out = corrupt(np.ones(100_000, dtype=complex), 1, NoiseConfig(0.0003, seed=11))
    e = out - 1
    assert abs(e.real.std() / 0.0003 - 1) < 0.05
    assert abs(e.imag.std() / 0.0003 - 1) < 0.05
    assert abs(np.corrcoef(e.real, e.imag)[0, 1]) < 0.02


def test_corrupt_distributes_over_concatenation(rng):
    a = rng.standard_normal(30) + 1j * rng.standard_normal(30)
    b = rng.standard_normal(20) + 1j * rng.standard_normal(20)
    alpha = 0.997 * np.exp(-0.002j)
    noiseless = NoiseConfig(0.0)
    assert np.array_equal(corrupt(np.concatenate([a, b]), alpha, noiseless),
                          np.concatenate([corrupt(a, alpha, noiseless), corrupt(b, alpha, noiseless)]))
    noisy = NoiseConfig(0.001, reference=1.0)
    whole = corrupt(np.concatenate([a, b]), alpha, noisy, np.random.default_rng(5))
    g = np.random.default_rng(5)
    parts = np.concatenate([corrupt(a, alpha, noisy, g), corrupt(b, alpha, noisy, g)])
    assert np.allclose(whole, parts, rtol=0, atol=1e-15)


def test_noise_config_validation():
    with pytest.raises(ConfigError):
        NoiseConfig(-0.1)


def test_measurements_length_mismatch():
    with pytest.raises(DataError):
        BranchMeasurements("x", np.ones(3), np.ones(3), np.ones(2), np.ones(3))


def test_noise_free_unity_campaign_is_clean(replica):
    camp = synthesize_campaign(replica, SynthConfig(n=40, sigma=0, it_class=0, rqm_class=0))
    for br in replica.branches:
        meas, clean = camp.runs[0][br.id], camp.clean[br.id]
        for slot in SLOTS:
            assert np.array_equal(meas.series(slot), clean.series(slot))


def test_rqm_vt_within_rqm_class(replica):
    for seed in range(20):
        camp = synthesize_campaign(replica, SynthConfig(n=10, seed=seed))
        truth = camp.truths[0]
        a = truth.ratio_errors[(replica.rqm.branch, slot_for(replica.rqm.end, "V"))]
        assert abs(abs(a) - 1) <= 0.0015 + 1e-15
        spec = it_class(0.6)
        for (bid, slot), val in truth.ratio_errors.items():
            if (bid, slot) != (replica.rqm.branch, slot_for(replica.rqm.end, "V")):
                assert abs(abs(val) - 1) <= spec.max_magnitude_error + 1e-15
                assert abs(np.angle(val)) <= spec.max_angle_error + 1e-15
        assert len(truth.ratio_errors) == 40


def test_campaign_self_consistency(replica):
    camp = synthesize_campaign(replica, SynthConfig(n=100, seed=3))
    for br in replica.branches:
        p = camp.truths[0].params[br.id]
        i_pq, i_qp = true_branch_currents(camp.trajectories[br.from_bus], camp.trajectories[br.to_bus], p)
        assert np.allclose(i_pq, camp.clean[br.id].i_pq, rtol=0, atol=1e-12)
        assert np.allclose(i_qp, camp.clean[br.id].i_qp, rtol=0, atol=1e-12)


def test_bus_voltage_shared_across_branches(replica):
    camp = synthesize_campaign(replica, SynthConfig(n=50))
    for bus in replica.bus_ids:
        series = [camp.clean[br].voltage_at(replica.branch(br).end_at(bus)) for _, br in replica.adjacency[bus]]
        for s in series[1:]:
            assert np.array_equal(s, series[0])


def test_noise_free_pipeline_satisfies_pi_model(replica):
    camp = synthesize_campaign(replica, SynthConfig(n=30, sigma=0, it_class=0, rqm_class=0))
    for br in replica.branches:
        m = camp.runs[0][br.id]
        i_pq, i_qp = true_branch_currents(m.v_pq, m.v_qp, camp.truths[0].params[br.id])
        assert np.allclose(i_pq, m.i_pq, atol=1e-12) and np.allclose(i_qp, m.i_qp, atol=1e-12)


def test_true_params_on_grid_within_envelope(replica):
    camp = synthesize_campaign(replica, SynthConfig(n=10, seed=9))
    for br in replica.branches:
        m = camp.truths[0].m_true[br.id]
        assert -30 <= m <= 30
        p = camp.truths[0].params[br.id]
        assert p.r == pytest.approx(br.params_db.r * (1 + 0.01 * m), rel=1e-15)


def test_ratio_errors_fixed_or_resampled(replica):
    fixed = synthesize_campaign(replica, SynthConfig(n=10), runs=3)
    assert fixed.truths[0].ratio_errors == fixed.truths[2].ratio_errors
    res = synthesize_campaign(replica, SynthConfig(n=10, resample_re_per_run=True), runs=3)
    assert res.truths[0].ratio_errors != res.truths[1].ratio_errors
    # Fresh noise per run either way.
    assert not np.array_equal(fixed.runs[0]["8-9"].v_pq, fixed.runs[1]["8-9"].v_pq)


def test_noise_paired_across_sigma(replica):
    a = synthesize_campaign(replica, SynthConfig(n=20, sigma=0.0001))
    b = synthesize_campaign(replica, SynthConfig(n=20, sigma=0.0003))
    for br in replica.branches:
        ea = a.runs[0][br.id].i_pq - a.clean[br.id].i_pq * a.truths[0].ratio_errors[(br.id, "i_pq")]
        eb = b.runs[0][br.id].i_pq - b.clean[br.id].i_pq * b.truths[0].ratio_errors[(br.id, "i_pq")]
        assert np.allclose(3 * ea, eb, rtol=1e-9, atol=1e-15)


def test_rqm_move_changes_only_the_anchor_slots(replica):
    a = synthesize_campaign(replica, SynthConfig(n=20))
    moved = replica.with_rqm("30-38", "from")
    b = synthesize_campaign(moved, SynthConfig(n=20))
    diff = [k for k in a.truths[0].ratio_errors if a.truths[0].ratio_errors[k] != b.truths[0].ratio_errors[k]]
    assert sorted(diff) == [("30-38", "v_pq"), ("9-10", "v_qp")]
    assert b.truths[0].ratio_errors[("30-38", "v_pq")] == a.truths[0].ratio_errors[("9-10", "v_qp")]


def test_field_dataset_timestamps(field_tree):
    camp = synthesize_field_dataset(field_tree, SynthConfig(n=100), days=5)
    t = camp.runs[0]["A-B"].t
    assert t.dtype.kind == "M" and len(t) == 100
    assert np.all(np.diff(t).astype(int) > 0)
