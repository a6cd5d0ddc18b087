import random

import numpy as np
import pytest

from treeslic.errors import DataError, MissingFactorError
from treeslic.grid import ConnectedTree
from treeslic.ibslic import CfrEstimate, average_rqm_branch_factors, ib_slic
from treeslic.networks import chain
from treeslic.swslic import (RhoLink, VtLink, branch_correction_factors, compute_lambda, estimate_rho,
                             lambda_chain, sw_slic)
from treeslic.synth import SLOTS, BranchMeasurements, SynthConfig, synthesize_campaign

from conftest import two_bus

NOISE_FREE = SynthConfig(n=300, sigma=0, seed=8)


def test_rho_identical_series(rng):
    v = rng.standard_normal(50) + 1j * rng.standard_normal(50)
    assert estimate_rho(v, v).value == pytest.approx(1)


def test_rho_ratio_of_factors(rng):
    v = 1 + 0.01 * rng.standard_normal(50) + 0.01j * rng.standard_normal(50)
    k = 1.005 * np.exp(0.001j)
    est = estimate_rho(v, v / k)
    assert abs(est.value - k) < 1e-14 and est.n_used == 50


def test_rho_noise_bound(rng):
    v = np.exp(1j * rng.uniform(-0.1, 0.1, 600))
    true = 0.998 * np.exp(-0.004j)
    noise = 0.0003 * (rng.standard_normal((2, 600)) + 1j * rng.standard_normal((2, 600)))
    est = estimate_rho(v + noise[0], v / true + noise[1])
    assert abs(est.value - true) < 5e-4


def test_rho_skips_vanishing_samples():
    est = estimate_rho([1, 2, 3], [1, 0, 3])
    assert est.value == 1 and est.n_skipped == 1
    with pytest.raises(DataError):
        estimate_rho([1, 2], [0, 0])
    assert estimate_rho([1, 5], [1, 1], n=1).value == 1


def test_lambda_chain_shapes(replica):
    assert lambda_chain(replica, "9-10") == []
    assert lambda_chain(replica, "8-9") == [VtLink("9-10"), RhoLink(9, "9-10", "8-9")]
    links = lambda_chain(replica, "64-63")
    assert [l.branch for l in links if isinstance(l, VtLink)] == ["9-10", "8-9", "8-30", "30-38", "38-65", "65-64"]
    assert sum(isinstance(l, RhoLink) for l in links) == 6


def test_lambda_for_rqm_branch_is_one():
    assert np.array_equal(compute_lambda([], [{}, {}], [{}, {}]), [1, 1])


def test_lambda_one_hop_product():
    links = [VtLink("9-10"), RhoLink(9, "9-10", "8-9")]
    g = CfrEstimate((1.002 + 0.001j, 1, 1))
    rho = 0.997 - 0.002j
    lam = compute_lambda(links, [{links[1]: rho}], [{"9-10": g}])
    assert lam[0] == rho * g.v


def test_lambda_names_missing_link():
    links = [VtLink("9-10"), RhoLink(9, "9-10", "8-9")]
    with pytest.raises(MissingFactorError, match="bus 9"):
        compute_lambda(links, [{}], [{"9-10": CfrEstimate((1, 1, 1))}])
    with pytest.raises(MissingFactorError, match="9-10"):
        compute_lambda(links, [{links[1]: 1}], [{}])


def test_trivial_factors():
    cf = branch_correction_factors(1, CfrEstimate((1, 1, 1)), "from")
    assert set(cf.as_dict().values()) == {1}


def test_three_branch_chain_telescopes():
    tree = chain(4)
    camp = synthesize_campaign(tree, NOISE_FREE.with_(rqm_class=0))
    est = sw_slic(tree, camp.runs)
    truth = camp.truths[0]
    assert abs(est.branches["3-4"].lam[0] - truth.tau("3-4", "v_pq")) < 1e-8


def test_noise_free_factors_match_truth_up_to_rqm_bias(replica):
    camp = synthesize_campaign(replica, NOISE_FREE.with_(it_class=1.2))
    est = sw_slic(replica, camp.runs)
    truth = camp.truths[0]
    ref = truth.tau(replica.rqm.branch, "v_qp")
    for bid, be in est.branches.items():
        assert be.m_star == truth.m_true[bid]
        for slot, val in be.factors.as_dict().items():
            assert abs(val - truth.tau(bid, slot) / ref) < 1e-7, (bid, slot)


def test_single_branch_tree_equals_ib_slic():
    tree = two_bus()
    camp = synthesize_campaign(tree, SynthConfig(n=200, seed=1), runs=5)
    est = sw_slic(tree, camp.runs)
    direct = [ib_slic(r["1-2"], tree.branch("1-2").params_db) for r in camp.runs]
    avg = average_rqm_branch_factors([d.gamma for d in direct])
    be = est.branches["1-2"]
    assert [r.m_star for r in be.runs] == [d.m_star for d in direct]
    assert np.allclose(list(be.factors.as_dict().values()), list(avg.as_dict().values()), atol=1e-14)


def test_branch_order_does_not_matter(replica):
    camp = synthesize_campaign(replica, SynthConfig(n=200, seed=5), runs=2)
    shuffled = list(replica.branches)
    random.Random(1).shuffle(shuffled)
    other = ConnectedTree(replica.buses, shuffled, replica.rqm, replica.name)
    a, b = sw_slic(replica, camp.runs), sw_slic(other, camp.runs)
    for bid in a.branches:
        assert a.branches[bid].m_star == b.branches[bid].m_star
        assert np.array_equal(a.branches[bid].tau_runs, b.branches[bid].tau_runs)


def test_chain_leaving_rqm_bus_through_another_branch():
    tree = chain(3).with_rqm("2-3", "from")
    assert lambda_chain(tree, "1-2") == [RhoLink(2, "2-3", "1-2")]
    camp = synthesize_campaign(tree, NOISE_FREE.with_(rqm_class=0))
    est = sw_slic(tree, camp.runs)
    truth = camp.truths[0]
    assert est.branches["1-2"].orientation == "to"
    for slot, val in est.branches["1-2"].factors.as_dict().items():
        assert abs(val - truth.tau("1-2", slot)) < 1e-8


def test_error_grows_with_hops():
    tree = chain(6)
    camp = synthesize_campaign(tree, SynthConfig(n=300, rqm_class=0, resample_re_per_run=True, seed=3), runs=150)
    est = sw_slic(tree, camp.runs)
    errs = []
    for k in range(1, 6):
        bid = f"{k}-{k + 1}"
        lam = est.branches[bid].lam
        errs.append(np.mean([abs(lam[j] - t.tau(bid, "v_pq")) for j, t in enumerate(camp.truths)]))
    assert errs[0] == pytest.approx(0, abs=1e-15)
    assert all(a <= b for a, b in zip(errs, errs[1:]))


def _constant(meas: BranchMeasurements) -> BranchMeasurements:
    return BranchMeasurements(meas.branch, *(np.full(meas.n, s[0]) for s in
                                             (meas.v_pq, meas.v_qp, meas.i_pq, meas.i_qp)))


def test_failure_is_isolated(replica):
    camp = synthesize_campaign(replica, SynthConfig(n=200, seed=2), runs=2)
    runs = [dict(r) for r in camp.runs]
    runs[1]["65-64"] = _constant(runs[1]["65-64"])
    est = sw_slic(replica, runs)
    assert est.branches["65-64"].runs[1] is None and est.branches["65-64"].errors
    downstream = est.branches["64-63"]
    assert downstream.runs[1] is not None
    assert np.isnan(downstream.tau_runs[1]).all() and "65-64" in downstream.errors[0]
    assert not np.isnan(downstream.tau_runs[0]).any()
    for bid in ("9-10", "8-30", "65-68", "68-81"):
        assert not est.branches[bid].errors
        assert not np.isnan(est.branches[bid].tau_runs).any()
    assert set(est.errors) == {"65-64", "64-63"}


def test_missing_branch_rejected(replica):
    camp = synthesize_campaign(replica, SynthConfig(n=20))
    run = dict(camp.runs[0])
    del run["8-30"]
    with pytest.raises(DataError, match="8-30"):
        sw_slic(replica, [run])


def test_every_branch_present(replica):
    camp = synthesize_campaign(replica, SynthConfig(n=100))
    est = sw_slic(replica, camp.runs)
    assert sorted(est.branches) == sorted(b.id for b in replica.branches)
    for be in est.branches.values():
        assert be.tau_runs.shape == (1, len(SLOTS))
