import math

import jsonschema
import pytest

import oracles
from bewa import sim


def test_truth_convergence_metric():
    assert sim.metric_truth_convergence([1.0, 1.0, 1.0], 1) == 0
    assert sim.metric_truth_convergence([0.5] * 7, 1) == 0.5
    assert sim.metric_truth_convergence([0.6, 0.8], 1) == pytest.approx(0.3)
    with pytest.raises(sim.EmptySeries):
        sim.metric_truth_convergence([], 1)


def test_suppression_metric():
    assert sim.metric_contradiction_suppression(0, 10) == 1
    assert sim.metric_contradiction_suppression(10, 10) == 0
    assert sim.metric_contradiction_suppression(4, 10) == pytest.approx(0.6)
    with pytest.raises(sim.NoInitialContradictions):
        sim.metric_contradiction_suppression(0, 0)


def test_replication_lift_metric():
    assert sim.metric_replication_lift([0.1, 0.2], [0.1, 0.2]) == 0
    assert sim.metric_replication_lift([0.2, 0.4], [0.1, 0.1]) == pytest.approx(0.2)
    assert sim.metric_replication_lift([0.5], [0.2]) == pytest.approx(0.3)
    with pytest.raises(sim.EmptyCohort):
        sim.metric_replication_lift([], [0.1])


def test_entropy_metric():
    assert sim.metric_graph_entropy([0.5] * 4) == 1.0
    assert sim.metric_graph_entropy([0.0, 1.0, 1.0]) == 0.0
    assert sim.metric_graph_entropy([0.25] * 3) == pytest.approx(0.8113, abs=1e-4)
    assert sim.metric_graph_entropy([0.25]) == pytest.approx(oracles.binary_entropy(0.25), abs=1e-15)


def test_network_is_deterministic():
    cfg = sim.SimConfig(n_nodes=100, edge_density=0.02, seed=42)
    assert sim.generate_network(cfg).to_json() == sim.generate_network(cfg).to_json()
    assert sim.generate_network(cfg).to_json() != sim.generate_network(sim.SimConfig(seed=43)).to_json()


def test_no_contradiction_ratio_no_conflicts():
    assert sim.generate_network(sim.SimConfig(contradiction_ratio=0.0, seed=1)).conflicts == []


@pytest.mark.parametrize("seed", range(10))
def test_edge_count_near_binomial_mean(seed):
    n, rho = 100, 0.02
    pairs = n * (n - 1) // 2
    mean, sd = pairs * rho, math.sqrt(pairs * rho * (1 - rho))
    assert mean == pytest.approx(99)
    edges = len(sim.generate_network(sim.SimConfig(n_nodes=n, edge_density=rho, seed=seed)).edges)
    assert abs(edges - mean) <= 3 * sd


def test_network_is_acyclic():
    import networkx as nx

    net = sim.generate_network(sim.SimConfig(n_nodes=80, edge_density=0.1, seed=3))
    assert nx.is_directed_acyclic_graph(nx.DiGraph([(a, b) for a, b, _ in net.edges]))


def test_bad_config():
    with pytest.raises(sim.BadConfig):
        sim.generate_network(sim.SimConfig(edge_density=0.5))
    with pytest.raises(sim.BadConfig):
        sim.sim_config_from_mapping({"n_nodes": 10, "colour": "red"})
    with pytest.raises(sim.BadConfig):
        sim.SimConfig(regime="sometimes").validate()
    sim.SimConfig(edge_density=0.5, strict=False).validate()


def test_zero_epochs_keeps_initial_beliefs():
    cfg = sim.SimConfig(n_nodes=20, epochs=0, seed=2)
    res = sim.run(cfg)
    assert len(res.matrix) == 1
    assert res.matrix[0] == [res.network.initial[c] for c in res.network.labels]


SMALL = dict(n_nodes=30, epochs=20, seed=5, replication_start=10)


def test_identical_seed_identical_report_bytes():
    a = sim.report_bytes(sim.simulate(sim.SimConfig(**SMALL)))
    b = sim.report_bytes(sim.simulate(sim.SimConfig(**SMALL)))
    assert a == b
    assert a != sim.report_bytes(sim.simulate(sim.SimConfig(**{**SMALL, "seed": 6})))


def test_report_validates_against_schema():
    rep = sim.simulate(sim.SimConfig(**SMALL))
    jsonschema.validate(rep, sim.report_schema())
    assert len(rep["entropy_bits"]) == SMALL["epochs"] + 1


def test_csv_export_shape():
    res = sim.run(sim.SimConfig(n_nodes=10, epochs=3, seed=1, strict=False, edge_density=0.2))
    lines = sim.matrix_csv(res).splitlines()
    assert len(lines) == 5
    assert lines[0].split(",")[0] == "epoch" and len(lines[1].split(",")) == 11


def test_batch_and_incremental_regimes_agree():
    common = dict(n_nodes=20, epochs=30, seed=9, contradiction_ratio=0.0, treated_fraction=0.0, reassess_interval=5)
    inc = sim.run(sim.SimConfig(regime="incremental", **common))
    bat = sim.run(sim.SimConfig(regime="batch", **common))
    assert inc.matrix[-1] == bat.matrix[-1]


def test_entropy_non_decreasing_without_evidence_under_neutral_decay():
    cfg = sim.SimConfig(n_nodes=40, epochs=30, seed=4, evidence=False, contradiction_ratio=0.0,
                        treated_fraction=0.0, decay_mode="to_neutral", init_low=0.05, init_high=0.95)
    rep = sim.simulate(cfg)
    h = rep["entropy_bits"]
    assert all(b >= a - 1e-12 for a, b in zip(h, h[1:]))
    assert h[-1] > h[0]


def test_steady_support_converges():
    cfg = sim.SimConfig(n_nodes=100, epochs=100, seed=11, contradiction_ratio=0.0, treated_fraction=0.0,
                        p_true=1.0, p_false=0.0, w_neutral=0.6999, w_max=0.7)
    rep = sim.simulate(cfg)
    curve = rep["mean_tau_true_curve"]
    assert all(b <= a for a, b in zip(curve[9:], curve[10:]))
    assert rep["final_mean_abs_dev_true"] < 0.05
