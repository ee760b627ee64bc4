import itertools
import json

import numpy as np
import pytest

from randmargins.errors import InvalidParams
from randmargins.experiments import (ExperimentConfig,
                                     config_hash, derive_trial_seed,
                                     emit_report, exact_generalization_error,
                                     generate_synthetic,
                                     run_learning_benchmark, splitmix64,
                                     sweep_dimensions, sweep_sample_sizes)
from randmargins.learner import EmptyRectangle
from randmargins.model import (GridDomain, LabeledExample, OriginRectangle,
                               ExplicitDistribution, generalization_error,
                               predict, save_distribution_csv)


def make_config(**kw):
    base = dict(x_max=50, d=2, target=(30, 40), dist="product_uniform",
                learner="rand_margins", epsilon=1.0, delta=1e-6, alpha=0.1,
                beta=0.1, solver="oracle", trials=3, sample_size=2000,
                master_seed=7)
    base.update(kw)
    return ExperimentConfig(**base)


# --- seed derivation ------------------------------------------------------------

def test_splitmix64_known_vector():
    # first output of the reference splitmix64 stream seeded with 0
    assert splitmix64(0) == 0xE220A8397B1DCDAF


def test_splitmix64_stays_in_64_bits():
    for x in (0, 1, 2 ** 63, 2 ** 64 - 1, 12345678901234567890):
        assert 0 <= splitmix64(x) < 2 ** 64


def test_derive_trial_seed_is_xor_then_mix():
    assert derive_trial_seed(10, 3) == splitmix64(10 ^ 3)
    seeds = {derive_trial_seed(10, t) for t in range(100)}
    assert len(seeds) == 100


# --- config ---------------------------------------------------------------------

def test_config_rejects_bad_values():
    with pytest.raises(InvalidParams):
        make_config(target=(99, 99))  # outside domain
    with pytest.raises(InvalidParams):
        make_config(dist="gaussian")
    with pytest.raises(InvalidParams):
        make_config(learner="svm")
    with pytest.raises(InvalidParams):
        make_config(dist="file")  # needs dist_path


def test_config_file_roundtrip_and_overrides(tmp_path):
    config = make_config()
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config.to_json_dict()))
    loaded = ExperimentConfig.from_file(path)
    assert loaded == config
    assert config_hash(loaded) == config_hash(config)
    bumped = ExperimentConfig.from_file(path, overrides={"trials": 9})
    assert bumped.trials == 9
    assert config_hash(bumped) != config_hash(config)


def test_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"x_max": 5, "d": 1, "target": [3],
                                "bogus": 1}))
    with pytest.raises(InvalidParams):
        ExperimentConfig.from_file(path)


# --- synthetic data --------------------------------------------------------------

def test_corner_mass_pins_every_point():
    config = make_config(dist="corner_mass")
    ds = generate_synthetic(config, 50, np.random.default_rng(0))
    assert np.all(ds.coords == np.array(config.target))
    assert np.all(ds.labels == 1)


def test_product_uniform_is_realizable():
    config = make_config()
    ds = generate_synthetic(config, 500, np.random.default_rng(1))
    target = OriginRectangle(config.target)
    assert np.all(ds.labels == 1)
    assert target.contains_batch(ds.coords).all()


def test_labels_are_reproduced_by_the_target():
    config = make_config()
    ds = generate_synthetic(config, 200, np.random.default_rng(2))
    target = OriginRectangle(config.target)
    relabeled = [predict(target, ex.coords) for ex in ds]
    assert relabeled == [int(v) for v in ds.labels]


def test_generation_is_seed_deterministic():
    config = make_config()
    a = generate_synthetic(config, 100, np.random.default_rng(9))
    b = generate_synthetic(config, 100, np.random.default_rng(9))
    assert a == b


# --- exact generalization error ----------------------------------------------------

def brute_force_error(corner, target):
    """Enumerate the product-uniform support and sum misclassified mass."""
    total = 0
    wrong = 0
    h = OriginRectangle(corner)
    for pt in itertools.product(*(range(t + 1) for t in target)):
        total += 1
        if predict(h, pt) != 1:
            wrong += 1
    return wrong / total


def test_exact_error_matches_enumeration():
    config = make_config(x_max=10, d=2, target=(4, 6))
    for corner in [(4, 6), (2, 3), (0, 0), (10, 1), (4, 5)]:
        got = exact_generalization_error(OriginRectangle(corner), config)
        assert got == pytest.approx(brute_force_error(corner, (4, 6)),
                                    abs=1e-12)


def test_exact_error_empty_hypothesis():
    config = make_config()
    assert exact_generalization_error(EmptyRectangle(), config) == 1.0


def test_exact_error_corner_mass():
    config = make_config(dist="corner_mass", target=(30, 40))
    assert exact_generalization_error(OriginRectangle((30, 40)), config) == 0.0
    assert exact_generalization_error(OriginRectangle((29, 40)), config) == 1.0


# --- benchmark runs -------------------------------------------------------------

def test_alpha_one_never_fails():
    config = make_config(alpha=0.999999, trials=4, sample_size=800)
    records, summary = run_learning_benchmark(config)
    assert summary["failure_count"] == 0


def test_benchmark_records_are_reproducible():
    config = make_config()
    records1, summary1 = run_learning_benchmark(config)
    records2, summary2 = run_learning_benchmark(config)
    for r1, r2 in zip(records1, records2):
        assert r1.csv_row() == r2.csv_row()
    assert summary1["failure_frequency"] == summary2["failure_frequency"]


def test_benchmark_aggregate_equals_mean_of_indicators():
    config = make_config(trials=6, sample_size=900)
    records, summary = run_learning_benchmark(config)
    indicators = [r.generalization_error > config.alpha for r in records]
    assert summary["failure_frequency"] == pytest.approx(
        np.mean(indicators))


def test_benchmark_with_baseline_learner():
    config = make_config(learner="baseline", sample_size=4000, trials=2)
    records, summary = run_learning_benchmark(config)
    assert all(not r.fallback for r in records)
    assert summary["error_trials"] == 0


# --- reports ----------------------------------------------------------------------

def test_emit_report_header_only_for_empty_records(tmp_path):
    csv_path = tmp_path / "out.csv"
    emit_report([], csv_path)
    lines = csv_path.read_text().splitlines()
    assert len(lines) == 1
    assert lines[0].startswith("config_hash,trial,seed,")


def test_emit_report_is_byte_identical_across_runs(tmp_path):
    config = make_config()
    records, summary = run_learning_benchmark(config)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    s1 = emit_report(records, p1, tmp_path / "a.json", summary)
    records2, summary2 = run_learning_benchmark(config)
    s2 = emit_report(records2, p2, tmp_path / "b.json", summary2)
    assert p1.read_bytes() == p2.read_bytes()
    assert s1["csv_sha256"] == s2["csv_sha256"]
    report = json.loads((tmp_path / "a.json").read_text())
    assert report["csv_sha256"] == s1["csv_sha256"]


def test_file_distribution_generation_and_exact_error(tmp_path):
    domain = GridDomain(50, 2)
    pts = [((5, 5), 1, 0.5), ((20, 30), 1, 0.25), ((30, 20), 1, 0.25)]
    dist = ExplicitDistribution.from_pairs(
        [(LabeledExample(c, y), p) for c, y, p in pts], domain)
    path = tmp_path / "dist.csv"
    save_distribution_csv(dist, path)
    config = make_config(dist="file", dist_path=str(path))
    ds = generate_synthetic(config, 400, np.random.default_rng(0))
    support = {tuple(c) for c, _, _ in pts}
    assert {tuple(r) for r in ds.coords} <= support
    h = OriginRectangle((25, 25))
    got = exact_generalization_error(h, config)
    assert got == pytest.approx(generalization_error(h, dist))
    # relabeling through the target keeps realizability for file support too
    target = OriginRectangle(config.target)
    assert all(predict(target, ex.coords) == ex.label for ex in ds)


def test_sweep_requires_explicit_sample_size():
    with pytest.raises(InvalidParams):
        sweep_dimensions(make_config(sample_size=None), [1, 2])


def test_sample_size_sweep_flags_but_never_fails():
    config = make_config(trials=4, solver="oracle", x_max=30,
                         target=(25, 25))
    rows = sweep_sample_sizes(config, [400, 900, 1800])
    assert [r["n"] for r in rows] == [400, 900, 1800]
    assert rows[0]["monotone_flag"] is False  # first row has no predecessor
    # more data never statistically increases the error on this family
    assert not any(r["monotone_flag"] for r in rows[1:])
    assert rows[0]["mean_error"] >= rows[-1]["mean_error"]


def test_sweep_shapes():
    config = make_config(x_max=30, target=(25, 25), trials=2,
                         sample_size=1500)
    rows = sweep_dimensions(config, [1, 2], learners=("rand_margins",))
    assert [r["d"] for r in rows] == [1, 2]
    assert all(r["trials"] == 2 for r in rows)
