import numpy as np
import pytest

from linattack import bench, onepoint
from linattack.bench import ExperimentSpec
from linattack.errors import UnboundedAttackError


def test_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec(attack="nope")
    with pytest.raises(ValueError):
        ExperimentSpec(trials=0)
    with pytest.raises(ValueError):
        ExperimentSpec(attack="rankone", etas=[1.01], eta_as_fraction=True)
    ExperimentSpec(attack="rankone", etas=[1.01], eta_as_fraction=True, allow_unbounded=True)


def test_workers_from_env(monkeypatch):
    monkeypatch.setenv(bench.THREADS_ENV, "3")
    assert bench.default_workers() == 3
    monkeypatch.setenv(bench.THREADS_ENV, "zero")
    assert bench.default_workers() == 1


def test_random_baseline_reproducible(istanbul, istanbul_fit):
    obj = bench.coefficient_objective(istanbul_fit, 3)
    a = bench.random_baseline(istanbul, obj, 0.2, 1, seed=9, fit=istanbul_fit)
    b = bench.random_baseline(istanbul, obj, 0.2, 1, seed=9, fit=istanbul_fit)
    assert a.objective == b.objective
    z = np.concatenate([a.artifact["x0"], [a.artifact["y0"]]])
    assert np.linalg.norm(z) == pytest.approx(0.2, rel=1e-12)


def test_random_baseline_dominated_and_monotone(istanbul, istanbul_fit):
    for i in (0, 3, 6):
        obj = bench.coefficient_objective(istanbul_fit, i)
        exact = onepoint.closed_form_value(istanbul_fit, i, 0.2, "minimize")
        prev = np.inf
        for trials in (2500, 5000, 10_000):
            row = bench.random_baseline(istanbul, obj, 0.2, trials, seed=1, fit=istanbul_fit)
            assert row.objective >= exact - 1e-12
            assert row.objective <= prev
            prev = row.objective


def test_one_point_row_targets_coordinate(istanbul):
    rows, _ = bench.run(ExperimentSpec(attack="one", index=3, etas=[0.2], sense="shrink"))
    delta = np.abs(rows[0].beta_after - rows[0].beta_before)
    assert int(np.argmax(delta)) == 3
    assert np.allclose(bench.replay_beta(istanbul, rows[0]), rows[0].beta_after, atol=1e-6)


def test_multi_row_zeroes_sixth(istanbul):
    rows, _ = bench.run(ExperimentSpec(attack="multi", index=5, etas=[1.0], lam=1.0))
    r = rows[0]
    assert r.flags["certified"]
    assert abs(r.beta_after[5]) <= 1e-3
    others = np.delete(r.beta_after - r.beta_before, 5)
    assert np.max(np.abs(others)) <= 1e-2
    assert np.allclose(bench.replay_beta(istanbul, r), r.beta_after, atol=1e-6)


@pytest.mark.slow
def test_rankone_sweep_monotone_in_eta(istanbul):
    fr = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95]
    rows, _ = bench.run(ExperimentSpec(attack="rankone", index=3, etas=fr, eta_as_fraction=True, seeds=[0, 1]))
    rows.sort(key=lambda r: r.eta)
    vals = [r.objective for r in rows]
    assert all(b <= a + 1e-9 for a, b in zip(vals, vals[1:]))
    for r in rows:
        assert np.allclose(bench.replay_beta(istanbul, r), r.beta_after, atol=1e-6)


def test_outputs_and_replay(tmp_path, istanbul):
    spec = ExperimentSpec(attack="rankone", index=3, etas=[0.5, 0.9], eta_as_fraction=True, seeds=[4])
    rows, paths = bench.run(spec, out_dir=tmp_path)
    again, _ = bench.run(spec)
    assert [r.objective for r in rows] == [r.objective for r in again]
    for key in ("csv", "npz"):
        assert (tmp_path / paths[key].split("/")[-1]).exists()
    svgs = [p for p in paths.values() if str(p).endswith(".svg")]
    assert svgs and all(open(p).read().lstrip().startswith(("<?xml", "<svg")) for p in svgs)
    back = bench.read_results_csv(paths["csv"])
    assert [int(r["index"]) for r in back] == [4, 4]
    for rec, row in zip(back, rows):
        assert rec["objective"] == row.objective
        assert np.array_equal(rec["beta_after"], row.beta_after)
    art = np.load(paths["npz"])
    replayed = bench.replay_beta(istanbul, {"c": art["row0_c"], "d": art["row0_d"]})
    assert np.allclose(replayed, rows[0].beta_after, atol=1e-6)
    assert np.all(np.diff(art["row0_trace"]) <= 1e-10)


def test_pgd_rows_and_mean_reduction(istanbul):
    spec = ExperimentSpec(attack="pgd", index=3, etas=[0.5], eta_as_fraction=True, seeds=[0, 1],
                          reduction="mean")
    rows, _ = bench.run(spec)
    assert len(rows) == 1 and rows[0].flags["reduction"] == "mean"
    raw, _ = bench.run(spec, reduce=False)
    assert rows[0].objective == pytest.approx(np.mean([r.objective for r in raw]))
    for r in raw:
        assert np.allclose(bench.replay_beta(istanbul, r), r.beta_after, atol=1e-6)


def test_unbounded_budget_refused():
    spec = ExperimentSpec(attack="rankone", index=0, etas=[1.01], eta_as_fraction=True, allow_unbounded=True)
    with pytest.raises(UnboundedAttackError):
        bench.run(spec)


def test_process_pool_matches_serial():
    spec = ExperimentSpec(attack="rankone", index=2, etas=[0.6], eta_as_fraction=True, seeds=[0, 1])
    a, _ = bench.run(spec, workers=1, reduce=False)
    b, _ = bench.run(spec, workers=2, reduce=False)
    assert [r.objective for r in a] == [r.objective for r in b]
