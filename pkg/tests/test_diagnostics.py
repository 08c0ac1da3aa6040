import numpy as np
import pytest

from attnlab.attention import dnas_weights, unas_weights
from attnlab.diagnostics import analyze, log_mass_histogram, theorem1_bound


def test_uniform_matrix():
    rep = analyze(np.full((4, 4), 0.25))
    np.testing.assert_allclose(rep.column_mass, 1.0, atol=1e-15)
    assert not rep.explained_away.any()
    assert rep.theorem_bound_ok


def test_unas_explains_away_dnas_does_not():
    z = np.array([[25.0, 0.0], [25.0, 0.0]])
    rep = analyze(unas_weights(z))
    assert rep.column_mass[1] == pytest.approx(2 * np.exp(-25), rel=1e-9)
    assert rep.column_mass[1] == pytest.approx(2.8e-11, rel=0.03)
    assert rep.explained_away.tolist() == [False, True]
    assert not rep.theorem_bound_ok
    rep_d = analyze(dnas_weights(z))
    assert rep_d.column_mass.min() >= 0.5 and rep_d.theorem_bound_ok


def test_dnas_two_positions_bound():
    rng = np.random.default_rng(0)
    for _ in range(50):
        rep = analyze(dnas_weights(rng.normal(scale=20, size=(2, 2))))
        assert rep.column_mass.min() >= 0.5 - 1e-12 and rep.theorem_bound_ok


def test_theorem1_bound():
    assert theorem1_bound(1) == 1.0
    assert theorem1_bound(2) == 0.5
    assert theorem1_bound(100) == 0.01
    assert np.log(theorem1_bound(100)) == pytest.approx(-4.605, abs=1e-3)
    with pytest.raises(ValueError):
        theorem1_bound(0)


def test_mass_sums_to_rows():
    rng = np.random.default_rng(1)
    for S in (2, 7, 30):
        rep = analyze(unas_weights(rng.normal(scale=5, size=(S, S))))
        assert rep.column_mass.sum() == pytest.approx(S, abs=1e-8)
        assert np.all(rep.column_mass >= 0)


def test_non_stochastic_rejected():
    with pytest.raises(ValueError, match="row 1"):
        analyze([[0.5, 0.5], [0.5, 0.6]])


def test_histogram_bins_and_sentinel():
    edges, counts = log_mass_histogram([1.0, 0.5, 0.0, 1.5], bins=4)
    assert len(edges) == 5 and counts.sum() == 4
    assert edges[0] == pytest.approx(np.log(0.5) - 1.0)
    assert edges[-1] == pytest.approx(np.log(1.5))
    assert counts[0] >= 1
    edges, counts = log_mass_histogram(np.ones(3), bins=10)
    assert counts.sum() == 3 and edges[-1] == 0.0


def test_report_json_mirrors_fields():
    rep = analyze(np.full((3, 3), 1 / 3), bins=5)
    obj = rep.to_json()
    assert set(obj) == {"column_mass", "explained_away", "epsilon", "theorem_bound_ok", "log_mass_histogram"}
    assert obj["epsilon"] == 1e-8
    assert len(obj["log_mass_histogram"]["bin_edges"]) == 6
