import numpy as np
import pytest

from infoextract import (InvalidInput, JointDensityModel, SampleTable, Unsupported,
                         conditional_mi_reference, direct_mutual_information,
                         mutual_information_binned, mutual_information_hcr, synth)
from infoextract.infoflow import NATS_PER_BIT, hcr_mi_from_model, ks_uniform, spearman


def gaussian_mi(rho):
    return -0.5 * np.log(1 - rho ** 2)


def test_identical_columns(rng):
    u = rng.random(10000)
    assert mutual_information_binned(u, u, 16).value == pytest.approx(np.log(16), abs=0.1)


def test_independent_columns(rng):
    assert mutual_information_binned(rng.random(10000), rng.random(10000), 16).value <= 0.02


@pytest.mark.parametrize("rho", [0.5, 0.7])
def test_copula_matches_analytic(rho):
    t = synth("gaussian-copula", seed=31, normalized=True, rho=rho)
    est = mutual_information_binned(t.column("x"), t.column("y"), 16)
    assert abs(est.value - gaussian_mi(rho)) <= 0.08


def test_binned_is_symmetric_and_clamped(rng):
    u, v = rng.random(500), rng.random(500)
    a = mutual_information_binned(u, v)
    b = mutual_information_binned(v, u)
    assert a.value == b.value
    assert a.value >= 0
    assert a.details["unclamped"] <= 0 or a.value == a.details["unclamped"]


def test_binned_input_validation(rng):
    with pytest.raises(InvalidInput):
        mutual_information_binned(rng.random(5), rng.random(6))
    with pytest.raises(InvalidInput):
        mutual_information_binned([1.5], [0.5])


def test_units():
    est = mutual_information_binned(np.linspace(0, 1, 100), np.linspace(0, 1, 100), 4)
    assert est.bits() == pytest.approx(est.value / NATS_PER_BIT)
    assert est.to_dict("bits")["value"] == pytest.approx(est.bits())


def test_hcr_uniform_model_is_zero():
    model = JointDensityModel(np.pad([[1.0]], ((0, 3), (0, 3))))
    assert hcr_mi_from_model(model) == (0.0, 0.0)


def test_hcr_quadratic_single_coefficient():
    c = np.zeros((3, 3))
    c[0, 0], c[1, 1] = 1.0, 0.2
    quad, _ = hcr_mi_from_model(JointDensityModel(c))
    assert quad == pytest.approx(0.02, abs=1e-15)


def test_hcr_plugin_matches_analytic():
    t = synth("gaussian-copula", seed=32, normalized=True, rho=0.5, n=100000)
    est = mutual_information_hcr(t.column("x"), t.column("y"), 4)
    assert abs(est.value - gaussian_mi(0.5)) <= 0.05


def test_direct_mi_without_z_equals_binned(copula07):
    d = direct_mutual_information(copula07, "x", "y")
    plain = mutual_information_binned(copula07.column("x"), copula07.column("y")).value
    assert abs(d.value - plain) <= 0.02


def test_direct_mi_on_markov_chain(chain):
    d = direct_mutual_information(chain, "x", "y", ["z"])
    assert d.details["raw"] >= 0.1
    assert d.value <= 0.02
    ref = conditional_mi_reference(chain, "x", "y", ["z"])
    assert ref.value <= 0.05


def test_direct_mi_on_collider(rng):
    x, y = rng.standard_normal(10000), rng.standard_normal(10000)
    z = x + y + 0.3 * rng.standard_normal(10000)
    from infoextract import normalize_table
    t, _ = normalize_table(SampleTable(["x", "y", "z"], np.column_stack([x, y, z])))
    assert direct_mutual_information(t, "x", "y", ["z"]).value > 0.05


def test_reference_without_z_is_plain_mi(copula07):
    ref = conditional_mi_reference(copula07, "x", "y", (), bins=8)
    plain = mutual_information_binned(copula07.column("x"), copula07.column("y"), 8).value
    assert ref.value == pytest.approx(plain)


def test_independent_triple(independent3):
    d = direct_mutual_information(independent3, "x1", "x2", ["x3"])
    ref = conditional_mi_reference(independent3, "x1", "x2", ["x3"])
    assert d.value <= 0.03 and ref.value <= 0.03


def test_reference_rejects_three_z(rng):
    t = SampleTable(list("abcde"), rng.random((100, 5)))
    with pytest.raises(Unsupported):
        conditional_mi_reference(t, "a", "b", ["c", "d", "e"])


def test_direct_mi_argument_checks(chain):
    with pytest.raises(InvalidInput):
        direct_mutual_information(chain, "x", "x")
    with pytest.raises(InvalidInput):
        direct_mutual_information(chain, "x", "y", ["x"])


def test_spearman_and_ks(rng):
    u = rng.random(2000)
    assert spearman(u, u) == pytest.approx(1.0)
    assert spearman(u, np.full(2000, 0.5)) == 0.0
    assert ks_uniform(u) <= 0.05
