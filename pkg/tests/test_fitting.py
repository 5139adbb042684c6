import math
import warnings

import numpy as np
import pytest

from nvpol.errors import FlatDirection, InvalidParameter, MaxIterations, SingularJacobian
from nvpol.fitting import (Dataset, buildup, exponential, fit_buildup, fit_depth_profile,
                           fit_exponential, fit_field_dependence, fit_least_squares,
                           fit_lorentzian, lorentzian, propagate_uncertainty, read_csv)
from nvpol.signal import eq7_contrast
from nvpol.spinham import labeled_levels

F = np.linspace(790, 840, 51)
TAU = np.linspace(0, 40, 21)
DEPTHS = np.array([12.0, 23.0, 49.0])
FIELDS = np.linspace(465, 560, 12)


def field_data(theta=8.0, phi=20.0, D=-776.55, E=-669.75, sigma=None, seed=None):
    lv, _ = labeled_levels(FIELDS, theta, phi, D, E, 2.80)
    y = np.r_[np.abs(lv[:, 0] - lv[:, 1]), np.abs(lv[:, 1] - lv[:, 2])]
    if seed is not None:
        y = y + np.random.default_rng(seed).normal(0, sigma, y.shape)
    s = None if sigma is None else np.full(y.shape, sigma)
    return Dataset(np.r_[FIELDS, FIELDS], y, s, ["plus"] * 12 + ["minus"] * 12)


# the four fit models with their truth, generator and parameter of interest
MODELS = {
    "lorentzian": (lambda d: fit_lorentzian(d), F,
                   lambda x: lorentzian(x, 815.36, 8.0, 0.035, 0.0), "center", 815.36, 2e-3),
    "exponential": (lambda d: fit_exponential(d), TAU,
                    lambda x: exponential(x, -0.028, 7.0, 0.0), "decay_time", 7.0, 1e-3),
    "depth": (lambda d: fit_depth_profile(d), DEPTHS,
              lambda x: eq7_contrast(x, 0.1), "P", 0.1, None),
}


def _noisy(model, noise, seed):
    _, x, gen, *_ = MODELS[model]
    clean = gen(x)
    sig = noise * np.abs(clean) if model == "depth" else np.full(x.shape, noise)
    y = clean + np.random.default_rng(seed).normal(0, 1, x.shape) * sig
    return Dataset(x, y, sig)


def test_noiseless_recovery():
    for name, (fit, x, gen, key, truth, _) in MODELS.items():
        res = fit(Dataset(x, gen(x)))
        assert res.converged, name
        assert res.params[key] == pytest.approx(truth, rel=1e-9), name


def test_buildup_recovery():
    x = np.linspace(0.25, 6, 24)
    res = fit_buildup(Dataset(x, buildup(x, 0.03, 1.5)))
    assert res.params["buildup_time"] == pytest.approx(1.5, abs=1e-9)


def test_determinism_bit_identical():
    d = _noisy("lorentzian", 1e-3, 3)
    a, b = fit_lorentzian(d), fit_lorentzian(d)
    assert a.params == b.params
    assert np.array_equal(a.covariance, b.covariance)
    assert a.report() == b.report()


@pytest.mark.parametrize("model", list(MODELS))
def test_bias_vanishes_with_noise(model):
    fit, _, _, key, truth, noise0 = MODELS[model]
    noise0 = noise0 or 0.03
    errs = []
    for scale in (1.0, 0.1, 0.01):
        vals = [fit(_noisy(model, noise0 * scale, s)).params[key] for s in range(20)]
        errs.append(abs(np.mean(vals) - truth))
    assert errs[2] < errs[0]
    assert errs[2] < 0.01 * noise0 * abs(truth) + 1e-12 or errs[2] < errs[1]


@pytest.mark.parametrize("model", list(MODELS))
def test_coverage(model):
    fit, _, _, key, truth, noise0 = MODELS[model]
    noise0 = noise0 or 0.03
    z = []
    for s in range(100):
        res = fit(_noisy(model, noise0, 1000 + s))
        z.append(abs(res.params[key] - truth) / res.error(key))
    z = np.array(z)
    assert 0.60 <= np.mean(z < 1) <= 0.75
    assert np.mean(z < 2) >= 0.90


def test_field_fit_coverage_with_fixed_azimuth():
    z = []
    for s in range(100):
        res = fit_field_dependence(field_data(sigma=0.5, seed=2000 + s), phi=20.0)
        z.append(abs(res.params["theta"] - 8.0) / res.error("theta"))
    z = np.array(z)
    assert 0.60 <= np.mean(z < 1) <= 0.75
    assert np.mean(z < 2) >= 0.90


def test_reparameterization_invariance():
    d = _noisy("exponential", 1e-3, 5)
    a = fit_exponential(d)
    b = fit_exponential(Dataset(d.x * 1000.0, d.y, d.sigma))   # us -> ns
    assert b.chi2_reduced == pytest.approx(a.chi2_reduced, rel=1e-9)
    assert b.params["decay_time"] == pytest.approx(1000 * a.params["decay_time"], rel=1e-7)


def test_unit_weights_scale_covariance():
    d = _noisy("exponential", 1e-3, 6)
    w = fit_exponential(d)
    u = fit_exponential(Dataset(d.x, d.y))
    assert not u.weighted and w.weighted
    assert u.error("decay_time") == pytest.approx(
        w.error("decay_time") * math.sqrt(u.chi2_reduced) / 1e-3, rel=1e-4)


def test_singular_jacobian():
    x = np.linspace(0, 1, 5)
    with pytest.raises(SingularJacobian):
        fit_least_squares(lambda x, a, b: (a + b) * x, Dataset(x, 2 * x), {"a": 1.0, "b": 0.5})


def test_max_iterations():
    d = _noisy("lorentzian", 1e-3, 1)
    init = {"center": 800.0, "fwhm": 3.0, "amplitude": 0.01, "offset": 0.0}
    res = fit_least_squares(lorentzian, d, init, max_iter=1)
    assert not res.converged and res.message.startswith("MaxIterations")
    with pytest.raises(MaxIterations):
        fit_least_squares(lorentzian, d, init, max_iter=1, raise_on_max_iter=True)


def test_flat_exponential_does_not_crash():
    d = Dataset(TAU, np.full(TAU.shape, 0.01))
    res = fit_exponential(d)
    assert abs(res.params["amplitude"]) < 1e-6
    assert not res.converged or res.error("decay_time") > 1e3 * max(res.params["decay_time"], 1)


def test_dataset_validation():
    with pytest.raises(InvalidParameter):
        Dataset([1, 2], [1])
    with pytest.raises(InvalidParameter):
        Dataset([1, 2], [1, 2], [1, -1])
    with pytest.raises(InvalidParameter):
        fit_least_squares(lambda x, a, b: a * x + b, Dataset([0, 1], [0, 1]), {"a": 1, "b": 0})
    assert Dataset([1, 2], [1, 2], [0, 0]).sigma is None


def test_bounds_respected():
    d = _noisy("exponential", 1e-3, 2)
    res = fit_least_squares(exponential, d, {"amplitude": -0.02, "decay_time": 5.0, "offset": 0.0},
                            bounds={"decay_time": (1.0, 6.0)})
    assert 1.0 <= res.params["decay_time"] <= 6.0


def test_depth_profile_examples():
    # two noiseless depths reproduce the algebraic inversion at each depth
    sc = eq7_contrast(DEPTHS[:2], 0.1)
    res = fit_depth_profile(Dataset(DEPTHS[:2], sc))
    for d, y in zip(DEPTHS[:2], sc):
        assert res.params["P"] == pytest.approx(y / eq7_contrast(d, 1.0), rel=1e-12)
    flipped = fit_depth_profile(Dataset(DEPTHS, -eq7_contrast(DEPTHS, 0.1)))
    assert flipped.params["P"] == pytest.approx(-0.1, rel=1e-12)
    with pytest.raises(InvalidParameter):
        fit_depth_profile(Dataset([12.0], [0.01]))


def test_field_fit_recovers_azimuth_fixed():
    res = fit_field_dependence(field_data(sigma=0.5, seed=1), phi=20.0)
    assert abs(res.params["theta"] - 8.0) < 3 * res.error("theta")
    assert res.params["phi"] == 20.0


def test_field_fit_free_angles_flags_flat_direction():
    data = field_data()
    with pytest.warns(FlatDirection):
        res = fit_field_dependence(data)
    # a different orientation on the same level-equivalence curve
    lv, _ = labeled_levels(FIELDS, res.params["theta"], res.params["phi"])
    pred = np.r_[np.abs(lv[:, 0] - lv[:, 1]), np.abs(lv[:, 1] - lv[:, 2])]
    np.testing.assert_allclose(pred, data.y, atol=1e-6)
    assert not res.error("phi") < 90


def test_field_fit_theta_zero_phi_unidentified():
    with pytest.warns(FlatDirection):
        res = fit_field_dependence(field_data(theta=0.0, phi=0.0))
    assert res.params["theta"] < 0.1


def test_field_fit_free_electron():
    with pytest.warns(FlatDirection):
        res = fit_field_dependence(field_data(D=0.0, E=0.0), D=0.0, E=0.0)
    assert res.chi2_reduced < 1e-20


def test_field_fit_labels():
    d = field_data()
    with pytest.raises(InvalidParameter):
        fit_field_dependence(d, branches=["up"] * len(d))


def test_propagate_uncertainty_behaviour():
    sc = eq7_contrast(DEPTHS, 0.1)
    data = Dataset(DEPTHS, sc, 0.03 * sc)
    a = propagate_uncertainty(data, n_samples=200, seed=3)
    b = propagate_uncertainty(data, n_samples=200, seed=3)
    assert a.sigma_P == b.sigma_P
    assert a.sigma_P == pytest.approx(math.hypot(a.sigma_stat, a.sigma_nuisance))
    none = propagate_uncertainty(data, {"T_eff": 0.0, "r0": 0.0, "h": 0.0}, n_samples=100)
    assert none.sigma_nuisance == pytest.approx(0.0, abs=1e-15)
    assert none.sigma_P == pytest.approx(none.sigma_stat)
    # T_eff enters as 1/T: first-order spread is P sigma_T / T
    only_t = propagate_uncertainty(data, {"T_eff": 0.1}, n_samples=2000, seed=1)
    assert only_t.sigma_nuisance == pytest.approx(0.1 * 0.1 / 7.0, rel=0.1)
    with pytest.raises(InvalidParameter):
        propagate_uncertainty(data, n_samples=50)
    with pytest.raises(InvalidParameter):
        propagate_uncertainty(data, {"rho": 1.0})


def test_propagate_counts_unphysical_draws():
    sc = eq7_contrast(DEPTHS, 0.1)
    res = propagate_uncertainty(Dataset(DEPTHS, sc, 0.03 * sc), {"h": 15.0}, n_samples=400)
    assert 0 < res.n_failed < 400
    assert len(res.draws) + res.n_failed == 400


def test_read_csv(tmp_path):
    text = "x,y,sigma,branch\n500,815,0.5,plus\n510,820,0.5,minus\n520,825,0.5,plus\n"
    d = read_csv(text)
    assert d.labels == ("plus", "minus", "plus")
    path = tmp_path / "d.csv"
    path.write_text("x,y\n1,2\n3,4\n")
    d = read_csv(str(path))
    assert d.sigma is None and list(d.y) == [2.0, 4.0]
    with pytest.raises(InvalidParameter):
        read_csv("x,y\n1,a\n2,3\n")


def test_report_format():
    res = fit_lorentzian(Dataset(F, lorentzian(F, 815.0, 8.0, 0.03, 0.0)))
    lines = res.report("lorentzian").splitlines()
    keys = [ln.split("=")[0] for ln in lines]
    assert keys[:5] == ["model", "converged", "n_iterations", "chi2_reduced", "weighted"]
    assert "center" in keys and "center_err" in keys
    assert res.to_dict()["params"]["center"] == res.params["center"]
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        res.to_json()
