import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nvpol.errors import InvalidParameter, SmallSignalWarning
from nvpol.fitting import Dataset, fit_buildup, fit_exponential
from nvpol.kinetics import (PRESETS, KineticsParams, SequenceSpec, SublevelPopulations,
                            apply_mw1, buildup_experiment, default_resonance, echo_phase,
                            lorentzian_response, mw1_saturation, polarization_buildup, relax,
                            relaxation_experiment, simulate_oipd, spectrum)
from nvpol.signal import phase_rad

K = KineticsParams()


def test_buildup_law():
    assert polarization_buildup(0.0, K) == 0.0
    assert polarization_buildup(1.5, K) == pytest.approx(0.19 * (1 - math.exp(-1)))
    assert polarization_buildup(4.0, K) >= 0.93 * 0.19
    assert polarization_buildup(1e3, K) == pytest.approx(0.19)


def test_mw1_halving_and_saturation():
    assert mw1_saturation(80.0) == pytest.approx(0.5, abs=1e-15)
    assert mw1_saturation(0.0) == 0.0
    assert mw1_saturation(1e5) == pytest.approx(1.0, abs=1e-12)
    pop = SublevelPopulations.after_laser(0.2)
    half = apply_mw1(pop, 80.0)
    assert half.P == pytest.approx(0.1, abs=1e-15)
    assert apply_mw1(pop, 1e5).P == pytest.approx(0.0, abs=1e-12)


def test_lorentzian_response():
    assert lorentzian_response(0.0, 8.0) == 1.0
    assert lorentzian_response(4.0, 8.0) == pytest.approx(0.5)
    with pytest.raises(InvalidParameter):
        lorentzian_response(0.0, 0.0)


def test_after_laser_distribution():
    pop = SublevelPopulations.after_laser(0.15)
    assert pop.P == pytest.approx(0.15)
    assert pop.p_plus == pop.p_minus
    assert pop.total == pytest.approx(1.0)
    neg = SublevelPopulations.after_laser(-0.1)
    assert neg.P == pytest.approx(-0.1) and neg.p_plus == neg.p_minus


def test_population_validation():
    with pytest.raises(InvalidParameter):
        SublevelPopulations(0.5, 0.5, 0.5, -0.5)
    with pytest.raises(InvalidParameter):
        SublevelPopulations(0.5, 0.1, 0.1, 0.1)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1), st.lists(st.tuples(st.booleans(), st.floats(0, 50), st.floats(-50, 50)),
                                 max_size=12))
def test_population_conservation(P, steps):
    pop = SublevelPopulations.after_laser(P)
    for is_mw, t, det in steps:
        pop = apply_mw1(pop, t * 10, det) if is_mw else relax(pop, t, K)
        assert pop.total == pytest.approx(1.0, abs=1e-12)
        for v in (pop.p_zero, pop.p_plus, pop.p_minus, pop.p_ground):
            assert -1e-12 <= v <= 1 + 1e-12


def test_relax_rates():
    pop = SublevelPopulations(0.3, 0.2, 0.2, 0.3)
    later = relax(pop, 7.0, K)
    assert later.p_plus == pytest.approx(0.2 / math.e)
    assert later.p_zero == pytest.approx(0.3 * math.exp(-7 / 23))
    assert later.p_minus == later.p_plus


def test_echo_null_for_constant_field():
    seg = [(-5.0, math.inf, [(3.7e-3, math.inf)])]
    assert echo_phase(seg, 21.6, 2.8) == 0.0
    # field switched on exactly at the pi pulse survives the echo
    seg = [(10.8, math.inf, [(1e-4, math.inf)])]
    assert echo_phase(seg, 21.6, 2.8) == pytest.approx(phase_rad(2.8, 1e-4, 10.8))


def test_y_readout_sign_and_x_quadratic():
    base = simulate_oipd(SequenceSpec())
    assert base.sc > 0
    assert base.sc == pytest.approx(0.5 * math.sin(base.phase))
    xr = simulate_oipd(SequenceSpec(readout_phase="x"))
    assert xr.sc == pytest.approx(0.5 * (1 - math.cos(base.phase)))
    assert abs(xr.sc) < 0.05 * abs(base.sc)


def test_linear_in_polarization_small_phase():
    seq = SequenceSpec()
    a = simulate_oipd(seq, k=K.replace(P_sat=0.01))
    b = simulate_oipd(seq, k=K.replace(P_sat=0.02))
    assert abs(b.phase) < 0.05
    assert b.sc / a.sc == pytest.approx(2.0, rel=2e-3)


def test_off_resonance_suppressed():
    on = simulate_oipd(SequenceSpec())
    off = simulate_oipd(SequenceSpec(mw1_frequency=default_resonance() + 40.0))
    assert abs(off.sc) < 0.05 * on.sc


def test_large_phase_warns():
    from nvpol.dipolar import SampleSpec
    dense = SampleSpec(rho=0.05)
    with pytest.warns(SmallSignalWarning):
        simulate_oipd(SequenceSpec(), dense)


def test_trace_csv():
    res = simulate_oipd(SequenceSpec(), trace_points=5)
    lines = res.trace_csv().splitlines()
    assert lines[0] == "t_us,B_G" and len(lines) == 6


def test_sequence_validation():
    with pytest.raises(InvalidParameter):
        SequenceSpec(readout_phase="z")
    with pytest.raises(InvalidParameter):
        SequenceSpec(tau=-1)
    with pytest.raises(InvalidParameter):
        SequenceSpec(mw1_placement="late")
    with pytest.raises(InvalidParameter):
        KineticsParams(T_plus=0)
    assert set(PRESETS) == {"oipd", "oipd-relax-plus", "oipd-relax-zero"}


def test_spectrum_single_peak_at_resonance():
    f = np.linspace(790, 840, 101)
    data = spectrum(SequenceSpec(), f)
    peak = f[np.argmax(data.y)]
    assert abs(peak - default_resonance()) <= 0.5
    inner = data.y[1:-1]
    maxima = (inner > data.y[:-2]) & (inner > data.y[2:])
    assert maxima.sum() == 1


def test_noise_is_seeded():
    f = np.linspace(800, 830, 11)
    a = spectrum(SequenceSpec(), f, noise_sigma=1e-3, seed=4)
    b = spectrum(SequenceSpec(), f, noise_sigma=1e-3, seed=4)
    c = spectrum(SequenceSpec(), f, noise_sigma=1e-3, seed=5)
    assert a.to_csv() == b.to_csv() != c.to_csv()
    assert np.all(a.sigma == 1e-3)


@pytest.mark.parametrize("kind,T", [("plus", 7.0), ("zero", 23.0)])
def test_relaxation_is_exponential(kind, T):
    taus = np.linspace(0, 40, 9)
    data = relaxation_experiment(kind, taus)
    ratios = data.y[1:] / data.y[:-1]
    np.testing.assert_allclose(ratios, math.exp(-5.0 / T), rtol=1e-12)
    assert data.x_label == f"tau_rel_{kind}_us"
    with pytest.raises(InvalidParameter):
        relaxation_experiment("minus", taus)


def test_round_trip_identifiability():
    # 60 fits; each lands outside 3 sigma with probability 0.27%, so more
    # than two misses would signal a biased estimator or wrong covariance
    rng = np.random.default_rng(11)
    taus = np.linspace(0, 40, 21)
    tps = np.linspace(0.25, 6, 24)
    misses, fits = [], 0
    for seed in range(20):
        T_plus, T_zero, t_l = rng.uniform(4, 10), rng.uniform(15, 30), rng.uniform(1, 2)
        k = K.replace(T_plus=T_plus, T_zero=T_zero, t_l=t_l)
        cases = []
        for kind, truth in (("plus", T_plus), ("zero", T_zero)):
            clean = relaxation_experiment(kind, taus, k=k)
            noise = 0.02 * np.max(np.abs(clean.y))
            d = relaxation_experiment(kind, taus, k=k, noise_sigma=noise, seed=seed)
            fit = fit_exponential(Dataset(d.x, d.y, d.sigma))
            cases.append((kind, fit.params["decay_time"], fit.error("decay_time"), truth))
        clean = buildup_experiment(tps, k=k)
        noise = 0.02 * np.max(np.abs(clean.y))
        d = buildup_experiment(tps, k=k, noise_sigma=noise, seed=seed)
        fit = fit_buildup(Dataset(d.x, d.y, d.sigma))
        cases.append(("buildup", fit.params["buildup_time"], fit.error("buildup_time"), t_l))
        for name, value, err, truth in cases:
            fits += 1
            assert fit.converged
            if abs(value - truth) >= 3 * err:
                misses.append((seed, name, (value - truth) / err))
    assert fits == 60
    assert len(misses) <= 2, misses
