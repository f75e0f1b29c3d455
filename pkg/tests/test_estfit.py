import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sivkinetics import estfit as E
from sivkinetics.errors import DegenerateData, NonConvergence, SingularJacobian

V = np.linspace(-200.0, 0.0, 41)
E_AXIS = np.linspace(1.9, 2.7, 81)


def xy(x, y):
    return np.column_stack([x, y])


def assert_recovers(res, truth, rel=5e-3):
    for k, v in truth.items():
        assert res[k] == pytest.approx(v, rel=rel), k


# -- the optimiser ---------------------------------------------------------------

def test_linear_model_exact_in_two_iterations():
    x = np.linspace(-3, 5, 20)
    res = E.lm_minimize(lambda p, x: p["a"] * x + p["b"], x, 2.5 * x - 1.0, {"a": 0.0, "b": 0.0})
    assert res.iterations <= 2
    assert res["a"] == pytest.approx(2.5, rel=1e-9)
    assert res["b"] == pytest.approx(-1.0, rel=1e-9)


def test_rosenbrock_minimum():
    # residuals (1 - a, 10 (b - a^2)) from the classic start (-1.2, 1), plus a
    # constant zero row to satisfy the point count
    def model(p, x):
        return np.array([p["a"], -10.0 * (p["b"] - p["a"] ** 2), 0.0])

    res = E.lm_minimize(model, np.zeros(3), np.array([1.0, 0.0, 0.0]), {"a": -1.2, "b": 1.0})
    assert res["a"] == pytest.approx(1.0, abs=1e-6)
    assert res["b"] == pytest.approx(1.0, abs=1e-6)


def test_constant_data_mean_model():
    y = np.full(10, 4.2)
    res = E.lm_minimize(lambda p, x: np.full(x.size, p["c"]), np.arange(10.0), y, {"c": 1.0})
    assert res["c"] == pytest.approx(4.2, rel=1e-12)
    assert res.residual_norm == pytest.approx(0.0, abs=1e-9)


def test_cost_never_increases():
    rng = np.random.default_rng(4)
    t = np.linspace(0, 60, 200)
    y = E.biexp({"a1": 2.0, "tau1": 1.0, "a2": 1.0, "tau2": 20.0, "offset": 0.1}, t) + rng.normal(0, 0.01, t.size)
    res = E.lm_minimize(E.biexp, t, y, {"a1": 1.0, "tau1": 3.0, "a2": 1.0, "tau2": 10.0, "offset": 0.0},
                        bounds={"tau1": "positive", "tau2": "positive"})
    h = np.array(res.cost_history)
    assert h.size == res.iterations + 1
    assert np.all(np.diff(h) <= 0)


def test_bounds_are_respected():
    x = np.linspace(0, 1, 10)
    # an interval-bounded parameter stays inside while chasing a target outside
    try:
        res = E.lm_minimize(lambda p, x: p["k"] * x, x, 3.0 * x, {"k": 0.5}, bounds={"k": (0.0, 2.0)},
                            allow_singular=True)
    except NonConvergence as exc:
        res = exc.result
    assert 0.0 < res["k"] <= 2.0


def test_fixed_parameter_unchanged():
    x = np.linspace(0, 4, 12)
    res = E.lm_minimize(lambda p, x: p["a"] * x + p["b"], x, 2 * x + 1, {"a": 1.0, "b": 3.0}, fixed=("b",))
    assert res["b"] == 3.0
    assert res.stderr["b"] == 0.0


def test_too_few_points():
    with pytest.raises(DegenerateData):
        E.lm_minimize(lambda p, x: p["a"] * x + p["b"], [0.0, 1.0], [0.0, 1.0], {"a": 1.0, "b": 0.0})


def test_insensitive_parameter_is_singular():
    x = np.linspace(0, 1, 10)
    with pytest.raises(SingularJacobian):
        E.lm_minimize(lambda p, x: p["a"] * x, x, 2 * x, {"a": 1.0, "ghost": 1.0})


def test_non_convergence_carries_result():
    x = np.linspace(0, 10, 30)
    with pytest.raises(NonConvergence) as info:
        E.lm_minimize(E.monoexp, x, E.monoexp({"a": 1.0, "tau": 2.0, "offset": 0.0}, x),
                      {"a": 0.2, "tau": 9.0, "offset": 0.5}, max_iter=1)
    assert info.value.result is not None


def test_covariance_is_symmetric_psd():
    rng = np.random.default_rng(9)
    y = E.sigmoid({"center": -60.0, "width": 10.0, "amplitude": 1.0, "offset": 0.3}, V) + rng.normal(0, 0.01, V.size)
    res = E.fit_sigmoid(xy(V, y))
    c = res.covariance
    assert np.allclose(c, c.T)
    assert np.all(np.linalg.eigvalsh(c) >= -1e-15 * np.abs(c).max())
    for i, k in enumerate(res.names):
        assert res.stderr[k] == pytest.approx(math.sqrt(c[i, i]), rel=1e-12)


def test_fit_result_text_round_trip():
    t = np.linspace(0, 20, 40)
    res = E.fit_monoexp(xy(t, E.monoexp({"a": 2.0, "tau": 4.0, "offset": 0.1}, t)))
    res.flags.append("demo")
    back = E.FitResult.from_text(res.to_text())
    assert back.names == res.names
    for k in res.names:
        assert back[k] == pytest.approx(res[k], rel=1e-11)
    assert back.iterations == res.iterations and back.converged and back.flags == ["demo"]


# -- sigmoid -----------------------------------------------------------------

def test_sigmoid_noisy_center():
    rng = np.random.default_rng(1)
    truth = {"center": -40.0, "width": 8.0, "amplitude": 1.0, "offset": 0.5}
    y = E.sigmoid(truth, V)
    y = y * (1 + rng.normal(0, 0.01, V.size))
    assert E.fit_sigmoid(xy(V, y))["center"] == pytest.approx(-40.0, abs=1.0)


def test_sigmoid_constant_data():
    res = E.fit_sigmoid(xy(V, np.full(V.size, 3.0)))
    assert res["amplitude"] == 0.0
    assert "center_unidentifiable" in res.flags


def test_sigmoid_mirror():
    truth = {"center": -70.0, "width": 15.0, "amplitude": 2.0, "offset": 0.2}
    a = E.fit_sigmoid(xy(V, E.sigmoid(truth, V)))
    b = E.fit_sigmoid(xy(-V, E.sigmoid(truth, V)))
    # mirrored data is a sigmoid of the same width with the opposite orientation
    assert b["center"] == pytest.approx(-a["center"], rel=1e-6)
    assert abs(b["width"]) == pytest.approx(a["width"], rel=1e-6) or b["amplitude"] == pytest.approx(-2.0, rel=1e-6)


# -- exponentials ---------------------------------------------------------------

def test_biexp_round_trip():
    t = np.linspace(0, 100e-6, 200)
    truth = {"a1": 2.0, "tau1": 1e-6, "a2": 1.0, "tau2": 20e-6, "offset": 0.5}
    res = E.fit_biexp(xy(t, E.biexp(truth, t)))
    assert res["tau1"] == pytest.approx(1e-6, rel=5e-3)
    assert res["tau2"] == pytest.approx(20e-6, rel=5e-3)
    assert "tau_collapse" not in res.flags


def test_biexp_canonical_order():
    t = np.linspace(0, 60, 150)
    res = E.fit_biexp(xy(t, E.biexp({"a1": 1.0, "tau1": 15.0, "a2": 3.0, "tau2": 2.0, "offset": 0.0}, t)))
    assert res["tau1"] < res["tau2"]
    assert res["a1"] == pytest.approx(3.0, rel=1e-3)


def test_biexp_mono_input_collapses():
    t = np.linspace(0, 30, 100)
    res = E.fit_biexp(xy(t, E.monoexp({"a": 2.0, "tau": 5.0, "offset": 0.3}, t)))
    assert "tau_collapse" in res.flags


def test_biexp_offset_only():
    t = np.linspace(0, 30, 100)
    res = E.fit_biexp(xy(t, np.full(t.size, 0.7)))
    assert abs(res["a1"]) < 1e-6 and abs(res["a2"]) < 1e-6
    assert res["offset"] == pytest.approx(0.7, rel=1e-9)


def test_biexp_fixed_offset():
    t = np.linspace(0, 60, 200)
    truth = {"a1": 2.0, "tau1": 1.0, "a2": 1.0, "tau2": 20.0, "offset": 0.25}
    res = E.fit_biexp(xy(t, E.biexp(truth, t)), offset=0.25)
    assert res["offset"] == 0.25
    assert_recovers(res, truth)


def test_monoexp_dark_lifetime():
    t = np.linspace(0, 180, 30)
    res = E.fit_monoexp(xy(t, E.monoexp({"a": 1.0, "tau": 36.4, "offset": 0.0}, t)))
    assert res["tau"] == pytest.approx(36.4, rel=1e-3)


@given(st.floats(-50.0, 50.0))
def test_monoexp_shift_identity(shift):
    t = np.linspace(0, 100, 30)
    truth = {"a": 1.5, "tau": 12.0, "offset": 0.2}
    res = E.fit_monoexp(xy(t + shift, E.monoexp(truth, t)))
    assert res["tau"] == pytest.approx(12.0, rel=1e-6)
    assert res["a"] == pytest.approx(1.5 * math.exp(shift / 12.0), rel=1e-6)


def test_monoexp_noisy():
    rng = np.random.default_rng(12)
    t = np.linspace(0, 150, 30)
    y = E.monoexp({"a": 1.0, "tau": 36.4, "offset": 0.0}, t)
    y = y + rng.normal(0, 0.05, t.size)
    assert E.fit_monoexp(xy(t, y))["tau"] == pytest.approx(36.4, rel=0.15)


# -- power law and Gaussian --------------------------------------------------------

def test_powerlaw_cases():
    p = np.array([1.0, 2.5, 5.0, 10.0, 28.0])
    res = E.fit_powerlaw(xy(p, 3.0 * p**0.85))
    assert res["exponent"] == pytest.approx(0.85, rel=1e-12)
    assert res.stderr["exponent"] == pytest.approx(0.0, abs=1e-12)
    assert E.fit_powerlaw(xy(p, np.full(p.size, 7.0)))["exponent"] == pytest.approx(0.0, abs=1e-12)
    assert E.fit_powerlaw(xy(p, 4.0 * p))["exponent"] == pytest.approx(1.0, rel=1e-12)


def test_powerlaw_rejects_nonpositive():
    with pytest.raises(DegenerateData):
        E.fit_powerlaw(xy([1.0, 2.0, 0.0], [1.0, 2.0, 3.0]))


def test_gauss_round_trip():
    truth = {"center": 2.27, "fwhm": 0.043, "amplitude": 2.5, "slope": 4.0, "offset": -8.0}
    res = E.fit_gauss_linear(xy(E_AXIS, E.gauss_linear(truth, E_AXIS)))
    assert_recovers(res, truth, rel=1e-3)


def test_gauss_pure_line():
    res = E.fit_gauss_linear(xy(E_AXIS, 1.5 * E_AXIS + 0.3))
    assert res["slope"] == pytest.approx(1.5, rel=1e-9)
    assert res["offset"] == pytest.approx(0.3, rel=1e-9)
    assert "center_unidentifiable" in res.flags


def test_gauss_mirror_keeps_center():
    c = 2.3
    truth = {"center": c, "fwhm": 0.08, "amplitude": 1.0, "slope": 0.0, "offset": 0.2}
    y = E.gauss_linear(truth, E_AXIS)
    res = E.fit_gauss_linear(xy(2 * c - E_AXIS, y))
    assert res["center"] == pytest.approx(c, rel=1e-6)


def test_gauss_peak_outside_range_flag():
    # only the rising flank is sampled
    e = np.linspace(2.1, 2.25, 40)
    y = E.gauss_linear({"center": 2.27, "fwhm": 0.043, "amplitude": 2.5, "slope": 0.0, "offset": 0.2}, e)
    res = E.fit_gauss_linear(xy(e, y))
    assert res["center"] > e[-1]
    assert "peak_outside_range" in res.flags


# -- randomized round trips and scaling -----------------------------------------

def _sigmoid_truth(r):
    return {"center": r.uniform(-150, -50), "width": r.uniform(5, 30), "amplitude": r.uniform(0.5, 5),
            "offset": r.uniform(0.5, 2)}


def _biexp_truth(r):
    tau1 = r.uniform(0.5, 2.0)
    a1 = r.uniform(1, 5)
    return {"a1": a1, "tau1": tau1, "a2": a1 * r.uniform(0.3, 1.0), "tau2": tau1 * r.uniform(5, 20),
            "offset": r.uniform(0.5, 2)}


def _mono_truth(r):
    return {"a": r.uniform(0.5, 5), "tau": r.uniform(1, 100), "offset": r.uniform(0.5, 2)}


def _gauss_truth(r):
    return {"center": r.uniform(2.1, 2.5), "fwhm": r.uniform(0.03, 0.15), "amplitude": r.uniform(0.5, 5),
            "slope": r.uniform(0.5, 3), "offset": r.uniform(0.5, 2)}


def _axis(name, truth):
    if name == "sigmoid":
        return V
    if name == "biexp":
        return np.linspace(0, 5 * truth["tau2"], 200)
    if name == "monoexp":
        return np.linspace(0, 5 * truth["tau"], 50)
    return E_AXIS


MODELS = {
    "sigmoid": (E.fit_sigmoid, E.sigmoid, _sigmoid_truth),
    "biexp": (E.fit_biexp, E.biexp, _biexp_truth),
    "monoexp": (E.fit_monoexp, E.monoexp, _mono_truth),
    "gauss_linear": (E.fit_gauss_linear, E.gauss_linear, _gauss_truth),
}


@pytest.mark.parametrize("name", MODELS)
@settings(max_examples=25)
@given(seed=st.integers(0, 2**32 - 1))
def test_random_round_trip(name, seed):
    fitter, model, draw = MODELS[name]
    truth = draw(np.random.default_rng(seed))
    x = _axis(name, truth)
    assert_recovers(fitter(xy(x, model(truth, x))), truth)


@given(st.floats(-2, 2), st.floats(1e-3, 1e3))
def test_powerlaw_random_round_trip(exponent, pref):
    p = np.geomspace(1, 100, 8)
    res = E.fit_powerlaw(xy(p, pref * p**exponent))
    assert res["exponent"] == pytest.approx(exponent, rel=5e-3, abs=1e-9)
    assert res["prefactor"] == pytest.approx(pref, rel=5e-3)


AMPLITUDE_LIKE = {"sigmoid": ("amplitude", "offset"), "biexp": ("a1", "a2", "offset"),
                  "monoexp": ("a", "offset"), "gauss_linear": ("amplitude", "slope", "offset")}


@pytest.mark.parametrize("name", MODELS)
@settings(max_examples=15)
@given(seed=st.integers(0, 2**32 - 1), c=st.floats(1e-3, 1e3))
def test_y_scaling_invariance(name, seed, c):
    fitter, model, draw = MODELS[name]
    rng = np.random.default_rng(seed)
    truth = draw(rng)
    x = _axis(name, truth)
    y = model(truth, x) * (1 + 0.01 * rng.standard_normal(x.size))
    a = fitter(xy(x, y))
    b = fitter(xy(x, c * y))
    for k in a.names:
        want = c * a[k] if k in AMPLITUDE_LIKE[name] else a[k]
        assert b[k] == pytest.approx(want, rel=1e-6, abs=1e-9 * abs(c) * max(abs(y).max(), 1.0)), k
