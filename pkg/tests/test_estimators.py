import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from palmpp import MaternProcess, ThomasProcess, VoidProcess
from palmpp.core import RngStream, ThomasParams, VoidParams, Window
from palmpp.fit import FitConfig, fit_model
from palmpp.sim import simulate

UNIT = Window.unit()


@pytest.fixture(scope="module")
def thomas_pattern():
    return simulate(ThomasParams(25, 8, 0.03), UNIT, RngStream(1))


def test_params_roundtrip():
    est = ThomasProcess(window=UNIT, truncation=0.2, restarts=2)
    assert est.get_params()["truncation"] == 0.2
    c = clone(est)
    assert c.get_params() == est.get_params()
    est.set_params(tol=1e-4)
    assert est.tol == 1e-4


def test_fit_matches_functional_api(thomas_pattern):
    est = ThomasProcess().fit(thomas_pattern)
    ref = fit_model(thomas_pattern, FitConfig("thomas"))
    assert est.params_ == ref.params_hat
    assert est.loglik_ == ref.loglik and est.truncation_ == ref.t
    assert est.n_features_in_ == 2


def test_array_input_needs_window(thomas_pattern):
    with pytest.raises(ValueError, match="window"):
        ThomasProcess().fit(thomas_pattern.points)
    est = ThomasProcess(window=UNIT).fit(thomas_pattern.points)
    assert est.params_ == ThomasProcess().fit(thomas_pattern).params_


def test_score_is_per_point_loglik(thomas_pattern):
    est = ThomasProcess().fit(thomas_pattern)
    assert est.score(thomas_pattern) == pytest.approx(est.loglik_ / thomas_pattern.n)


def test_not_fitted():
    with pytest.raises(NotFittedError):
        ThomasProcess().palm_intensity(0.1)


def test_sample_and_intensity(thomas_pattern):
    est = ThomasProcess().fit(thomas_pattern)
    q = est.sample(random_state=3)
    assert q.window == UNIT
    assert est.palm_intensity(10.0) == pytest.approx(est.params_.D * est.params_.nu)
    assert set(est.get_fitted_params()) == {"D", "nu", "sigma"}


def test_matern_and_void():
    p = simulate(VoidParams(10, 0.075, 300), UNIT, RngStream(2))
    v = VoidProcess().fit(p)
    assert v.truncation_ == 0.25 and "lambda" in v.get_fitted_params()
    m = MaternProcess(truncation=0.15).fit(simulate(ThomasParams(25, 8, 0.03), UNIT, RngStream(3)))
    assert m.params_.model == "matern"


def test_bad_array_shape():
    with pytest.raises(ValueError):
        ThomasProcess(window=UNIT).fit(np.zeros((5, 3)))
