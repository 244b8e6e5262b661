"""scikit-learn style estimators wrapping :func:`palmpp.fit.fit_model`."""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .core import PointPattern, Window, as_pattern, pairwise_distances
from .fit import FitConfig, OptimizerConfig, fit_model, palm_loglik
from .palm import palm_intensity
from .sim import simulate


class _PalmProcess(BaseEstimator):
    """Shared fit/score/sample logic; subclasses fix the model."""

    _model = ""

    def _config(self) -> FitConfig:
        return FitConfig(self._model, t=self.truncation,
                         optimizer=OptimizerConfig(self.max_iter, self.tol, self.restarts),
                         edge_correction=self.edge_correction)

    def fit(self, X, y=None, other=None):
        """Fit to a :class:`PointPattern` or an ``(n, d)`` array inside ``self.window``.

        ``other`` is an optional second-class pattern for the automatic
        truncation rule. ``y`` is ignored.
        """
        p = as_pattern(X, self.window)
        if other is not None:
            other = as_pattern(other, p.window)
        res = fit_model(p, self._config(), other=other)
        self.result_ = res
        self.params_ = res.params_hat
        self.loglik_ = res.loglik
        self.truncation_ = res.t
        self.converged_ = res.converged
        self.window_ = p.window
        self.n_features_in_ = p.dim
        return self

    def score(self, X, y=None):
        """Palm log-likelihood of ``X`` under the fitted parameters, per point."""
        check_is_fitted(self, "params_")
        p = as_pattern(X, self.window if self.window is not None else self.window_)
        t = self.truncation_
        r = pairwise_distances(p, t)
        w = p.window if self.edge_correction else None
        return palm_loglik(self._model, self.params_, r, p.n, t, p.dim, w) / p.n

    def palm_intensity(self, r):
        check_is_fitted(self, "params_")
        return palm_intensity(r, self.params_, self.n_features_in_)

    def sample(self, window: Window | None = None, random_state=0) -> PointPattern:
        """Simulate one pattern from the fitted parameters."""
        check_is_fitted(self, "params_")
        return simulate(self.params_, window or self.window_, random_state)

    def get_fitted_params(self) -> dict:
        check_is_fitted(self, "params_")
        return self.params_.to_dict()


class ThomasProcess(_PalmProcess):
    """Thomas cluster process fitted by maximum Palm likelihood.

    Parameters
    ----------
    window : Window, optional
        Observation window for array input.
    truncation : float or "auto"
        Largest pair distance used by the likelihood.
    edge_correction : bool
        Weight the likelihood integral by the window set covariance.
    max_iter, tol, restarts
        Nelder-Mead settings.
    """

    _model = "thomas"

    def __init__(self, window=None, truncation="auto", edge_correction=True,
                 max_iter=500, tol=1e-6, restarts=3):
        self.window = window
        self.truncation = truncation
        self.edge_correction = edge_correction
        self.max_iter = max_iter
        self.tol = tol
        self.restarts = restarts


class MaternProcess(ThomasProcess):
    """Matern cluster process; same parameters as :class:`ThomasProcess`."""

    _model = "matern"


class VoidProcess(ThomasProcess):
    """Void (parent-thinned Poisson) process; same parameters as :class:`ThomasProcess`."""

    _model = "void"
