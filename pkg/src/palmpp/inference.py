"""Hierarchical bootstrap and single-predictor outcome classification for patient cohorts."""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import PointPattern, RngStream, as_rng
from .fit import FitConfig, OptimizationError, fit_model

DEFAULT_BOOT = 1000


# ---------------------------------------------------------------------------
# data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Image:
    id: str
    tumour: PointPattern
    stroma: PointPattern


@dataclass(frozen=True)
class Patient:
    id: str
    outcome: int
    images: tuple

    def __post_init__(self):
        if self.outcome not in (0, 1):
            raise ValueError(f"patient {self.id}: outcome must be 0 or 1")
        if len(self.images) < 1:
            raise ValueError(f"patient {self.id}: needs at least one image")


@dataclass(frozen=True)
class CohortDataset:
    """Patients, each with one binary outcome and one or more two-class images."""

    patients: tuple

    def __post_init__(self):
        if not self.patients:
            raise ValueError("cohort has no patients")
        ids = [p.id for p in self.patients]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate patient ids")

    @property
    def outcomes(self) -> np.ndarray:
        return np.array([p.outcome for p in self.patients])


# ---------------------------------------------------------------------------
# hierarchical bootstrap
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BootstrapSummary:
    statistic: str
    median: float
    q025: float
    q975: float
    replicates: int

    def to_dict(self) -> dict:
        return {"statistic": self.statistic, "median": self.median, "q025": self.q025,
                "q975": self.q975, "replicates": self.replicates}


def bootstrap_replicates(values, B: int, rng) -> np.ndarray:
    """Two-stage resampling: patients with replacement, then each sampled
    patient's images with replacement. Each replicate is the mean of the
    pooled resampled image values."""
    groups = [np.asarray(v, dtype=float).ravel() for v in values]
    groups = [g for g in groups if g.size]
    if not groups:
        raise ValueError("hierarchical bootstrap needs at least one patient with data")
    if B < 1:
        raise ValueError("B must be >= 1")
    rng = as_rng(rng)
    gen = rng.generator
    n_p = len(groups)
    sizes = np.array([g.size for g in groups])
    out = np.empty(B)
    for b in range(B):
        picked = gen.integers(0, n_p, n_p)
        total = 0.0
        count = 0
        for i in picked:
            k = sizes[i]
            total += groups[i][gen.integers(0, k, k)].sum()
            count += k
        out[b] = total / count
    return out


def hierarchical_bootstrap(values, B: int = DEFAULT_BOOT, rng=None, name: str = "") -> BootstrapSummary:
    """Median and 2.5/97.5% quantiles of the two-stage bootstrap mean.

    ``values`` is a list with one sequence of per-image statistics per patient.
    """
    reps = bootstrap_replicates(values, B, rng)
    q025, med, q975 = np.quantile(reps, [0.025, 0.5, 0.975])
    return BootstrapSummary(name, float(med), float(q025), float(q975), int(B))


# ---------------------------------------------------------------------------
# logistic regression
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LogisticFit:
    intercept: float
    slope: float
    converged: bool
    separated: bool
    iterations: int

    @property
    def coef(self) -> tuple:
        return self.intercept, self.slope

    def predict_proba(self, x) -> np.ndarray:
        return _expit(self.intercept + self.slope * np.asarray(x, dtype=float))


def _expit(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _check_binary(y) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1 or not np.all(np.isin(y, (0, 1))):
        raise ValueError("outcomes must be a 1D array of 0/1")
    if y.min() == y.max():
        raise ValueError("both outcome classes must be present")
    return y.astype(float)


def _separated(x, y) -> bool:
    x0, x1 = x[y == 0], x[y == 1]
    return x0.max() < x1.min() or x1.max() < x0.min()


def logistic_fit(x, y, tol: float = 1e-8, max_iter: int = 100) -> LogisticFit:
    """Two-parameter logistic regression by Newton-Raphson with step halving.

    Stops when the score norm drops below ``tol``. Under perfect separation
    there is no finite optimum; the coefficients after ``max_iter`` steps are
    returned with ``separated=True``.
    """
    y = _check_binary(y)
    x = np.asarray(x, dtype=float)
    if x.shape != y.shape or not np.all(np.isfinite(x)):
        raise ValueError("x must be finite and match y")
    scale = x.std()
    if not scale > 0:
        raise ValueError("degenerate predictor: x is constant")
    loc = x.mean()
    X = np.column_stack([np.ones_like(x), (x - loc) / scale])
    separated = _separated(x, y)

    def nll(beta):
        z = X @ beta
        return float(np.sum(np.logaddexp(0.0, z) - y * z))

    beta = np.zeros(2)
    cur = nll(beta)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        p = _expit(X @ beta)
        grad = X.T @ (y - p)
        if np.linalg.norm(grad) < tol:
            converged = True
            break
        w = p * (1 - p)
        H = X.T @ (X * w[:, None])
        try:
            step = np.linalg.solve(H + 1e-12 * np.eye(2), grad)
        except np.linalg.LinAlgError:
            break
        t = 1.0
        while t > 1e-10:
            cand = beta + t * step
            val = nll(cand)
            if val <= cur:
                break
            t *= 0.5
        else:
            break
        beta, cur = cand, val
    if separated:
        converged = False
    slope = beta[1] / scale
    intercept = beta[0] - slope * loc
    return LogisticFit(float(intercept), float(slope), converged, separated, it)


# ---------------------------------------------------------------------------
# ROC and cross validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auroc: float


def roc_curve(scores, y) -> RocCurve:
    """ROC curve over every distinct score; tied scores form one step.

    Larger scores predict class 1. The curve runs from (0, 0) to (1, 1) and
    the AUROC is the trapezoid area under it.
    """
    y = _check_binary(y)
    s = np.asarray(scores, dtype=float)
    if s.shape != y.shape or not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite and match y")
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    last = np.r_[np.nonzero(np.diff(s))[0], s.size - 1]
    tp = np.cumsum(y)[last]
    fp = (last + 1) - tp
    tpr = np.r_[0.0, tp / y.sum()]
    fpr = np.r_[0.0, fp / (y.size - y.sum())]
    auroc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(fpr, tpr, np.r_[np.inf, s[last]], auroc)


def loocv_score(x, y, cost: str = "brier") -> float:
    """Leave-one-out test error of the single-predictor logistic model.

    ``cost="brier"`` averages (y - p)^2 over held-out patients;
    ``"misclass"`` averages errors at the 0.5 threshold. Folds whose
    training set lacks a class are skipped with a warning.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y)
    if x.size < 3:
        raise ValueError("LOOCV needs at least 3 patients")
    _check_binary(y)
    if cost not in ("brier", "misclass"):
        raise ValueError("cost must be 'brier' or 'misclass'")
    errs = []
    for i in range(x.size):
        keep = np.arange(x.size) != i
        yt = y[keep]
        if yt.min() == yt.max():
            warnings.warn(f"LOOCV fold {i} skipped: training set has one class", stacklevel=2)
            continue
        try:
            model = logistic_fit(x[keep], yt)
        except ValueError as exc:
            warnings.warn(f"LOOCV fold {i} skipped: {exc}", stacklevel=2)
            continue
        p = float(model.predict_proba(x[i]))
        errs.append((y[i] - p) ** 2 if cost == "brier" else float((p >= 0.5) != bool(y[i])))
    if not errs:
        raise ValueError("every LOOCV fold was degenerate")
    return float(np.mean(errs))


@dataclass(frozen=True)
class ClassifierReport:
    predictor: str
    patient_ids: tuple
    means: np.ndarray
    outcomes: np.ndarray
    intercept: float
    slope: float
    roc: RocCurve
    auroc: float
    cv: float
    separated: bool = False

    def to_dict(self) -> dict:
        return {"predictor": self.predictor, "intercept": self.intercept, "slope": self.slope,
                "auroc": self.auroc, "cv": self.cv, "separated": self.separated,
                "n_patients": len(self.patient_ids),
                "patients": {pid: float(m) for pid, m in zip(self.patient_ids, self.means)}}


def classify(name: str, patient_ids, means, outcomes, cost: str = "brier") -> ClassifierReport:
    """Logistic fit, in-sample ROC of the fitted probabilities, and LOOCV for one predictor."""
    means = np.asarray(means, dtype=float)
    outcomes = np.asarray(outcomes)
    model = logistic_fit(means, outcomes)
    roc = roc_curve(model.predict_proba(means), outcomes)
    cv = loocv_score(means, outcomes, cost)
    return ClassifierReport(name, tuple(patient_ids), means, outcomes, model.intercept,
                            model.slope, roc, roc.auroc, cv, model.separated)


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------

CLASS_SUFFIX = {"tumour": "t", "stroma": "s"}

# fitted parameter -> predictor stem, per model
PREDICTORS = {
    "thomas": {"D": "D", "daughter_density": "delta", "sigma": "sigma"},
    "matern": {"D": "Dm", "daughter_density": "deltam", "R": "Rm"},
    "void": {"D": "Dv", "R": "R"},
}


@dataclass(frozen=True)
class PipelineConfig:
    models: tuple = ("thomas", "void")
    boot: int = DEFAULT_BOOT
    seed: int = 0
    workers: int = 1
    cost: str = "brier"
    edge_correction: bool = True
    trunc: float | str = "auto"

    def __post_init__(self):
        for m in self.models:
            if m not in PREDICTORS:
                raise ValueError(f"unknown model {m!r}")
        if self.boot < 1:
            raise ValueError("boot must be >= 1")


@dataclass
class PipelineResult:
    image_fits: list
    bootstrap: dict  # predictor -> {outcome label -> BootstrapSummary}
    reports: dict  # predictor -> ClassifierReport
    warnings: list = field(default_factory=list)
    dropped: dict = field(default_factory=dict)


def _fit_unit(args):
    patient_id, image_id, cls, model, pattern, other, trunc, edge = args
    try:
        res = fit_model(pattern, FitConfig(model, t=trunc, edge_correction=edge), other=other)
    except (OptimizationError, ValueError) as exc:
        return {"patient": patient_id, "image": image_id, "class": cls, "model": model,
                "ok": False, "error": str(exc)}
    row = {"patient": patient_id, "image": image_id, "class": cls, "model": model, "ok": True,
           "converged": res.converged, "t": res.t, "loglik": res.loglik}
    row.update({k: v for k, v in res.params_hat.to_dict().items()})
    row.update(res.derived)
    return row


def fit_cohort(cohort: CohortDataset, cfg: PipelineConfig) -> list:
    """Fit every (image, class, model) unit; results come back in a fixed order."""
    units = []
    for pat in cohort.patients:
        for img in pat.images:
            for cls in ("tumour", "stroma"):
                pattern = getattr(img, cls)
                other = img.stroma if cls == "tumour" else img.tumour
                for model in cfg.models:
                    units.append((pat.id, img.id, cls, model, pattern, other,
                                  cfg.trunc, cfg.edge_correction))
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(_fit_unit, units, chunksize=1))
    return [_fit_unit(u) for u in units]


def run_pipeline(cohort: CohortDataset, cfg: PipelineConfig | None = None) -> PipelineResult:
    """Per-image fits, outcome-split bootstrap tables and per-predictor classifiers.

    Predictor values are averaged per patient over successful image fits.
    Bootstrap summaries are computed separately for outcome 1 ("died", ``d``)
    and outcome 0 ("alive", ``a``).
    """
    cfg = cfg or PipelineConfig()
    rows = fit_cohort(cohort, cfg)
    notes = []
    for r in rows:
        if not r["ok"]:
            notes.append(f"fit failed: patient {r['patient']} image {r['image']} "
                         f"{r['class']} {r['model']}: {r['error']}")
    for msg in notes:
        warnings.warn(msg, stacklevel=2)

    outcome = {p.id: p.outcome for p in cohort.patients}
    order = [p.id for p in cohort.patients]
    bootstrap, reports, dropped = {}, {}, {}
    master = RngStream(cfg.seed)
    stream = 0
    for model in cfg.models:
        for cls in ("tumour", "stroma"):
            for key, stem in PREDICTORS[model].items():
                name = f"{stem}_{CLASS_SUFFIX[cls]}"
                per_patient = {pid: [] for pid in order}
                for r in rows:
                    if r["ok"] and r["model"] == model and r["class"] == cls:
                        per_patient[r["patient"]].append(r[key])
                missing = [pid for pid in order if not per_patient[pid]]
                if missing:
                    dropped[name] = missing
                kept = [pid for pid in order if per_patient[pid]]
                tables = {}
                for label, flag in (("a", 0), ("d", 1)):
                    vals = [per_patient[pid] for pid in kept if outcome[pid] == flag]
                    stream += 1
                    if vals:
                        tables[label] = hierarchical_bootstrap(
                            vals, cfg.boot, master.child(stream), f"{name}^{label}")
                bootstrap[name] = tables
                means = np.array([np.mean(per_patient[pid]) for pid in kept])
                ys = np.array([outcome[pid] for pid in kept])
                try:
                    reports[name] = classify(name, kept, means, ys, cfg.cost)
                except ValueError as exc:
                    notes.append(f"classifier {name} unavailable: {exc}")
    return PipelineResult(rows, bootstrap, reports, notes, dropped)
