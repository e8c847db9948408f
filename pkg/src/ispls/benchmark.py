"""Simulation benchmark: tune, fit and score the integrative and baseline methods."""
from __future__ import annotations

import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Contrast, DataError, Model, MultiStudyData, PenaltySpec, build_cross_products
from .pls import DegenerateComponentError, NoSignalError, fit_pls1, latent_regress, zero_model
from .simulation import ScenarioSpec, gen_scenario, gen_test_data
from .solver import IsplsConfig, solve_directions, study_models
from .spls import SplsConfig, fit_spls
from .tuning import MU2_STAR_LEVELS, TuningGrid, cross_validate, default_grid, heldout_mspe, make_folds

ISPLS_METHODS = {
    "ispls_homo_m": (Model.HOMOGENEITY, Contrast.MAGNITUDE),
    "ispls_homo_s": (Model.HOMOGENEITY, Contrast.SIGN),
    "ispls_hetero_m": (Model.HETEROGENEITY, Contrast.MAGNITUDE),
    "ispls_hetero_s": (Model.HETEROGENEITY, Contrast.SIGN),
}
METHODS = ("meta_pls", "meta_spls", "pooled_spls") + tuple(ISPLS_METHODS)
ETA_GRID = tuple(round(0.1 * k, 1) for k in range(10))


@dataclass(frozen=True)
class BenchmarkSettings:
    """Tuning grids and solver caps shared by every benchmark fit."""

    folds: int = 5
    n_mu1: int = 10
    mu2_star: tuple = MU2_STAR_LEVELS
    eta_grid: tuple = ETA_GRID
    prediction: str = "rank1"
    outer_max_iter: int = 100
    outer_tol: float = 1e-4

    def solver_config(self, spec: PenaltySpec) -> IsplsConfig:
        return IsplsConfig(penalty=spec, outer_max_iter=self.outer_max_iter, outer_tol=self.outer_tol)


@dataclass
class MethodFit:
    method: str
    directions: np.ndarray  # (L, p)
    beta: np.ndarray  # (L, p, q)
    tuning: dict = field(default_factory=dict)
    converged: bool = True

    @property
    def selected(self) -> np.ndarray:
        return self.directions != 0


def _spls_cv(study, eta_grid, folds, seed) -> float:
    """Held-out MSPE choice of ``eta`` for one dataset; ties go to larger eta."""
    blocks = make_folds([study.n], folds, seed)[0]
    scores = np.zeros(len(eta_grid))
    for held in blocks:
        keep = np.setdiff1d(np.arange(study.n), held, assume_unique=True)
        train, test = study.subset(keep), study.subset(held)
        for i, eta in enumerate(eta_grid):
            try:
                fit = fit_spls(train.X, train.Y, SplsConfig(eta=eta))
                beta = fit.beta[0]
            except NoSignalError:
                beta = np.zeros((study.p, study.q))
            scores[i] += heldout_mspe(test, beta)
    best = np.flatnonzero(scores == scores.min())[-1]
    return float(eta_grid[best])


def _spls_fit(study, eta):
    try:
        fit = fit_spls(study.X, study.Y, SplsConfig(eta=eta))
    except NoSignalError:
        return np.zeros(study.p), np.zeros((study.p, study.q)), True
    return fit.directions[0], fit.beta[0], fit.converged


def _pls_fit(study):
    try:
        model = fit_pls1(study.X, study.Y)
    except (NoSignalError, DegenerateComponentError):
        model = zero_model(study.p, study.q)
    return model.w, model.beta


def ispls_spec(method: str, mu1=0.0, mu2=0.0) -> PenaltySpec:
    model, contrast = ISPLS_METHODS[method]
    return PenaltySpec(model=model, contrast=contrast, mu1=mu1, mu2=mu2)


def run_method(method: str, data: MultiStudyData, settings: BenchmarkSettings = BenchmarkSettings(), seed: int = 0) -> MethodFit:
    """Tune (by CV where the method has tuning parameters) and fit one method."""
    L, p, q = data.L, data.p, data.q
    if method == "meta_pls":
        parts = [_pls_fit(s) for s in data]
        return MethodFit(method, np.array([d for d, _ in parts]), np.array([b for _, b in parts]))
    if method == "meta_spls":
        dirs, betas, etas, ok = [], [], [], True
        for l, study in enumerate(data):
            eta = _spls_cv(study, settings.eta_grid, settings.folds, seed + l)
            d, b, conv = _spls_fit(study, eta)
            dirs.append(d)
            betas.append(b)
            etas.append(eta)
            ok &= conv
        return MethodFit(method, np.array(dirs), np.array(betas), {"eta": etas}, ok)
    if method == "pooled_spls":
        pooled = data.pooled()
        eta = _spls_cv(pooled, settings.eta_grid, settings.folds, seed)
        d, b, conv = _spls_fit(pooled, eta)
        return MethodFit(method, np.tile(d, (L, 1)), np.tile(b, (L, 1, 1)), {"eta": eta}, conv)
    if method in ISPLS_METHODS:
        template = ispls_spec(method)
        grid = default_grid(data, settings.folds, seed, settings.n_mu1)
        n2 = float(np.mean(data.sizes.astype(float) ** 2))
        grid = TuningGrid(grid.mu1_values, tuple(v / n2 for v in settings.mu2_star), grid.folds, grid.seed)
        cv = cross_validate(data, template, grid, settings.solver_config(template), settings.prediction)
        spec = template.with_tuning(*cv.best).resolved(L)
        fit = solve_directions(build_cross_products(data), settings.solver_config(spec))
        models = study_models(data, fit.directions, settings.prediction)
        beta = np.array([m.beta for m in models]).reshape(L, p, q)
        return MethodFit(method, fit.directions, beta, {"mu1": cv.best[0], "mu2": cv.best[1]}, fit.converged)
    raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")


def evaluate(fit: MethodFit, truth, test: MultiStudyData) -> dict:
    """Per-study sensitivity, specificity and test MSPE, plus their averages."""
    support = np.asarray(truth.support, dtype=bool)
    sel = fit.selected
    if sel.shape != support.shape or test.L != sel.shape[0] or test.p != sel.shape[1]:
        raise DataError("fit, truth and test data dimensions disagree")
    hit = (sel & support).sum(axis=1)
    n_sup = support.sum(axis=1)
    n_null = (~support).sum(axis=1)
    sens = np.where(n_sup > 0, hit / np.maximum(n_sup, 1), np.nan)
    spec = np.where(n_null > 0, (~sel & ~support).sum(axis=1) / np.maximum(n_null, 1), np.nan)
    mspe = np.array([heldout_mspe(study, fit.beta[l]) for l, study in enumerate(test)])
    return {
        "sensitivity": sens,
        "specificity": spec,
        "mspe": mspe,
        "mean_sensitivity": float(np.nanmean(sens)),
        "mean_specificity": float(np.nanmean(spec)),
        "mean_mspe": float(mspe.mean()),
    }


def item_seed(seed: int, scenario_index: int, replicate: int) -> int:
    """Seed for one (scenario, replicate) work item, independent of scheduling."""
    ss = np.random.SeedSequence([seed, scenario_index, replicate])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def _run_item(args):
    k, r, scenario, methods, settings, seed = args
    s = item_seed(seed, k, r)
    spec = replace(scenario, seed=s)
    data, truth = gen_scenario(spec)
    test = gen_test_data(spec, truth)
    out = []
    for method in methods:
        try:
            fit = run_method(method, data, settings, s)
            metrics = evaluate(fit, truth, test)
            out.append((method, fit, metrics, None))
        except (ValueError, ArithmeticError, RuntimeError) as exc:
            out.append((method, None, None, f"{type(exc).__name__}: {exc}"))
    return k, r, out


def default_workers() -> int:
    env = os.environ.get("ISPLS_THREADS")
    if env:
        return max(1, int(env))
    return 1


@dataclass
class BenchmarkReport:
    scenarios: list
    methods: list
    replicates: int
    seed: int
    rows: list  # long table: one dict per (scenario, replicate, method, study)
    loadings: list  # nonzero direction entries
    errors: list

    def cell(self, scenario_index: int, method: str, metric: str = "mspe") -> np.ndarray:
        """Per-replicate study-averaged values of ``metric`` (NaN for failed fits)."""
        vals = np.full(self.replicates, np.nan)
        acc: dict[int, list] = {}
        for row in self.rows:
            if row["scenario"] == scenario_index and row["method"] == method:
                acc.setdefault(row["replicate"], []).append(row[metric])
        for r, v in acc.items():
            vals[r] = float(np.mean(v))
        return vals

    def aggregate(self) -> list[dict]:
        out = []
        for k, sc in enumerate(self.scenarios):
            for m in self.methods:
                rec = {"scenario": k, "label": sc.scenario.value, "rho": sc.rho, "n": sc.n, "method": m}
                for metric in ("sensitivity", "specificity", "mspe"):
                    v = self.cell(k, m, metric)
                    v = v[~np.isnan(v)]
                    rec[f"{metric}_mean"] = float(v.mean()) if v.size else math.nan
                    rec[f"{metric}_sd"] = float(v.std(ddof=1)) if v.size > 1 else math.nan
                rec["failures"] = sum(1 for e in self.errors if e["scenario"] == k and e["method"] == m)
                out.append(rec)
        return out

    def long_csv(self) -> str:
        cols = ["scenario", "label", "rho", "n", "replicate", "method", "study",
                "sensitivity", "specificity", "mspe", "converged"]
        return _table(cols, self.rows)

    def aggregate_csv(self) -> str:
        rows = self.aggregate()
        cols = list(rows[0]) if rows else ["scenario"]
        return _table(cols, rows)

    def loadings_csv(self) -> str:
        return _table(["scenario", "replicate", "method", "study", "variable", "value"], self.loadings)

    def errors_csv(self) -> str:
        return _table(["scenario", "replicate", "method", "error"], self.errors)

    def to_bytes(self) -> bytes:
        """Deterministic serialization of every table."""
        parts = [self.long_csv(), self.aggregate_csv(), self.loadings_csv(), self.errors_csv()]
        return "\n".join(parts).encode()


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def _table(cols, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(cols) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(row[c]) for c in cols) + "\n")
    return buf.getvalue()


def run_benchmark(
    scenarios,
    methods=METHODS,
    replicates: int = 1,
    seed: int = 0,
    workers: int | None = None,
    settings: BenchmarkSettings = BenchmarkSettings(),
) -> BenchmarkReport:
    """Generate, tune, fit and score every (scenario, replicate, method).

    Each (scenario, replicate) item draws from its own seed so the report
    does not depend on the number of workers or completion order.
    """
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    scenarios = [s if isinstance(s, ScenarioSpec) else ScenarioSpec(**s) for s in scenarios]
    methods = list(methods)
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    workers = default_workers() if workers is None else max(1, int(workers))
    items = [(k, r, sc, methods, settings, seed) for k, sc in enumerate(scenarios) for r in range(replicates)]
    if workers == 1:
        results = [_run_item(it) for it in items]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_item, items))
    results.sort(key=lambda t: (t[0], t[1]))

    rows, loadings, errors = [], [], []
    for k, r, out in results:
        sc = scenarios[k]
        for method, fit, metrics, err in out:
            if err is not None:
                errors.append({"scenario": k, "replicate": r, "method": method, "error": err})
                continue
            for l in range(sc.L):
                rows.append({
                    "scenario": k, "label": sc.scenario.value, "rho": sc.rho, "n": sc.n,
                    "replicate": r, "method": method, "study": l,
                    "sensitivity": float(metrics["sensitivity"][l]),
                    "specificity": float(metrics["specificity"][l]),
                    "mspe": float(metrics["mspe"][l]),
                    "converged": bool(fit.converged),
                })
                for j in np.flatnonzero(fit.directions[l]):
                    loadings.append({"scenario": k, "replicate": r, "method": method, "study": l,
                                     "variable": int(j), "value": float(fit.directions[l, j])})
    return BenchmarkReport(scenarios, methods, replicates, seed, rows, loadings, errors)


def sign_test(a, b) -> float:
    """One-sided sign-test p-value for ``a < b`` pairwise (ties dropped)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ok = ~(np.isnan(a) | np.isnan(b))
    d = b[ok] - a[ok]
    wins = int(np.sum(d > 0))
    n = int(np.sum(d != 0))
    if n == 0:
        return 1.0
    return sum(math.comb(n, k) for k in range(wins, n + 1)) / 2.0 ** n


@dataclass
class OoiResult:
    method: str
    ooi: np.ndarray  # (L, p) selection frequency over resamples
    identified: np.ndarray  # (L, p) selection on the full data
    median_ooi: float
    mean_rmse: float
    tuning: dict


def _fit_with_tuning(method, data, tuning, settings):
    if method == "meta_pls":
        return run_method(method, data, settings)
    if method == "meta_spls":
        parts = [_spls_fit(s, eta) for s, eta in zip(data, tuning["eta"])]
        return MethodFit(method, np.array([d for d, _, _ in parts]), np.array([b for _, b, _ in parts]), tuning)
    if method == "pooled_spls":
        d, b, _ = _spls_fit(data.pooled(), tuning["eta"])
        return MethodFit(method, np.tile(d, (data.L, 1)), np.tile(b, (data.L, 1, 1)), tuning)
    spec = ispls_spec(method, tuning["mu1"], tuning["mu2"]).resolved(data.L)
    fit = solve_directions(build_cross_products(data), settings.solver_config(spec))
    models = study_models(data, fit.directions, settings.prediction)
    return MethodFit(method, fit.directions, np.array([m.beta for m in models]), tuning, fit.converged)


def ooi_study(
    data: MultiStudyData,
    methods=("meta_spls", "ispls_homo_m"),
    resamples: int = 100,
    split: float = 0.75,
    seed: int = 0,
    settings: BenchmarkSettings = BenchmarkSettings(),
) -> list[OoiResult]:
    """Observed occurrence index of each variable under random splits.

    Tuning parameters are chosen once on the full data; each resample
    refits on a ``split`` fraction of every study and scores RMSE on the rest.
    """
    if not 0 < split < 1:
        raise ValueError("split must lie in (0, 1)")
    if resamples < 1:
        raise ValueError("resamples must be >= 1")
    rng = np.random.default_rng(seed)
    splits = []
    for _ in range(resamples):
        train, test = [], []
        for study in data:
            perm = rng.permutation(study.n)
            k = min(max(2, int(round(split * study.n))), study.n - 1)
            train.append(study.subset(np.sort(perm[:k])))
            test.append(study.subset(np.sort(perm[k:])))
        splits.append((MultiStudyData(train), MultiStudyData(test)))

    out = []
    for method in methods:
        full = run_method(method, data, settings, seed)
        counts = np.zeros((data.L, data.p))
        rmse = []
        for train, test in splits:
            fit = _fit_with_tuning(method, train, full.tuning, settings)
            counts += fit.selected
            rmse.extend(math.sqrt(heldout_mspe(s, fit.beta[l])) for l, s in enumerate(test))
        ooi = counts / resamples
        ident = full.selected
        med = float(np.median(ooi[ident])) if ident.any() else math.nan
        out.append(OoiResult(method, ooi, ident, med, float(np.mean(rmse)), full.tuning))
    return out
