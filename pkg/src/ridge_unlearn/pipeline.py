"""End-to-end commands: calibrate, unlearn, sensitivity maps, sweeps, audits.

Every command takes an :class:`ExperimentConfig` (or explicit paths for the
audit), writes its outputs under ``config.out_dir`` and returns the report
dictionary that is also saved as ``report.json``.  Reports contain no
timing information so that reruns are byte-identical; wall time goes to
``run_meta.json``.

Random streams are derived from ``RngSeed(config.seed)``: learning run r
uses ``derive(0, r)``, the unlearning phase of (run r, point i, epsilon
slot e, horizon slot h) uses ``derive(1, r, i, e, h)``, and the empirical
sensitivity overlay for point i uses ``derive(2, i)``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import time
from pathlib import Path
from typing import Optional

import numpy as np

from . import csvio
from .accounting import (
    AccountingInputs,
    CalibrationResult,
    PrivacyBudget,
    calibrate_sigma,
    epsilon_gdp,
    gdp_mu,
    uniform_baseline_profile,
)
from .audit import RunRepresentations, audit, gdp_tradeoff
from .config import ConfigError, ExperimentConfig
from .errors import NumericalError
from .langevin import TrajectoryConfig, empirical_sensitivity_sweep, run_learn, run_unlearn
from .numerics import RngSeed
from .ridge import (
    Dataset,
    RidgeSpec,
    build_spec,
    exact_solution,
    loo_prediction,
    pointwise_gradient_norm,
    retain_contractions,
)
from .sensitivity import SensitivityProfile, sensitivity_map

UNIFORM = "uniform"


@dataclasses.dataclass
class Experiment:
    config: ExperimentConfig
    data: Dataset
    test: Optional[Dataset]
    spec: RidgeSpec
    theta0: np.ndarray
    budget: PrivacyBudget
    _contractions: Optional[np.ndarray] = dataclasses.field(default=None, repr=False)

    @property
    def seed(self) -> RngSeed:
        return RngSeed(self.config.seed)

    def trajectory(self, stream: RngSeed, K: Optional[int] = None) -> TrajectoryConfig:
        cfg = self.config
        return TrajectoryConfig(
            T=cfg.T, K=cfg.K if K is None else K, sigma_learn=cfg.sigma_learn,
            sigma_unlearn=0.0, theta0=self.theta0, seed=stream,
        )

    def contraction(self, point: Optional[int]) -> float:
        """Retain-aware contraction for ``point``; None means the worst point."""
        if self._contractions is None:
            self._contractions = retain_contractions(self.spec, self.data)
        if point is None:
            return float(self._contractions.max())
        return float(self._contractions[point])

    def accounting(self, profile: SensitivityProfile, K: Optional[int] = None):
        return AccountingInputs(
            profile, self.contraction(profile.point_index), self.spec.eta,
            self.config.K if K is None else K, self.config.sigma_learn,
        )

    def budget_for(self, epsilon: float) -> PrivacyBudget:
        return dataclasses.replace(self.budget, epsilon=epsilon)


def _load_dataset(x_path, y_path, append_bias) -> Dataset:
    X = csvio.read_matrix(x_path)
    Y = csvio.read_matrix(y_path)
    if X.shape[0] != Y.shape[0]:
        raise ConfigError(
            f"row-count mismatch: {x_path} has {X.shape[0]} rows, {y_path} has {Y.shape[0]}"
        )
    data = Dataset(X, Y)
    return data.with_bias() if append_bias else data


def prepare(config: ExperimentConfig) -> Experiment:
    data = _load_dataset(config.X, config.Y, config.append_bias)
    test = None
    if config.X_test is not None:
        test = _load_dataset(config.X_test, config.Y_test, config.append_bias)
        if test.p != data.p or test.d != data.d:
            raise ConfigError("test set dimensions differ from the training set")
    spec = build_spec(data, config.lam, conservative_m=config.conservative_m)
    delta = config.delta if config.delta is not None else 1.0 / data.n
    budget = PrivacyBudget(config.epsilon, delta, config.delta_s)
    return Experiment(config, data, test, spec, np.zeros((data.p, data.d)), budget)


def is_one_hot(Y: np.ndarray) -> bool:
    return (
        Y.shape[1] >= 2
        and bool(np.all((Y == 0) | (Y == 1)))
        and bool(np.all(Y.sum(axis=1) == 1))
    )


def evaluate(theta, data: Dataset, task: str):
    """(metric name, value): argmax accuracy for one-hot targets, else MSE."""
    pred = data.X @ theta
    if task == "classification" or (task == "auto" and is_one_hot(data.Y)):
        return "accuracy", float(np.mean(pred.argmax(axis=1) == data.Y.argmax(axis=1)))
    return "mse", float(np.mean((pred - data.Y) ** 2))


def select_points(exp: Experiment) -> list:
    cfg = exp.config
    if cfg.points is not None:
        return [exp.data.check_index(int(i)) for i in cfg.points]
    if cfg.point_strategy == "all":
        return list(range(exp.data.n))
    # rank by gradient norm at the end of one reference training run
    record = run_learn(exp.spec, exp.data, exp.trajectory(RngSeed(cfg.reference_seed)))
    norms = [pointwise_gradient_norm(exp.data, record.final_theta, i) for i in range(exp.data.n)]
    order = np.argsort(norms, kind="stable")
    picks = [int(order[round(q * (exp.data.n - 1))]) for q in cfg.quantiles]
    return list(dict.fromkeys(picks))


def _finish(exp_or_cfg, command, records, started, extra=None):
    cfg = exp_or_cfg.config if isinstance(exp_or_cfg, Experiment) else exp_or_cfg
    report = {
        "command": command,
        "config": cfg.to_dict(),
        "config_hash": cfg.digest(),
        "seed": cfg.seed,
        "records": records,
    }
    if extra:
        report.update(extra)
    _write_json(Path(cfg.out_dir) / "report.json", report)
    _write_json(Path(cfg.out_dir) / "run_meta.json", {"wall_time_s": time.perf_counter() - started})
    return report


def _write_json(path: Path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _calibration_record(point, epsilon, res: CalibrationResult, budget: PrivacyBudget):
    return {
        "point": point,
        "epsilon": epsilon,
        "delta": budget.delta,
        "delta_s": budget.delta_s,
        "sigma_unlearn": res.sigma_unlearn,
        "mu_achieved": res.mu_achieved,
        "epsilon_achieved": res.epsilon_achieved,
    }


def _require_K(exp):
    if exp.config.K < 1:
        raise ConfigError("K: calibration needs an unlearning horizon K >= 1")


def _profiles(exp: Experiment, points):
    cfg = exp.config
    smap = sensitivity_map(
        exp.spec, exp.data, exp.theta0, cfg.sigma_learn, cfg.T, exp.budget.delta_s, points
    )
    return {int(i): smap.profile(r, exp.budget.delta_s) for r, i in enumerate(smap.points)}


def cmd_calibrate(config: ExperimentConfig) -> dict:
    """Per-point sigma_unlearn for every epsilon of the grid (no simulation)."""
    started = time.perf_counter()
    exp = prepare(config)
    _require_K(exp)
    points = select_points(exp)
    profiles = _profiles(exp, points)
    if config.baseline_C is not None:
        profiles[UNIFORM] = uniform_baseline_profile(config.baseline_C, exp.spec.eta, config.T)
    records = []
    for epsilon in config.epsilons or [config.epsilon]:
        budget = exp.budget_for(epsilon)
        for point, profile in profiles.items():
            res = calibrate_sigma(exp.accounting(profile), budget)
            records.append(_calibration_record(point, epsilon, res, budget))
    keys = ["point", "epsilon", "delta", "delta_s", "sigma_unlearn", "mu_achieved", "epsilon_achieved"]
    csvio.write_rows(
        Path(config.out_dir) / "calibration.csv", keys, [[r[k] for k in keys] for r in records]
    )
    return _finish(exp, "calibrate", records, started)


def certify(exp: Experiment, profile: SensitivityProfile, epsilon=None, K=None) -> dict:
    """Calibrated certificate for one point.

    With K = 0 no noise can be added; the certificate then reports the
    guarantee the learning noise alone provides.
    """
    budget = exp.budget if epsilon is None else exp.budget_for(epsilon)
    inputs = exp.accounting(profile, K)
    if inputs.K == 0:
        mu = gdp_mu(inputs, 0.0)
        res = CalibrationResult(0.0, mu, epsilon_gdp(mu, budget.delta_m), profile.point_index)
    else:
        res = calibrate_sigma(inputs, budget)
    return {
        "point": profile.point_index,
        "epsilon": budget.epsilon,
        "epsilon_achieved": res.epsilon_achieved,
        "delta": budget.delta,
        "delta_s": budget.delta_s,
        "delta_m": budget.delta_m,
        "mu": res.mu_achieved,
        "sigma_unlearn": res.sigma_unlearn,
        "sigma_learn": exp.config.sigma_learn,
        "T": exp.config.T,
        "K": inputs.K,
        "eta": exp.spec.eta,
        "c": inputs.c,
        "certified": bool(res.epsilon_achieved <= budget.epsilon),
    }


def cmd_unlearn(config: ExperimentConfig, point: int) -> dict:
    """Learn on D, calibrate for ``point``, unlearn it; save theta and certificate."""
    started = time.perf_counter()
    exp = prepare(config)
    point = exp.data.check_index(point)
    try:
        record = run_learn(exp.spec, exp.data, exp.trajectory(exp.seed.derive(0, 0)))
    except NumericalError as exc:
        raise NumericalError(f"learning phase: {exc}") from exc
    profile = _profiles(exp, [point])[point]
    cert = certify(exp, profile)
    try:
        theta = run_unlearn(
            exp.spec, exp.data, record.final_theta, point, config.K,
            cert["sigma_unlearn"], exp.seed.derive(1, 0, point, 0, 0),
        )
    except NumericalError as exc:
        raise NumericalError(f"unlearning phase: {exc}") from exc
    out = Path(config.out_dir)
    csvio.write_matrix(out / "theta.csv", theta)
    _write_json(out / "certificate.json", cert)
    extra = {"certificate": cert}
    if exp.test is not None:
        name, value = evaluate(theta, exp.test, config.task)
        extra["test_" + name] = value
    return _finish(exp, "unlearn", [cert], started, extra)


def cmd_sensitivity_map(config: ExperimentConfig) -> dict:
    """Bound matrix sorted by final bound, plus an optional empirical overlay."""
    started = time.perf_counter()
    exp = prepare(config)
    points = config.points if config.points is not None else range(exp.data.n)
    smap = sensitivity_map(
        exp.spec, exp.data, exp.theta0, config.sigma_learn, config.T,
        exp.budget.delta_s, points, sort=True,
    )
    out = Path(config.out_dir)
    header = ["point"] + [f"k{k}" for k in range(config.T)]
    csvio.write_rows(
        out / "sensitivity_map.csv", header,
        [[int(i), *row] for i, row in zip(smap.points, smap.bounds)],
    )
    bounds_of = {int(i): row for i, row in zip(smap.points, smap.bounds)}
    records = []
    overlay_rows = []
    for i in config.overlay_points:
        i = exp.data.check_index(int(i))
        bound = bounds_of.get(i)
        if bound is None:
            bound = sensitivity_map(
                exp.spec, exp.data, exp.theta0, config.sigma_learn, config.T,
                exp.budget.delta_s, [i],
            ).bounds[0]
        traj = exp.trajectory(exp.seed.derive(2, i))
        emp = empirical_sensitivity_sweep(exp.spec, exp.data, traj, i, config.overlay_runs)
        for r in range(emp.shape[0]):
            for k in range(config.T):
                overlay_rows.append([i, r, k, emp[r, k], bound[k]])
        records.append({
            "point": i,
            "pair_coverage": float(np.mean(emp <= bound)),
            "run_coverage": float(np.mean(np.all(emp <= bound, axis=1))),
        })
    if overlay_rows:
        csvio.write_rows(out / "sensitivity_overlay.csv", ["point", "run", "k", "empirical", "bound"], overlay_rows)
    extra = {"points_sorted": [int(i) for i in smap.points]}
    return _finish(exp, "sensitivity-map", records, started, extra)


def cmd_sweep(config: ExperimentConfig) -> dict:
    """Learn / calibrate / unlearn cycles over a grid of epsilons and horizons."""
    started = time.perf_counter()
    exp = prepare(config)
    points = select_points(exp)
    profiles = _profiles(exp, points)
    methods = [("per_instance", i, profiles[i]) for i in points]
    if config.baseline_C is not None:
        base = uniform_baseline_profile(config.baseline_C, exp.spec.eta, config.T)
        methods += [(UNIFORM, i, base) for i in points]
    epsilons = config.epsilons or [config.epsilon]
    horizons = config.Ks or [config.K]
    if min(horizons) < 1:
        raise ConfigError("Ks: every unlearning horizon must be >= 1")
    eval_set = exp.test if exp.test is not None else exp.data

    certs = {}
    for method, i, profile in methods:
        for e, eps in enumerate(epsilons):
            for h, K in enumerate(horizons):
                certs[method, i, e, h] = certify(exp, profile, eps, K)

    scores = {key: [] for key in certs}
    metric = None
    for r in range(config.runs):
        learned = run_learn(exp.spec, exp.data, exp.trajectory(exp.seed.derive(0, r))).final_theta
        for (method, i, e, h), cert in certs.items():
            stream = exp.seed.derive(1, r, i, e, h)
            theta = run_unlearn(exp.spec, exp.data, learned, i, horizons[h], cert["sigma_unlearn"], stream)
            metric, value = evaluate(theta, eval_set, config.task)
            scores[method, i, e, h].append(value)

    records = []
    for (method, i, e, h), cert in certs.items():
        vals = np.array(scores[method, i, e, h])
        records.append({
            "method": method,
            "point": i,
            "epsilon": epsilons[e],
            "K": horizons[h],
            "sigma_unlearn": cert["sigma_unlearn"],
            "mu": cert["mu"],
            "epsilon_achieved": cert["epsilon_achieved"],
            "metric": metric,
            "metric_mean": float(vals.mean()),
            "metric_std": float(vals.std()),
            "runs": int(vals.size),
        })
    out = Path(config.out_dir)
    keys = ["method", "point", "epsilon", "K", "sigma_unlearn", "mu", "epsilon_achieved",
            "metric", "metric_mean", "metric_std", "runs"]

    def dump(name, rows):
        csvio.write_rows(out / name, keys, [[r[k] for k in keys] for r in rows])

    dump("sweep.csv", records)
    dump("privacy_utility.csv", [r for r in records if r["K"] == horizons[0]])
    dump("k_ablation.csv", [r for r in records if r["epsilon"] == epsilons[0]])
    csvio.write_rows(
        out / "sigma_per_instance.csv", ["method", "point", "epsilon", "sigma_unlearn"],
        [[r["method"], r["point"], r["epsilon"], r["sigma_unlearn"]]
         for r in records if r["K"] == horizons[0]],
    )
    extra = {"evaluated_on": "test" if exp.test is not None else "train"}
    return _finish(exp, "sweep", records, started, extra)


@dataclasses.dataclass
class AuditConfig:
    """Minimal config object so audit reports share the report layout."""

    p_path: str
    q_path: Optional[str]
    delta: float
    grid_size: int = 1000
    seed: int = 0
    out_dir: str = "out"
    label_column: int = 0

    def to_dict(self):
        return dataclasses.asdict(self)

    def digest(self):
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


def cmd_audit(config: AuditConfig) -> dict:
    """Distinguisher, trade-off curve, AUC, GDP fit and empirical epsilon."""
    started = time.perf_counter()
    if config.q_path is None:
        P, Q = csvio.read_labeled_groups(config.p_path, config.label_column)
    else:
        P, Q = csvio.read_matrix(config.p_path), csvio.read_matrix(config.q_path)
    result = audit(RunRepresentations(P, Q), config.delta, RngSeed(config.seed), config.grid_size)
    curve = result.curve
    csvio.write_rows(
        Path(config.out_dir) / "tradeoff_curve.csv", ["alpha", "beta", "beta_gdp_fit"],
        zip(curve.alphas, curve.betas, gdp_tradeoff(curve.alphas, result.fit.mu_hat)),
    )
    record = {
        "auc": result.auc,
        "mu_hat": result.fit.mu_hat,
        "fit_mse": result.fit.fit_mse,
        "epsilon_hat": result.fit.epsilon_hat,
        "delta": config.delta,
        "saturated": result.fit.saturated,
        "runs_p": int(len(P)),
        "runs_q": int(len(Q)),
    }
    return _finish(config, "audit", [record], started)


def cmd_loo_check(config: ExperimentConfig) -> dict:
    """Sherman-Morrison leave-one-out predictions against explicit retraining."""
    started = time.perf_counter()
    exp = prepare(config)
    records = []
    for i in range(exp.data.n):
        rec = {"point": i}
        try:
            fast = loo_prediction(exp.spec, exp.data, i)
            reduced = exp.data.without(i)
            slow = exp.data.X[i] @ exact_solution(build_spec(reduced, config.lam), reduced)
            rec["relative_deviation"] = float(
                np.linalg.norm(fast - slow) / max(np.linalg.norm(slow), 1e-300)
            )
        except NumericalError as exc:
            rec["error"] = str(exc)
        records.append(rec)
    devs = [r["relative_deviation"] for r in records if "relative_deviation" in r]
    max_dev = max(devs) if devs else None
    csvio.write_rows(
        Path(config.out_dir) / "loo_check.csv", ["point", "relative_deviation", "error"],
        [[r["point"], r.get("relative_deviation", ""), r.get("error", "")] for r in records],
    )
    extra = {"max_relative_deviation": max_dev, "passed": max_dev is not None and max_dev < 1e-6
             and all("error" not in r for r in records)}
    return _finish(exp, "loo-check", records, started, extra)
