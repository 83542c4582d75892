"""End-to-end model-choice experiments driven by a JSON configuration.

A run simulates independent train, validation and test tables, calibrates
one kNN classifier per statistic subset, fits the adaptive classifier on the
validation table and reports every error on the test table.
"""
from __future__ import annotations

import contextlib
import json
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from gibbsel.adaptive import AdaptiveModelChoice
from gibbsel.exceptions import GibbselError, StageError
from gibbsel.knn import KnnModelChoice, calibrate_k, prior_error_rate
from gibbsel.local_error import NadarayaWatson, error_surface
from gibbsel.models import ModelSpec, check_models
from gibbsel.potts import default_sweeps
from gibbsel.reftable import ROLES, ReferenceTable, generate_table
from gibbsel.summaries import SUBSETS, subset_columns

SCHEMA_VERSION = 1
PRESETS = ("exp1", "exp2", "exp3")
DEFAULT_SIZES = {"train": 20_000, "valid": 10_000, "test": 10_000}


@contextlib.contextmanager
def stage(name: str):
    """Re-raise any failure inside the block as a :class:`StageError`."""
    try:
        yield
    except StageError:
        raise
    except (GibbselError, ValueError, ArithmeticError, OSError, KeyError, TypeError) as exc:
        raise StageError(name, exc) from exc


@dataclass
class ExperimentConfig:
    """Settings of one run.

    ``sweeps=None`` uses the default sweep count for the lattice; an empty
    ``k_grid`` uses the default grid; ``ancillary=0`` skips the
    ancillary-coordinate study.
    """

    models: list
    height: int = 32
    width: int = 32
    sweeps: int | None = None
    sizes: dict = field(default_factory=lambda: dict(DEFAULT_SIZES))
    seeds: dict = field(default_factory=lambda: {"train": 1, "valid": 2, "test": 3})
    stats: list = field(default_factory=lambda: ["2d", "4d", "6d"])
    k_grid: list = field(default_factory=list)
    ancillary: int = 0
    surface_grid: int = 64

    def __post_init__(self):
        self.models = check_models(m if isinstance(m, ModelSpec) else ModelSpec.from_dict(m) for m in self.models)
        if self.height < 1 or self.width < 1:
            raise ValueError("lattice dimensions must be positive")
        for what in (self.sizes, self.seeds):
            if set(what) != set(ROLES):
                raise ValueError(f"expected keys {ROLES}, got {sorted(what)}")
        if any(int(n) < 1 for n in self.sizes.values()):
            raise ValueError("table sizes must be positive")
        if len(set(self.seeds.values())) != 3:
            raise ValueError("train, valid and test seeds must differ")
        for s in self.stats:
            if s not in SUBSETS:
                raise ValueError(f"unknown statistic subset {s!r}")
        if len(set(self.stats)) != len(self.stats) or not self.stats:
            raise ValueError("stats must be a non-empty list of distinct subsets")
        if self.sweeps is not None and self.sweeps < 1:
            raise ValueError("sweeps must be positive")
        if self.ancillary < 0 or self.surface_grid < 2:
            raise ValueError("ancillary must be >= 0 and surface_grid >= 2")

    @property
    def n_sweeps(self) -> int:
        return default_sweeps(self.height * self.width) if self.sweeps is None else int(self.sweeps)

    def to_dict(self) -> dict:
        return {
            "height": self.height,
            "width": self.width,
            "sweeps": self.n_sweeps,
            "models": [m.to_dict() for m in self.models],
            "sizes": {r: int(self.sizes[r]) for r in ROLES},
            "seeds": {r: int(self.seeds[r]) for r in ROLES},
            "stats": list(self.stats),
            "k_grid": [int(k) for k in self.k_grid],
            "ancillary": int(self.ancillary),
            "surface_grid": int(self.surface_grid),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {"models", "height", "width", "sweeps", "sizes", "seeds", "stats", "k_grid", "ancillary", "surface_grid"}
        unknown = set(d) - known - {"name", "description"}
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        return cls(**{k: v for k, v in d.items() if k in known})


def load_config(source, **overrides) -> ExperimentConfig:
    """Read a config from a preset name (``exp1``..``exp3``) or a JSON path.

    ``None`` overrides are ignored; a ``sizes`` override may name only some roles.
    """
    sizes = {r: n for r, n in (overrides.pop("sizes", None) or {}).items() if n is not None}
    if str(source) in PRESETS:
        text = resources.files("gibbsel.presets").joinpath(f"{source}.json").read_text()
    else:
        text = Path(source).read_text()
    d = json.loads(text)
    d.update({k: v for k, v in overrides.items() if v is not None})
    if sizes:
        d["sizes"] = {**DEFAULT_SIZES, **d.get("sizes", {}), **sizes}
    return ExperimentConfig.from_dict(d)


def _write_curve(path, grid, errors):
    lines = ["k,error"] + [f"{k},{e!r}" for k, e in zip(grid, errors)]
    Path(path).write_text("\n".join(lines) + "\n")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def calibrated_classifier(train: ReferenceTable, valid: ReferenceTable, stats, k_grid=None, X_train=None, X_valid=None):
    """Calibrate k on the validation table and refit; returns ``(clf, calibration)``."""
    X_train = train.X if X_train is None else X_train
    X_valid = valid.X if X_valid is None else X_valid
    cal = calibrate_k(X_train, train.model, X_valid, valid.model, stats=stats, k_grid=k_grid or None)
    return KnnModelChoice(k=cal.k, stats=stats).fit(X_train, train.model), cal


def adaptive_summary(ada: AdaptiveModelChoice, test: ReferenceTable, names) -> dict:
    _, lam = ada.predict_with_choice(test.X)
    shares = np.bincount(lam - 1, minlength=len(names)) / len(lam)
    pred = ada.predict(test.X)
    out = {
        "test_error": float(np.mean(pred != test.model)),
        "shares": {n: float(s) for n, s in zip(names, shares)},
        "trait_counts": {str(int(c)): int(n) for c, n in zip(*np.unique(ada.trait_, return_counts=True))},
    }
    if ada.lda_ is not None:
        out["lda"] = {
            "mean": ada.lda_.mean_.tolist(),
            "scale": ada.lda_.scale_.tolist(),
            "axes": ada.lda_.components_.T.tolist(),
            "eigenvalues": ada.lda_.eigenvalues_.tolist(),
        }
        out["bandwidths"] = {n: s.bandwidth_.tolist() for n, s in zip(names, ada.surfaces_)}
    return out


def run_experiment(config: ExperimentConfig, out_dir=None, n_jobs: int = 1, tables=None) -> dict:
    """Run the full pipeline; writes ``report.json`` and CSV artifacts to ``out_dir`` if given.

    ``tables`` may supply pre-generated ``{"train", "valid", "test"}`` tables.
    The report excludes wall-clock times, which go to ``runtimes.json``.
    """
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    runtimes = {}
    report = {"schema_version": SCHEMA_VERSION, "config": config.to_dict()}
    shape = (config.height, config.width)

    t0 = time.perf_counter()
    with stage("gen"):
        if tables is None:
            tables = {
                r: generate_table(config.models, int(config.sizes[r]), shape, config.n_sweeps, int(config.seeds[r]), r, n_jobs=n_jobs)
                for r in ROLES
            }
        train, valid, test = (tables[r] for r in ROLES)
        report["tables"] = {
            r: {"n": len(t), "seed": t.seed, "model_counts": {str(int(m)): int((t.model == m).sum()) for m in np.unique(t.model)}}
            for r, t in tables.items()
        }
        if out is not None:
            for r, t in tables.items():
                t.to_csv(out / f"{r}.csv")
    runtimes["gen"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    classifiers = {}
    with stage("calibrate"):
        subsets = {}
        for name in sorted(config.stats, key=lambda s: SUBSETS[s]):
            clf, cal = calibrated_classifier(train, valid, name, config.k_grid)
            classifiers[name] = clf
            subsets[name] = {**cal.to_dict(), "test_error": prior_error_rate(clf, test.X, test.model)}
            if out is not None:
                _write_curve(out / f"curve_{name}.csv", cal.grid, cal.errors)
        report["subsets"] = subsets
    runtimes["calibrate"] = time.perf_counter() - t0

    if config.ancillary:
        t0 = time.perf_counter()
        with stage("ancillary"):
            a = int(config.ancillary)
            cols = subset_columns("2d") + list(range(6, 6 + a))
            clf, cal = calibrated_classifier(
                train, valid, cols, config.k_grid, train.with_ancillary(a), valid.with_ancillary(a)
            )
            base = subsets.get("2d") or {
                "test_error": prior_error_rate(calibrated_classifier(train, valid, "2d", config.k_grid)[0], test.X, test.model)
            }
            report["ancillary"] = {
                "count": a,
                **cal.to_dict(),
                "test_error": prior_error_rate(clf, test.with_ancillary(a), test.model),
                "baseline_2d_test_error": base["test_error"],
            }
            if out is not None:
                _write_curve(out / f"curve_2d_ancillary{a}.csv", cal.grid, cal.errors)
        runtimes["ancillary"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    names = list(classifiers)
    with stage("adaptive"):
        ada = AdaptiveModelChoice([classifiers[n] for n in names]).fit(valid.X, valid.model)
        report["adaptive"] = adaptive_summary(ada, test, names)
    runtimes["adaptive"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    with stage("local-error"):
        local = {}
        if ada.lda_ is not None:
            projection = lambda X: ada.project(X)[:, :2]  # noqa: E731
            for name, clf in classifiers.items():
                surf = error_surface(clf, test.X, test.model, projection, config.surface_grid, provenance={"classifier": name, "projection": "lda"})
                err = subsets[name]["test_error"]
                local[name] = {
                    "bandwidth": surf.bandwidth.tolist(),
                    "mean_tau": float(surf.tau.mean()),
                    "disintegration_gap": float(abs(surf.tau.mean() - err)),
                    "low_support_share": float(1 - surf.grid_support.mean()),
                }
                if out is not None:
                    surf.to_csv(out / f"surface_{name}.csv")
        report["local_error"] = local
        report["plug_in_agreement"] = plug_in_agreement(classifiers[names[0]], test)
    runtimes["local-error"] = time.perf_counter() - t0

    if out is not None:
        (out / "report.json").write_text(_dump(report))
        (out / "runtimes.json").write_text(_dump(runtimes))
    report["runtimes"] = runtimes
    return report


def plug_in_agreement(clf: KnnModelChoice, test: ReferenceTable, max_points: int = 2000) -> dict:
    """Compare the vote-based local error with the kernel estimate on the classifier's own statistics.

    Reported only; evaluated on the first ``max_points`` test records.
    """
    X, y = test.X[:max_points], test.model[:max_points]
    proba = clf.predict_proba(X)
    plug = 1.0 - proba.max(axis=1)
    S = X[:, clf.columns_]
    delta = (clf.predict(X) != y).astype(float)
    nw = NadarayaWatson().fit(S, delta).predict(S)
    return {"n": len(y), "mean_abs_difference": float(np.mean(np.abs(plug - nw)))}

