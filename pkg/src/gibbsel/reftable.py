"""Reference tables: iid (model, parameters, summaries) draws from the joint model.

Every record has its own generator stream seeded by ``(seed, 0, index)``, so a
table is a pure function of its inputs and records can be produced in any
order or in parallel.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed, effective_n_jobs

from gibbsel.exceptions import DegenerateScaleError, GibbselError
from gibbsel.lattice import LatticeShape, build_graph
from gibbsel.models import ModelSpec, check_models, sample_prior
from gibbsel.noise import apply_noise
from gibbsel.potts import PottsSpec, default_sweeps, swendsen_wang_sample
from gibbsel.summaries import SUMMARY_NAMES, geometric_summaries, kmeans_quantize

ROLES = ("train", "valid", "test")
CSV_HEADER = ("model", "alpha", "beta") + SUMMARY_NAMES
_RECORD_STREAM = 0
_ANCILLARY_STREAM = 1


class SimulationError(GibbselError, RuntimeError):
    def __init__(self, index, cause):
        super().__init__(f"record {index}: {type(cause).__name__}: {cause}")
        self.index = index


def record_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), _RECORD_STREAM, int(index)])


@dataclass(frozen=True, eq=False)
class Record:
    model: int
    noise_param: float
    beta: float
    latent: np.ndarray
    observed: np.ndarray
    summaries: np.ndarray


def simulate_record(models, shape, sweeps: int, seed: int, index: int) -> Record:
    """Draw model, parameters, latent field, observation and summaries for one record."""
    models = list(models)
    rng = record_rng(seed, index)
    weights = np.cumsum([m.weight for m in models])
    pick = min(int(np.searchsorted(weights, rng.random() * weights[-1], side="right")), len(models) - 1)
    spec = models[pick]
    noise_param, beta = sample_prior(spec, rng)
    graph = build_graph(shape, spec.graph)
    latent = swendsen_wang_sample(PottsSpec(graph, spec.n_colors, beta), sweeps, rng)
    observed = apply_noise(latent, spec.noise.channel(noise_param), rng)
    if np.issubdtype(observed.dtype, np.integer):
        discrete = observed
    else:
        discrete = kmeans_quantize(observed, spec.n_colors, rng)
    return Record(spec.index, noise_param, beta, latent, observed, geometric_summaries(discrete))


@dataclass(eq=False)
class ReferenceTable:
    model: np.ndarray
    params: np.ndarray
    stats: np.ndarray
    meta: dict = field(default_factory=dict)
    fields: np.ndarray | None = None

    def __post_init__(self):
        self.model = np.asarray(self.model, dtype=np.int64)
        self.params = np.asarray(self.params, dtype=float).reshape(-1, 2)
        self.stats = np.asarray(self.stats, dtype=np.int64).reshape(-1, 6)
        if not (len(self.model) == len(self.params) == len(self.stats)):
            raise ValueError("table columns have different lengths")

    def __len__(self):
        return len(self.model)

    @property
    def X(self) -> np.ndarray:
        return self.stats.astype(float)

    @property
    def seed(self):
        return self.meta.get("seed")

    @property
    def models(self) -> list[ModelSpec]:
        return [ModelSpec.from_dict(d) for d in self.meta.get("specs", [])]

    def ancillary(self, count: int) -> np.ndarray:
        """``count`` uniform columns drawn independently of models and fields."""
        if self.seed is None:
            raise ValueError("ancillary columns need a seeded table")
        rng = np.random.default_rng([int(self.seed), _ANCILLARY_STREAM, 0])
        return rng.random((len(self), count))

    def with_ancillary(self, count: int) -> np.ndarray:
        return np.hstack([self.X, self.ancillary(count)])

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for m, p, s in zip(self.model, self.params, self.stats):
                w.writerow([int(m), repr(float(p[0])), repr(float(p[1]))] + [int(v) for v in s])
        meta_path(path).write_text(json.dumps(self.meta, indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_csv(cls, path) -> "ReferenceTable":
        path = Path(path)
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader))
            if header != CSV_HEADER:
                raise ValueError(f"{path}: unexpected header {header}")
            rows = [row for row in reader if row]
        model = np.array([int(r[0]) for r in rows], dtype=np.int64)
        params = np.array([[float(r[1]), float(r[2])] for r in rows]).reshape(-1, 2)
        stats = np.array([[int(v) for v in r[3:]] for r in rows], dtype=np.int64).reshape(-1, 6)
        mp = meta_path(path)
        meta = json.loads(mp.read_text()) if mp.exists() else {}
        return cls(model, params, stats, meta)


def meta_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def _simulate_chunk(models, shape, sweeps, seed, indices, keep_fields):
    out = []
    for i in indices:
        try:
            rec = simulate_record(models, shape, sweeps, seed, i)
        except Exception as exc:
            raise SimulationError(i, exc) from exc
        out.append((rec.model, rec.noise_param, rec.beta, rec.summaries, rec.observed if keep_fields else None))
    return out


def generate_table(
    models,
    n: int,
    shape,
    sweeps: int | None = None,
    seed: int = 0,
    role: str = "train",
    keep_fields: bool = False,
    n_jobs: int = 1,
) -> ReferenceTable:
    """Simulate ``n`` records from the joint Bayesian model.

    ``sweeps`` defaults to :func:`gibbsel.potts.default_sweeps` for the lattice.
    """
    models = check_models(models)
    if n < 1:
        raise ValueError(f"table size must be positive, got {n}")
    if role not in ROLES:
        raise ValueError(f"role must be one of {ROLES}, got {role!r}")
    shape = shape if isinstance(shape, LatticeShape) else LatticeShape(*shape)
    if sweeps is None:
        sweeps = default_sweeps(shape.n_sites)
    workers = effective_n_jobs(n_jobs)
    if workers == 1:
        parts = [_simulate_chunk(models, shape.as_tuple(), sweeps, seed, np.arange(n), keep_fields)]
    else:
        chunks = np.array_split(np.arange(n), min(n, 4 * workers))
        parts = Parallel(n_jobs=n_jobs)(
            delayed(_simulate_chunk)(models, shape.as_tuple(), sweeps, seed, c, keep_fields) for c in chunks
        )
    rows = [r for part in parts for r in part]
    meta = {
        "seed": int(seed),
        "height": shape.height,
        "width": shape.width,
        "sweeps": int(sweeps),
        "role": role,
        "specs": [m.to_dict() for m in models],
    }
    table = ReferenceTable(
        model=[r[0] for r in rows],
        params=[[r[1], r[2]] for r in rows],
        stats=np.array([r[3] for r in rows]),
        meta=meta,
    )
    if keep_fields:
        table.fields = np.stack([r[4] for r in rows])
    return table


def scales(data, on_constant: str = "raise") -> np.ndarray:
    """Per-coordinate sample standard deviation (denominator ``n - 1``).

    ``on_constant="one"`` substitutes 1 for constant coordinates instead of
    raising :class:`DegenerateScaleError`.
    """
    X = data.X if isinstance(data, ReferenceTable) else np.asarray(data, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("scales need at least two records")
    s = X.std(axis=0, ddof=1)
    constant = ~(s > 0)
    if constant.any():
        if on_constant == "one":
            s = np.where(constant, 1.0, s)
        else:
            raise DegenerateScaleError(f"constant coordinates {np.nonzero(constant)[0].tolist()}")
    return s


def check_disjoint(a, b) -> None:
    """Refuse to evaluate a table against another generated from the same stream."""
    if isinstance(a, ReferenceTable) and isinstance(b, ReferenceTable):
        if a is b or (a.seed is not None and a.seed == b.seed and a.meta.get("specs") == b.meta.get("specs")):
            raise ValueError("evaluation table shares its generator stream with the training table")
