"""Replicated sweeps over model parameters, with tidy CSV output.

Every (sweep point, replicate) unit draws its own seed from the master seed,
so results do not depend on how units are spread over worker processes.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .metrics import misclassification, nmi
from .models import expected_degrees, fig1_spec, fig2_spec, mean_matrix, sample_sbm
from .pipelines import PipelineConfig, run_pipeline
from .regularization import concentration_error, regularize
from .types import SbmSpec

KINDS = ("fig1_nmi_vs_b", "fig2_nmi_vs_n0", "fig2_concentration_vs_tau", "custom_sweep")

DEFAULTS = {
    "fig1_nmi_vs_b": {
        "param": "b",
        "grid": [0.25, 0.5, 1.0, 2.0, 4.0, 8.0],
        "replicates": 15,
        "pipelines": ["sc1", "scrre"],
        "taus": [3.0],
    },
    "fig2_nmi_vs_n0": {
        "param": "n0",
        "grid": [50, 100, 200, 300, 400, 500],
        "replicates": 15,
        "pipelines": ["scrre"],
        "taus": [1.0, 1.2, 1.4, math.inf],
    },
    "fig2_concentration_vs_tau": {
        "param": "tau",
        "grid": [1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5, 2.75, 3.0],
        "replicates": 3,
        "pipelines": [],
        "taus": [],
        "n0": 500,
    },
    "custom_sweep": {
        "param": "scale",
        "grid": [1.0],
        "replicates": 1,
        "pipelines": ["scrre"],
        "taus": [3.0],
    },
}

COLUMNS = [
    "kind",
    "point",
    "param",
    "value",
    "replicate",
    "pipeline",
    "tau",
    "mode",
    "nmi",
    "mis_bar",
    "mis_inf",
    "rel_err",
    "seed",
    "error",
    "time_s",
]
TIMING_COLUMNS = ("time_s",)


def _tau_text(t):
    return "inf" if math.isinf(float(t)) else repr(float(t))


def _parse_tau(t):
    return math.inf if str(t).lower() in ("inf", "infinity") else float(t)


@dataclass
class ExperimentConfig:
    kind: str
    grid: list = None
    replicates: int = None
    pipelines: list = None
    taus: list = None
    master_seed: int = 0
    output_dir: str = None
    model: dict = field(default_factory=dict)
    param: str = None
    n0: int = None
    restarts: int = 10

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}; choose from {KINDS}")
        base = DEFAULTS[self.kind]
        for key in ("grid", "replicates", "pipelines", "taus", "param"):
            if getattr(self, key) is None:
                setattr(self, key, list(base[key]) if isinstance(base[key], list) else base[key])
        if self.n0 is None:
            self.n0 = base.get("n0")
        self.taus = [_parse_tau(t) for t in self.taus]
        if not self.grid:
            raise ValueError("grid must be nonempty")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.kind == "custom_sweep" and not self.model:
            raise ValueError("custom_sweep needs a model template")

    def to_dict(self):
        return {
            "kind": self.kind,
            "grid": list(self.grid),
            "replicates": self.replicates,
            "pipelines": list(self.pipelines),
            "taus": [_tau_text(t) for t in self.taus],
            "master_seed": self.master_seed,
            "output_dir": self.output_dir,
            "model": self.model,
            "param": self.param,
            "n0": self.n0,
            "restarts": self.restarts,
        }

    @classmethod
    def from_dict(cls, obj):
        keys = cls.__dataclass_fields__.keys()
        return cls(**{k: v for k, v in obj.items() if k in keys})


def derive_seed(master_seed, point, replicate):
    """63-bit seed for one (point, replicate) unit."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(point), int(replicate)))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def _custom_spec(model, param, value, seed):
    obj = dict(model)
    if param == "scale":
        obj["psi"] = (np.asarray(obj["psi"], dtype=float) * float(value)).tolist()
    else:
        obj[param] = value
    obj["seed"] = seed
    return SbmSpec.from_dict(obj)


def _spec_for(cfg, value, seed):
    if cfg.kind == "fig1_nmi_vs_b":
        return fig1_spec(float(value), n1=int(cfg.model.get("n1", 500)), seed=seed)
    if cfg.kind == "fig2_nmi_vs_n0":
        return fig2_spec(int(value), seed=seed)
    if cfg.kind == "fig2_concentration_vs_tau":
        return fig2_spec(int(cfg.n0), seed=seed)
    return _custom_spec(cfg.model, cfg.param, value, seed)


def _record(cfg, point, value, rep, seed, **kw):
    rec = {c: "" for c in COLUMNS}
    rec.update(
        kind=cfg.kind,
        point=point,
        param=cfg.param,
        value=value,
        replicate=rep,
        seed=seed,
    )
    rec.update(kw)
    return rec


def run_unit(cfg_dict, point, rep):
    """All records for one (sweep point, replicate)."""
    cfg = ExperimentConfig.from_dict(cfg_dict)
    value = cfg.grid[point]
    seed = derive_seed(cfg.master_seed, point, rep)
    records = []
    try:
        spec = _spec_for(cfg, value, seed)
        a, rows, cols = sample_sbm(spec)
    except Exception as exc:  # partial failures are recorded, not raised
        return [_record(cfg, point, value, rep, seed, error=f"{type(exc).__name__}: {exc}")]
    if cfg.kind == "fig2_concentration_vs_tau":
        p = mean_matrix(spec, rows, cols)
        deg = expected_degrees(spec)
        tau = float(value)
        for mode in ("oracle", "weights", "none"):
            t0 = time.perf_counter()
            try:
                kwargs = {"d_max": deg.row_max, "d_max_col": deg.col_max} if mode == "oracle" else {}
                a_re, _ = regularize(a, tau, mode, **kwargs)
                _, rel = concentration_error(a_re, p)
                records.append(
                    _record(cfg, point, value, rep, seed, tau=_tau_text(tau), mode=mode,
                            rel_err=repr(float(rel)), time_s=repr(time.perf_counter() - t0))
                )
            except Exception as exc:
                records.append(_record(cfg, point, value, rep, seed, tau=_tau_text(tau), mode=mode,
                                       error=f"{type(exc).__name__}: {exc}"))
        return records
    for name in cfg.pipelines:
        for tau in cfg.taus:
            t0 = time.perf_counter()
            mode = "none" if math.isinf(tau) or name == "subg" else "weights"
            try:
                pc = PipelineConfig(spec.k1, spec.k2, tau=tau, seed=seed, restarts=cfg.restarts)
                out = run_pipeline(name, a, pc)
                mis = misclassification(rows, out.rows)
                records.append(
                    _record(cfg, point, value, rep, seed, pipeline=name, tau=_tau_text(tau),
                            mode=mode, nmi=repr(float(nmi(rows, out.rows))), mis_bar=repr(float(mis.mis_bar)),
                            mis_inf=repr(float(mis.mis_inf)), time_s=repr(time.perf_counter() - t0))
                )
            except Exception as exc:
                records.append(_record(cfg, point, value, rep, seed, pipeline=name,
                                       tau=_tau_text(tau), mode=mode,
                                       error=f"{type(exc).__name__}: {exc}"))
    return records


def _sort_key(rec):
    return (int(rec["point"]), int(rec["replicate"]), str(rec["pipeline"]), str(rec["tau"]),
            str(rec["mode"]))


def resolve_workers(workers=None):
    if workers is None:
        env = os.environ.get("BICLUST_WORKERS")
        workers = int(env) if env else 1
    if workers < 1:
        raise ValueError("workers must be >= 1")
    return workers


def run_experiment(cfg: ExperimentConfig, workers=None):
    """Run every unit and return records in canonical order."""
    workers = resolve_workers(workers)
    units = [(p, r) for p in range(len(cfg.grid)) for r in range(cfg.replicates)]
    cfg_dict = cfg.to_dict()
    records = []
    if workers == 1:
        for p, r in units:
            records.extend(run_unit(cfg_dict, p, r))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(run_unit, cfg_dict, p, r) for p, r in units]
            for f in futs:
                records.extend(f.result())
    records.sort(key=_sort_key)
    return records


def records_to_csv(records, columns=COLUMNS):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for rec in records:
        w.writerow(rec)
    return buf.getvalue()


def determinism_hash(records):
    """sha256 over the CSV text without timing columns."""
    cols = [c for c in COLUMNS if c not in TIMING_COLUMNS]
    return hashlib.sha256(records_to_csv(records, cols).encode()).hexdigest()


SUMMARY_COLUMNS = ["param", "value", "pipeline", "tau", "mode", "metric", "n", "mean", "se"]


def summarize(records):
    """Mean and standard error per (value, pipeline, tau, mode) and metric."""
    groups = {}
    for rec in records:
        if rec.get("error"):
            continue
        key = (rec["param"], rec["value"], rec["pipeline"], rec["tau"], rec["mode"])
        groups.setdefault(key, []).append(rec)
    rows = []
    for key in sorted(groups, key=lambda k: (str(k[0]), float(k[1]), str(k[2]), str(k[3]), str(k[4]))):
        recs = groups[key]
        for metric in ("nmi", "mis_bar", "mis_inf", "rel_err"):
            vals = np.array([float(r[metric]) for r in recs if r[metric] != ""])
            if vals.size == 0:
                continue
            se = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else 0.0
            rows.append(dict(zip(SUMMARY_COLUMNS, [*key, metric, vals.size, repr(float(vals.mean())), repr(se)])))
    return rows


def read_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


def write_outputs(cfg: ExperimentConfig, records, output_dir=None):
    out = output_dir or cfg.output_dir
    if out is None:
        raise ValueError("no output directory")
    os.makedirs(out, exist_ok=True)
    paths = {
        "results": os.path.join(out, "results.csv"),
        "summary": os.path.join(out, "summary.csv"),
        "config": os.path.join(out, "config.json"),
        "hash": os.path.join(out, "determinism.sha256"),
    }
    with open(paths["results"], "w") as fh:
        fh.write(records_to_csv(records))
    with open(paths["summary"], "w") as fh:
        fh.write(records_to_csv(summarize(records), SUMMARY_COLUMNS))
    with open(paths["config"], "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2)
    with open(paths["hash"], "w") as fh:
        fh.write(determinism_hash(records) + "\n")
    return paths
