"""Corpus-level runs: greedy vs optimal cost plus every lemma check per instance."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..accounting import LEMMAS, build_ledger, kappa, verify_all
from ..errors import ConfigError, StochCoverError
from ..greedy import Selector
from ..instance import DEFAULT_BUDGET
from ..policy import expected_cost_mc
from ..serialization import instance_from_dict, instance_to_dict, load_instances
from .generators import corpus

SCHEMA_VERSION = 1


@dataclass
class ExperimentConfig:
    count: int = 20
    seed: int = 0
    n_max: int = 5
    k_max: int = 3
    m_max: int = 8
    instances: Optional[str] = None  # JSON file; replaces the generated corpus
    alphas: list = field(default_factory=lambda: [1.0])
    lemmas: list = field(default_factory=lambda: list(LEMMAS))
    tolerance: float = 1e-9
    budget: int = DEFAULT_BUDGET
    mc_trials: int = 0
    workers: int = 1

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**obj)
        if cfg.lemmas == "all":
            cfg.lemmas = list(LEMMAS)
        bad = [w for w in cfg.lemmas if w not in LEMMAS]
        if bad:
            raise ConfigError(f"unknown lemmas {bad}; choose from {LEMMAS}")
        if any(a < 1 for a in cfg.alphas):
            raise ConfigError("alpha must be >= 1")
        if cfg.count < 0 or cfg.workers < 1 or cfg.tolerance < 0:
            raise ConfigError("count >= 0, workers >= 1 and tolerance >= 0 are required")
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            obj = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(obj, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(obj)


def _selector(alpha: float) -> Selector:
    return Selector.exact() if alpha == 1 else Selector.adversarial(alpha)


def _finite(x):
    return None if x is None or (isinstance(x, float) and not math.isfinite(x)) else x


def evaluate_instance(index: int, inst_dict: dict, cfg: ExperimentConfig) -> list:
    """One row per alpha; failures are captured in the row instead of raised."""
    inst = instance_from_dict(inst_dict)
    rows = []
    for alpha in cfg.alphas:
        row = {"index": index, "alpha": float(alpha), "n": inst.n, "k": inst.k}
        try:
            ledger = build_ledger(inst, _selector(alpha), cfg.budget)
            reports = verify_all(ledger, cfg.lemmas, cfg.tolerance)
            gap = ledger.gap
            k_val = kappa(gap.Q, gap.eta, inst.integer_valued)
            row.update(
                Q=gap.Q,
                eta=gap.eta,
                eta_is_exact=gap.eta_is_exact,
                integer_valued=inst.integer_valued,
                cost_greedy=ledger.expected_cost_sigma,
                cost_opt=ledger.expected_cost_opt,
                ratio=ledger.expected_cost_sigma / ledger.expected_cost_opt,
                kappa=k_val,
                alpha_kappa=alpha * k_val,
                greedy_nodes=len(ledger.nodes),
                lemmas={w: r.passed for w, r in reports.items()},
                worst_slack={w: _finite(r.worst_slack) for w, r in reports.items()},
                skipped_degenerate=sum(r.skipped for r in reports.values()),
                error=None,
            )
            if cfg.mc_trials:
                mean, stderr = expected_cost_mc(inst, None, cfg.mc_trials, cfg.seed + index, tree=ledger.sigma_tree)
                row.update(mc_mean=mean, mc_stderr=stderr)
        except StochCoverError as exc:
            row.update(lemmas={}, error=f"{type(exc).__name__}: {exc}")
        rows.append(row)
    return rows


def _load_corpus(cfg: ExperimentConfig) -> list:
    if cfg.instances:
        return load_instances(cfg.instances)
    return corpus(cfg.count, cfg.seed, cfg.n_max, cfg.k_max, cfg.m_max)


def summarize(rows: list) -> dict:
    ok = [r for r in rows if r["error"] is None]
    lemma_failures = {}
    for r in ok:
        for w, passed in r["lemmas"].items():
            lemma_failures.setdefault(w, 0)
            lemma_failures[w] += not passed
    return {
        "rows": len(rows),
        "errors": len(rows) - len(ok),
        "lemma_failures": lemma_failures,
        "max_ratio": max((r["ratio"] for r in ok), default=None),
        "mean_ratio": sum(r["ratio"] for r in ok) / len(ok) if ok else None,
        "max_ratio_over_bound": max((r["ratio"] / r["alpha_kappa"] for r in ok), default=None),
        "all_passed": not any(lemma_failures.values()),
    }


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Evaluate every corpus instance at every alpha.

    Instances are independent, so with ``workers > 1`` they run in a process
    pool; rows always come back in corpus order.
    """
    dicts = [instance_to_dict(inst) for inst in _load_corpus(cfg)]
    if cfg.workers > 1 and len(dicts) > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            chunks = list(pool.map(evaluate_instance, range(len(dicts)), dicts, [cfg] * len(dicts)))
    else:
        chunks = [evaluate_instance(i, d, cfg) for i, d in enumerate(dicts)]
    rows = [r for chunk in chunks for r in chunk]
    return {
        "schema": SCHEMA_VERSION,
        "config": cfg.__dict__,
        "instances": len(dicts),
        "rows": rows,
        "summary": summarize(rows),
    }


def exit_code(report: dict) -> int:
    return 0 if report["summary"]["all_passed"] else 1


CSV_FIELDS = (
    "index", "alpha", "n", "k", "Q", "eta", "eta_is_exact", "integer_valued",
    "cost_greedy", "cost_opt", "ratio", "kappa", "alpha_kappa", "greedy_nodes",
    "skipped_degenerate", "mc_mean", "mc_stderr", "error",
)


def rows_to_csv(rows: list) -> str:
    lemma_cols = sorted({w for r in rows for w in r.get("lemmas", {})})
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(CSV_FIELDS) + lemma_cols, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for r in rows:
        flat = dict(r)
        for w in lemma_cols:
            flat[w] = "pass" if r.get("lemmas", {}).get(w) else "fail"
        writer.writerow(flat)
    return buf.getvalue()
