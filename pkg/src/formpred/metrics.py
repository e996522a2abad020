"""Pharmaceutical accuracy criteria and error metrics."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .data import SRMT, Dataset, ScalingParams

SPLITS = ("train", "validation", "test")
DEFAULT_TIMES = (2.0, 4.0, 6.0, 8.0)
F2_PASS = 50.0
DT_TOLERANCE_S = 10.0


@dataclass(frozen=True)
class DissolutionProfile:
    released: tuple[float, ...]
    times: tuple[float, ...] = DEFAULT_TIMES

    def __post_init__(self):
        object.__setattr__(self, "released", tuple(float(v) for v in self.released))
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        if len(self.released) != len(self.times):
            raise ValueError(f"{len(self.released)} values for {len(self.times)} time points")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("times must be strictly increasing")
        if any(not (0.0 <= v <= 100.0) for v in self.released):
            raise ValueError(f"released percentages must lie in [0, 100]: {self.released}")


def f2_similarity(reference: DissolutionProfile, test: DissolutionProfile) -> float:
    """FDA similarity factor, 50 * log10(100 / sqrt(1 + mean squared difference))."""
    if reference.times != test.times:
        raise ValueError("profiles are sampled on different time grids")
    n = len(reference.released)
    if n < 1:
        raise ValueError("profiles need at least one time point")
    ssd = sum((r - t) ** 2 for r, t in zip(reference.released, test.released))
    return 50.0 * math.log10(100.0 / math.sqrt(1.0 + ssd / n))


def accuracy_from_f2(values: Iterable[float]) -> float:
    values = list(values)
    if not values:
        raise ValueError("no predictions to score")
    return sum(1 for v in values if v >= F2_PASS) / len(values)


def accuracy_cdrc(pairs: Sequence[tuple[DissolutionProfile, DissolutionProfile]]) -> float:
    """Share of (experimental, predicted) profile pairs with f2 >= 50."""
    if not pairs:
        raise ValueError("no predictions to score")
    return accuracy_from_f2(f2_similarity(exp, pred) for exp, pred in pairs)


def accuracy_dt(pairs: Sequence[tuple[float, float]]) -> float:
    """Share of (experimental, predicted) disintegration times within 10 s."""
    if not pairs:
        raise ValueError("no predictions to score")
    return sum(1 for exp, pred in pairs if abs(pred - exp) <= DT_TOLERANCE_S) / len(pairs)


def _flat_pair(y, yhat) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=float).ravel()
    yhat = np.asarray(yhat, dtype=float).ravel()
    if y.shape != yhat.shape:
        raise ValueError(f"length mismatch: {y.size} vs {yhat.size}")
    if y.size == 0:
        raise ValueError("empty input")
    return y, yhat


def rmse(y, yhat) -> float:
    y, yhat = _flat_pair(y, yhat)
    return float(np.sqrt(np.mean((y - yhat) ** 2)))


def mae(y, yhat) -> float:
    y, yhat = _flat_pair(y, yhat)
    return float(np.mean(np.abs(y - yhat)))


@dataclass
class SplitMetrics:
    accuracy: float | None
    rmse: float | None
    mae: float | None
    records: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"accuracy": self.accuracy, "rmse": self.rmse, "mae": self.mae, "records": self.records}


@dataclass
class EvaluationReport:
    task_kind: str
    target_names: tuple[str, ...]
    splits: dict[str, SplitMetrics]
    model: str = ""

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "task_kind": self.task_kind,
            "targets": list(self.target_names),
            **{name: self.splits[name].to_dict() for name in SPLITS},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    def scatter_rows(self) -> list[tuple[str, str, float, float]]:
        rows = []
        for name in SPLITS:
            for rec in self.splits[name].records:
                for target, e, p in zip(self.target_names, rec["experimental"], rec["predicted"]):
                    rows.append((rec["record_id"], target, e, p))
        return rows

    def save_scatter(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["record_id", "target", "experimental", "predicted"])
            for rid, target, e, p in self.scatter_rows():
                w.writerow([rid, target, repr(e), repr(p)])


def _profile(values: np.ndarray) -> DissolutionProfile:
    # regressors without a bounded output can leave the physical range
    times = DEFAULT_TIMES if len(values) == len(DEFAULT_TIMES) else tuple(range(1, len(values) + 1))
    return DissolutionProfile(tuple(np.clip(values, 0.0, 100.0)), times)


def evaluate(predictions, ds: Dataset, split, scaling: ScalingParams, model: str = "") -> EvaluationReport:
    """Score predictions (original units, one row per record in ``ds``) on every split.

    Accuracy is computed in original units; RMSE and MAE on the target scale
    of ``scaling`` (fitted on the training rows).
    """
    P = np.asarray(predictions, dtype=float)
    Y = ds.targets
    if P.ndim == 1:
        P = P.reshape(-1, 1)
    if P.shape != Y.shape:
        raise ValueError(f"predictions have shape {P.shape}, expected {Y.shape}")
    Ys, Ps = scaling.scale_targets(Y), scaling.scale_targets(P)
    ids = ds.record_ids
    out = {}
    for name in SPLITS:
        idx = list(getattr(split, name))
        if not idx:
            out[name] = SplitMetrics(None, None, None, [])
            continue
        if not np.all(np.isfinite(P[idx])):
            raise ValueError(f"missing predictions in the {name} split")
        records = []
        for i in idx:
            rec = {"record_id": ids[i], "experimental": Y[i].tolist(), "predicted": P[i].tolist()}
            if ds.schema.task_kind == SRMT:
                f2 = f2_similarity(_profile(Y[i]), _profile(P[i]))
                rec.update(f2=f2, passed=f2 >= F2_PASS)
            else:
                err = float(abs(P[i, 0] - Y[i, 0]))
                rec.update(abs_error=err, passed=err <= DT_TOLERANCE_S)
            records.append(rec)
        accuracy = sum(r["passed"] for r in records) / len(records)
        out[name] = SplitMetrics(accuracy, rmse(Ys[idx], Ps[idx]), mae(Ys[idx], Ps[idx]), records)
    return EvaluationReport(ds.schema.task_kind, ds.schema.targets, out, model)


def format_table(reports: Sequence[EvaluationReport], placeholder_rows: Sequence[str] = ("SVM",)) -> str:
    """Plain-text results table with accuracy (%), RMSE and MAE per split."""
    head1 = f"{'Model':<10}" + "".join(f"{s.capitalize() + ' set':^27}" for s in SPLITS)
    head2 = f"{'':<10}" + f"{'Acc (%)':>9}{'RMSE':>9}{'MAE':>9}" * len(SPLITS)
    lines = [head1, head2]

    def cell(v, pct=False):
        if v is None:
            return f"{'-':>9}"
        return f"{v * 100:>9.2f}" if pct else f"{v:>9.4f}"

    rows = [(r.model, r) for r in reports] + [(name, None) for name in placeholder_rows]
    for label, r in rows:
        line = f"{label:<10}"
        for s in SPLITS:
            m = r.splits[s] if r is not None else SplitMetrics(None, None, None)
            line += cell(m.accuracy, True) + cell(m.rmse) + cell(m.mae)
        lines.append(line)
    return "\n".join(lines) + "\n"
