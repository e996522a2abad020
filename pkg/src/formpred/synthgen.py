"""Synthetic stand-ins for the film (OFDF) and matrix-tablet (SRMT) corpora.

The real formulation tables are not public, so these generators produce
data with the same schema, target ranges and API-group imbalance. Target
functions are fixed closed forms (version ``GENERATOR_VERSION``); changing
them changes every downstream acceptance number, so bump the version.

Film disintegration time, in seconds, before noise and clamping to [0, 100]::

    t = base[film_former]
        + 0.28 * (thickness_um - 40)
        + 0.006 * (film_former_pct - 30) * (thickness_um - 40)
        - 0.7 * (plasticizer_pct - 5)
        + 6 * tanh((xlogp3 - 1.5) / 1.5)
        + 0.02 * (topological_polar_surface_area - 80)

Tablet release follows R(t) = 100 * (1 - exp(-k t)) at 2/4/6/8 h with::

    ln k = -1.3 - 0.03 * (hpmc_pct - 10) + grade[hpmc_grade]
           + 0.15 * (log_s + 3) + 0.01 * (drug_pct - 5)
           - 0.004 * (hardness_n - 40) - 0.05 * (diameter_mm - 6)
           + filler[filler] + granulation[granulation]

Noise is added to the profile, which is then made non-decreasing and
clamped to [0, 100].
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .data import (
    CATEGORICAL, DESCRIPTOR_NAMES, NUMERIC, OFDF, SRMT, Dataset, DatasetSchema, DescriptorSet,
    FeatureColumn, FormulationRecord, write_csv,
)

GENERATOR_VERSION = 1
RELEASE_TIMES_H = (2.0, 4.0, 6.0, 8.0)

FILM_FORMER_BASE = {"HPMC E15": 16.0, "HPMC E5": 12.0, "PVA": 18.0, "maltodextrin": 8.0, "pullulan": 10.0}
PLASTICIZERS = ("PEG 400", "glycerol", "propylene glycol")
HPMC_GRADE = {"E50": 0.25, "E4M": 0.05, "K4M": 0.0, "K15M": -0.15, "K100M": -0.3}
FILLER = {"DCP": -0.1, "MCC": 0.0, "lactose": 0.15}
GRANULATION = {"direct": 0.0, "dry": -0.05, "wet": -0.1}

OFDF_PROCESS = ("film_former_pct", "plasticizer_pct", "weight_mg", "thickness_um", "tensile_strength_mpa",
                "elongation_pct", "folding_endurance", "drug_content_pct")
SRMT_PROCESS = ("hpmc_pct", "drug_pct", "diameter_mm", "hardness_n")


def ofdf_schema() -> DatasetSchema:
    features = [FeatureColumn(n, NUMERIC) for n in DESCRIPTOR_NAMES]
    features += [FeatureColumn("film_former", CATEGORICAL), FeatureColumn("plasticizer", CATEGORICAL)]
    features += [FeatureColumn(n, NUMERIC) for n in OFDF_PROCESS]
    return DatasetSchema(tuple(features), ("disintegration_time_s",), "api", OFDF)


def srmt_schema() -> DatasetSchema:
    features = [FeatureColumn(n, NUMERIC) for n in DESCRIPTOR_NAMES]
    features += [FeatureColumn(n, CATEGORICAL) for n in ("hpmc_grade", "filler", "granulation")]
    features += [FeatureColumn(n, NUMERIC) for n in SRMT_PROCESS]
    targets = tuple(f"release_{int(t)}h" for t in RELEASE_TIMES_H)
    return DatasetSchema(tuple(features), targets, "api", SRMT)


def default_group_sizes(n_records: int, n_groups: int) -> list[int]:
    """Imbalanced sizes: about half the groups get 1-3 members, the rest share
    the remainder with geometrically decaying sizes (each at least 4)."""
    if n_groups < 1 or n_records < n_groups:
        raise ValueError(f"cannot spread {n_records} records over {n_groups} groups")
    n_small = n_groups // 2
    small = [3 - (i * 3) // n_small for i in range(n_small)] if n_small else []
    n_big = n_groups - n_small
    rest = n_records - sum(small)
    if rest < 4 * n_big:
        return _even_sizes(n_records, n_groups)
    weights = np.array([0.85 ** i for i in range(n_big)])
    extra = rest - 4 * n_big
    raw = weights / weights.sum() * extra
    big = np.floor(raw).astype(int)
    for i in np.argsort(-(raw - big), kind="stable")[: extra - big.sum()]:
        big[i] += 1
    return [int(4 + b) for b in big] + small


def _even_sizes(n_records: int, n_groups: int) -> list[int]:
    q, r = divmod(n_records, n_groups)
    return [q + (1 if i < r else 0) for i in range(n_groups)]


@dataclass(frozen=True)
class SynthConfig:
    n_records: int
    group_sizes: tuple[int, ...] = ()
    noise_sd: float = 0.0
    seed: int = 0
    linear: bool = False

    def __post_init__(self):
        object.__setattr__(self, "group_sizes", tuple(int(g) for g in self.group_sizes))
        if not self.group_sizes:
            raise ValueError("group_sizes is empty; use SynthConfig.with_groups")
        if min(self.group_sizes) < 1:
            raise ValueError("every group needs at least one record")
        if sum(self.group_sizes) != self.n_records:
            raise ValueError(f"group sizes sum to {sum(self.group_sizes)}, not {self.n_records}")
        if not (self.noise_sd >= 0 and math.isfinite(self.noise_sd)):
            raise ValueError("noise_sd must be finite and >= 0")

    @classmethod
    def with_groups(cls, n_records: int, n_groups: int, noise_sd: float = 0.0, seed: int = 0,
                    linear: bool = False) -> "SynthConfig":
        return cls(n_records, tuple(default_group_sizes(n_records, n_groups)), noise_sd, seed, linear)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["group_sizes"] = list(self.group_sizes)
        return d


def _descriptors(rng: np.random.Generator) -> DescriptorSet:
    mw = round(float(rng.uniform(150.0, 600.0)), 2)
    return DescriptorSet(
        molecular_weight=mw,
        xlogp3=round(float(rng.uniform(-1.5, 5.0)), 1),
        h_bond_donors=int(rng.integers(0, 6)),
        h_bond_acceptors=int(rng.integers(1, 11)),
        rotatable_bonds=int(rng.integers(0, 13)),
        topological_polar_surface_area=round(float(rng.uniform(20.0, 150.0)), 1),
        heavy_atom_count=int(round(mw / 13.5)),
        complexity=round(float(rng.uniform(100.0, 900.0)), 0),
        log_s=round(float(rng.uniform(-6.0, -0.5)), 2),
    )


def ofdf_time(num: Mapping[str, float], cat: Mapping[str, str], linear: bool = False) -> float:
    """Noise-free disintegration time (s), before clamping."""
    if linear:
        return (18.0 + 0.28 * (num["thickness_um"] - 40.0) - 0.7 * (num["plasticizer_pct"] - 5.0)
                + 2.0 * num["xlogp3"] + 0.1 * num["film_former_pct"])
    return (FILM_FORMER_BASE[cat["film_former"]]
            + 0.28 * (num["thickness_um"] - 40.0)
            + 0.006 * (num["film_former_pct"] - 30.0) * (num["thickness_um"] - 40.0)
            - 0.7 * (num["plasticizer_pct"] - 5.0)
            + 6.0 * math.tanh((num["xlogp3"] - 1.5) / 1.5)
            + 0.02 * (num["topological_polar_surface_area"] - 80.0))


def srmt_rate(num: Mapping[str, float], cat: Mapping[str, str]) -> float:
    """First-order release constant k (1/h)."""
    log_k = (-1.3 - 0.03 * (num["hpmc_pct"] - 10.0) + HPMC_GRADE[cat["hpmc_grade"]]
             + 0.15 * (num["log_s"] + 3.0) + 0.01 * (num["drug_pct"] - 5.0)
             - 0.004 * (num["hardness_n"] - 40.0) - 0.05 * (num["diameter_mm"] - 6.0)
             + FILLER[cat["filler"]] + GRANULATION[cat["granulation"]])
    return math.exp(log_k)


def srmt_profile(k: float) -> np.ndarray:
    return np.array([100.0 * (1.0 - math.exp(-k * t)) for t in RELEASE_TIMES_H])


def _group_ids(prefix: str, n: int) -> list[str]:
    width = max(2, len(str(n)))
    return [f"{prefix}{i + 1:0{width}d}" for i in range(n)]


def generate_ofdf_like(cfg: SynthConfig) -> Dataset:
    rng = np.random.default_rng(cfg.seed)
    schema = ofdf_schema()
    formers = sorted(FILM_FORMER_BASE)
    records = []
    width = max(3, len(str(cfg.n_records)))
    n = 0
    for gid, size in zip(_group_ids("API-", len(cfg.group_sizes)), cfg.group_sizes):
        desc = _descriptors(rng).as_dict()
        # formulations of one API tend to reuse a polymer
        preferred = formers[int(rng.integers(len(formers)))]
        for _ in range(size):
            former = preferred if rng.random() < 0.6 else formers[int(rng.integers(len(formers)))]
            cat = {"film_former": former, "plasticizer": PLASTICIZERS[int(rng.integers(len(PLASTICIZERS)))]}
            ff = round(float(rng.uniform(30.0, 75.0)), 2)
            pl = round(float(rng.uniform(5.0, 25.0)), 2)
            thick = round(float(rng.uniform(40.0, 160.0)), 1)
            num = dict(desc)
            num.update(
                film_former_pct=ff,
                plasticizer_pct=pl,
                weight_mg=round(0.55 * thick + float(rng.uniform(-5.0, 5.0)), 2),
                thickness_um=thick,
                tensile_strength_mpa=round(max(0.5, 2.0 + 0.12 * ff - 0.15 * pl + float(rng.normal(0, 0.8))), 2),
                elongation_pct=round(max(1.0, 5.0 + 1.8 * pl + float(rng.normal(0, 4.0))), 1),
                folding_endurance=float(max(1, int(round(40 + 6 * pl + float(rng.normal(0, 15)))))),
                drug_content_pct=round(float(rng.uniform(92.0, 102.0)), 2),
            )
            num = {k: float(v) for k, v in num.items()}
            t = ofdf_time(num, cat, cfg.linear) + (float(rng.normal(0, cfg.noise_sd)) if cfg.noise_sd else 0.0)
            n += 1
            records.append(FormulationRecord(f"OFDF-{n:0{width}d}", gid, cat, num, (min(100.0, max(0.0, t)),)))
    return Dataset.from_records(schema, records)


def generate_srmt_like(cfg: SynthConfig) -> Dataset:
    rng = np.random.default_rng(cfg.seed)
    schema = srmt_schema()
    grades = sorted(HPMC_GRADE)
    fillers = sorted(FILLER)
    granulations = sorted(GRANULATION)
    records = []
    width = max(3, len(str(cfg.n_records)))
    n = 0
    for gid, size in zip(_group_ids("API-", len(cfg.group_sizes)), cfg.group_sizes):
        desc = _descriptors(rng).as_dict()
        for _ in range(size):
            cat = {"hpmc_grade": grades[int(rng.integers(len(grades)))],
                   "filler": fillers[int(rng.integers(len(fillers)))],
                   "granulation": granulations[int(rng.integers(len(granulations)))]}
            num = dict(desc)
            num.update(
                hpmc_pct=round(float(rng.uniform(10.0, 50.0)), 2),
                drug_pct=round(float(rng.uniform(5.0, 50.0)), 2),
                diameter_mm=round(float(rng.uniform(6.0, 13.0)), 1),
                hardness_n=round(float(rng.uniform(40.0, 120.0)), 1),
            )
            num = {k: float(v) for k, v in num.items()}
            profile = srmt_profile(srmt_rate(num, cat))
            if cfg.noise_sd:
                profile = profile + rng.normal(0.0, cfg.noise_sd, size=profile.shape)
                profile = np.clip(np.maximum.accumulate(profile), 0.0, 100.0)
            n += 1
            records.append(FormulationRecord(f"SRMT-{n:0{width}d}", gid, cat, num,
                                             tuple(float(v) for v in profile)))
    return Dataset.from_records(schema, records)


def generate(task: str, cfg: SynthConfig) -> Dataset:
    task = task.lower()
    if task == OFDF:
        return generate_ofdf_like(cfg)
    if task == SRMT:
        return generate_srmt_like(cfg)
    raise ValueError(f"unknown task {task!r}; expected 'ofdf' or 'srmt'")


def write_dataset(ds: Dataset, out_dir: str | Path, stem: str) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path, schema_path = out / f"{stem}.csv", out / f"{stem}.schema.json"
    write_csv(ds, csv_path)
    ds.schema.save(schema_path)
    return csv_path, schema_path


def write_manifest(path: str | Path, task: str, cfg: SynthConfig) -> None:
    doc = {"generator_version": GENERATOR_VERSION, "task": task, "config": cfg.to_dict()}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def brute_force_max_dissim(dt, initial: Sequence[int], pool: Sequence[int], k: int) -> list[int]:
    """Naive greedy maximum dissimilarity, used as a test oracle.

    Recomputes every minimum distance from scratch each round.
    """
    if len(pool) > 12:
        raise ValueError("brute-force oracle is limited to pools of at most 12")
    if len(initial) == 0:
        raise ValueError("initial set must be non-empty")
    if k > len(pool):
        raise ValueError("k exceeds pool size")
    chosen: list[int] = []
    for _ in range(k):
        best_i, best_d = None, None
        for i in sorted(pool):
            if i in chosen:
                continue
            d = min(float(dt[i][j]) for j in list(initial) + chosen)
            if best_d is None or d > best_d:
                best_i, best_d = i, d
        chosen.append(best_i)
    return chosen
