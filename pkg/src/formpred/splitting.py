"""Train/validation/test splitting: random, manual, maximum dissimilarity and MD-FIS.

MD-FIS is greedy maximum dissimilarity with two changes. Records from API
groups with fewer than ``min_group_size`` members never leave the training
set, and the starting reference set is the most representative of many
random draws instead of a single random draw. The greedy step maximizes

    cost = min distance to (reference set + picks) - alpha * mean distance
           to the still-unselected members of the candidate's own group

so that isolated boundary records are penalized relative to the plain
algorithm.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .data import Dataset, FormpredError, apply_scaling, encode_categoricals, fit_scaling


class InsufficientDataError(FormpredError, ValueError):
    """Too few eligible records for the requested selection."""


@dataclass(frozen=True)
class SplitAssignment:
    train: tuple[int, ...]
    validation: tuple[int, ...]
    test: tuple[int, ...] = ()

    def __post_init__(self):
        for name in ("train", "validation", "test"):
            object.__setattr__(self, name, tuple(int(i) for i in getattr(self, name)))
        parts = [set(self.train), set(self.validation), set(self.test)]
        if sum(map(len, parts)) != len(self.train) + len(self.validation) + len(self.test):
            raise ValueError("split contains duplicate indices")
        if parts[0] & parts[1] or parts[0] & parts[2] or parts[1] & parts[2]:
            raise ValueError("split index sets overlap")

    def check_partition(self, n: int) -> None:
        if sorted(self.train + self.validation + self.test) != list(range(n)):
            raise ValueError(f"split does not partition {n} records")

    def to_ids(self, ds: Dataset) -> dict:
        ids = ds.record_ids
        return {"validation": [ids[i] for i in self.validation], "test": [ids[i] for i in self.test]}

    @classmethod
    def from_ids(cls, ds: Dataset, doc: Mapping) -> "SplitAssignment":
        return manual_split(ds, doc.get("validation", []), doc.get("test", []))


@dataclass(frozen=True)
class MdfisConfig:
    selection_size: int = 20
    alpha: float = 0.5
    min_group_size: int = 4
    n_initial_candidates: int = 10000
    initial_set_size: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.selection_size < 1:
            raise ValueError("selection_size must be >= 1")
        if self.n_initial_candidates < 1:
            raise ValueError("n_initial_candidates must be >= 1")
        if self.initial_set_size < 1:
            raise ValueError("initial_set_size must be >= 1")
        if self.min_group_size < 1:
            raise ValueError("min_group_size must be >= 1")
        if not (self.alpha >= 0 and math.isfinite(self.alpha)):
            raise ValueError("alpha must be a finite number >= 0")


def distance_table(X: np.ndarray) -> np.ndarray:
    """Symmetric Euclidean distance matrix with an exact zero diagonal."""
    X = np.asarray(X, dtype=float)
    diff = X[:, None, :] - X[None, :, :]
    D = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    D = 0.5 * (D + D.T)
    np.fill_diagonal(D, 0.0)
    return D


def dataset_distances(ds: Dataset) -> np.ndarray:
    """Distances over encoded features min-max scaled on all rows (targets are not used)."""
    enc = ds if ds.matrix is not None else encode_categoricals(ds)
    scaled = apply_scaling(enc, fit_scaling(enc, range(len(enc))))
    return distance_table(scaled.encoded)


def random_split(ds: Dataset, fraction: float, repeats: int = 1, seed: int = 0) -> list[SplitAssignment]:
    """Two-way splits holding out ``floor(n * fraction)`` records as validation."""
    if not (0.0 < fraction < 1.0):
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    n = len(ds)
    held = int(math.floor(n * fraction))
    if held < 1:
        raise ValueError(f"fraction {fraction} holds out no records from {n}")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(repeats):
        perm = rng.permutation(n)
        out.append(SplitAssignment(sorted(perm[held:]), sorted(perm[:held])))
    return out


def random_three_way(ds: Dataset, n_validation: int, n_test: int, seed: int = 0) -> SplitAssignment:
    n = len(ds)
    if n_validation < 0 or n_test < 0 or n_validation + n_test >= n:
        raise InsufficientDataError(f"cannot hold out {n_validation}+{n_test} of {n} records")
    perm = np.random.default_rng(seed).permutation(n)
    val = sorted(perm[:n_validation])
    test = sorted(perm[n_validation:n_validation + n_test])
    return SplitAssignment(sorted(perm[n_validation + n_test:]), val, test)


def manual_split(ds: Dataset, validation_ids: Iterable[str], test_ids: Iterable[str] = ()) -> SplitAssignment:
    validation_ids, test_ids = list(validation_ids), list(test_ids)
    overlap = set(validation_ids) & set(test_ids)
    if overlap:
        raise ValueError(f"record ids in both validation and test: {sorted(overlap)}")
    val = [ds.index_of(i) for i in validation_ids]
    test = [ds.index_of(i) for i in test_ids]
    held = set(val) | set(test)
    return SplitAssignment([i for i in range(len(ds)) if i not in held], val, test)


def max_dissim_select(dt: np.ndarray, initial: Sequence[int], pool: Sequence[int], k: int) -> list[int]:
    """Greedy maximum dissimilarity selection.

    Repeatedly moves the pool element whose minimum distance to
    ``initial`` plus everything already picked is largest. Ties go to the
    lowest index.
    """
    initial, pool = list(initial), sorted(set(pool))
    if not initial:
        raise ValueError("initial set must be non-empty")
    if set(initial) & set(pool):
        raise ValueError("pool and initial set overlap")
    if k > len(pool):
        raise ValueError(f"cannot select {k} from a pool of {len(pool)}")
    dt = np.asarray(dt)
    remaining = np.array(pool, dtype=int)
    nearest = dt[np.ix_(remaining, initial)].min(axis=1)
    selected = []
    for _ in range(k):
        j = int(np.argmax(nearest))  # first maximum == lowest index, pool is sorted
        pick = int(remaining[j])
        selected.append(pick)
        remaining = np.delete(remaining, j)
        nearest = np.minimum(np.delete(nearest, j), dt[remaining, pick])
    return selected


def small_group_filter(ds: Dataset, min_group_size: int, subset: Sequence[int] | None = None) -> list[int]:
    """Indices whose API group has at least ``min_group_size`` members (counted within ``subset``)."""
    allowed = range(len(ds)) if subset is None else sorted(set(subset))
    counts: dict[str, int] = {}
    groups = ds.groups
    for i in allowed:
        counts[groups[i]] = counts.get(groups[i], 0) + 1
    return [i for i in allowed if counts[groups[i]] >= min_group_size]


def _coverage_scores(dt: np.ndarray, candidates: np.ndarray, draws: np.ndarray) -> np.ndarray:
    # draws holds positions into candidates; members of the draw sit at distance
    # zero from themselves, so summing over all candidates and dividing by the
    # number of non-members gives the mean over the remaining candidates.
    sub = dt[np.ix_(candidates, candidates)]
    n, size = len(candidates), draws.shape[1]
    scores = np.empty(len(draws))
    for start in range(0, len(draws), 2048):
        chunk = draws[start:start + 2048]
        nearest = sub[chunk].min(axis=1)
        rest = n - size
        scores[start:start + len(chunk)] = -(nearest.sum(axis=1) / rest if rest else 0.0)
    return scores


def select_initial_set(dt: np.ndarray, candidates: Sequence[int], cfg: MdfisConfig,
                       rng: np.random.Generator | None = None) -> list[int]:
    """Most representative of ``n_initial_candidates`` random subsets.

    Similarity of a subset is minus the mean distance from every other
    candidate to its nearest subset member. Ties keep the earliest draw.
    """
    cand = np.array(sorted(set(candidates)), dtype=int)
    size = cfg.initial_set_size
    if len(cand) < size:
        raise InsufficientDataError(f"need at least {size} candidates for the initial set, have {len(cand)}")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    draws = np.argsort(rng.random((cfg.n_initial_candidates, len(cand))), axis=1, kind="stable")[:, :size]
    scores = _coverage_scores(np.asarray(dt), cand, draws)
    best = draws[int(np.argmax(scores))]
    return sorted(int(i) for i in cand[best])


def mdfis_cost(original_distance: float, sub_mean_distance: float, alpha: float) -> float:
    return original_distance - alpha * sub_mean_distance


def mdfis_select(ds: Dataset, dt: np.ndarray, cfg: MdfisConfig, *, subset: Sequence[int] | None = None,
                 initial: Sequence[int] | None = None, rng: np.random.Generator | None = None) -> list[int]:
    """Select ``cfg.selection_size`` representative records.

    ``subset`` restricts the run to those rows (group sizes are counted
    within it). ``initial`` bypasses the random initial-set search.
    A candidate that is the last unselected member of its group is never
    picked, so every group that gives up records keeps one for training.
    """
    dt = np.asarray(dt)
    candidates = small_group_filter(ds, cfg.min_group_size, subset)
    if initial is None:
        if len(candidates) < cfg.selection_size + cfg.initial_set_size:
            raise InsufficientDataError(f"{len(candidates)} candidates after the small-group filter; need "
                             f"{cfg.selection_size + cfg.initial_set_size}")
        initial = select_initial_set(dt, candidates, cfg, rng)
    else:
        initial = list(initial)
        if not initial:
            raise ValueError("initial set must be non-empty")
    pool = sorted(set(candidates) - set(initial))
    if len(pool) < cfg.selection_size:
        raise InsufficientDataError(f"pool of {len(pool)} is smaller than selection_size {cfg.selection_size}")

    groups = ds.groups
    in_scope = range(len(ds)) if subset is None else sorted(set(subset))
    unselected: dict[str, set[int]] = {}
    for i in in_scope:
        unselected.setdefault(groups[i], set()).add(i)

    remaining = list(pool)
    nearest = {i: float(dt[i, initial].min()) for i in remaining}
    selected: list[int] = []
    for _ in range(cfg.selection_size):
        best, best_cost = None, -math.inf
        for i in remaining:
            mates = unselected[groups[i]] - {i}
            if not mates:
                continue
            sub_mean = float(np.mean(dt[i, sorted(mates)]))
            cost = mdfis_cost(nearest[i], sub_mean, cfg.alpha)
            if cost > best_cost:
                best, best_cost = i, cost
        if best is None:
            raise InsufficientDataError(f"only {len(selected)} records are selectable without emptying a group")
        selected.append(best)
        remaining.remove(best)
        unselected[groups[best]].discard(best)
        for i in remaining:
            nearest[i] = min(nearest[i], float(dt[i, best]))
    return selected


def mdfis_three_way(ds: Dataset, cfg: MdfisConfig, seed: int | None = None, *, n_test: int | None = None,
                    dt: np.ndarray | None = None) -> SplitAssignment:
    """Run MD-FIS twice: validation from all records, then test from the remainder."""
    seed = cfg.seed if seed is None else seed
    if dt is None:
        dt = dataset_distances(ds)
    val_rng, test_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    validation = mdfis_select(ds, dt, cfg, rng=val_rng)
    rest = sorted(set(range(len(ds))) - set(validation))
    test_cfg = cfg if n_test is None else replace(cfg, selection_size=n_test)
    test = mdfis_select(ds, dt, test_cfg, subset=rest, rng=test_rng)
    held = set(validation) | set(test)
    return SplitAssignment([i for i in range(len(ds)) if i not in held], validation, test)


def maxdissim_three_way(ds: Dataset, n_validation: int, n_test: int, initial_set_size: int = 5, seed: int = 0,
                        dt: np.ndarray | None = None) -> SplitAssignment:
    """Plain maximum dissimilarity (random initial set, no group filter) run twice."""
    if dt is None:
        dt = dataset_distances(ds)
    n = len(ds)
    rng = np.random.default_rng(seed)
    initial = sorted(int(i) for i in rng.choice(n, initial_set_size, replace=False))
    pool = [i for i in range(n) if i not in set(initial)]
    validation = max_dissim_select(dt, initial, pool, n_validation)
    pool = [i for i in pool if i not in set(validation)]
    test = max_dissim_select(dt, initial, pool, n_test)
    held = set(validation) | set(test)
    return SplitAssignment([i for i in range(n) if i not in held], validation, test)


def save_split(path: str | Path, ds: Dataset, splits: SplitAssignment | Sequence[SplitAssignment]) -> None:
    if isinstance(splits, SplitAssignment):
        doc = splits.to_ids(ds)
    else:
        doc = [s.to_ids(ds) for s in splits]
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_split(path: str | Path, ds: Dataset, repeat: int = 0) -> SplitAssignment:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if isinstance(doc, list):
        doc = doc[repeat]
    return SplitAssignment.from_ids(ds, doc)
