import numpy as np
import pytest

from formpred import synthgen
from formpred.data import CATEGORICAL, NUMERIC, OFDF, DatasetSchema, FeatureColumn, FormulationRecord, Dataset

# filled by tests/test_acceptance.py, printed after the run
ACCEPTANCE_RESULTS: dict[int, tuple[str, bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_RESULTS):
        name, ok, detail = ACCEPTANCE_RESULTS[num]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {name} ({detail})")


@pytest.fixture(scope="session")
def ofdf_corpus():
    return synthgen.generate_ofdf_like(synthgen.SynthConfig.with_groups(131, 13, noise_sd=3.0, seed=0))


@pytest.fixture(scope="session")
def srmt_corpus():
    return synthgen.generate_srmt_like(synthgen.SynthConfig.with_groups(145, 29, noise_sd=2.0, seed=0))


def tiny_schema(task=OFDF, n_targets=1):
    feats = [FeatureColumn("x1"), FeatureColumn("x2"), FeatureColumn("excipient", CATEGORICAL)]
    targets = ["y"] if n_targets == 1 else [f"y{i}" for i in range(n_targets)]
    return DatasetSchema(feats, targets, "api", task)


def tiny_dataset(rows, task=OFDF):
    """rows: (id, group, x1, x2, excipient, target)"""
    schema = tiny_schema(task)
    recs = [FormulationRecord(r[0], r[1], {"excipient": r[4]}, {"x1": float(r[2]), "x2": float(r[3])}, (float(r[5]),))
            for r in rows]
    return Dataset.from_records(schema, recs)


def points_dataset(X, groups=None):
    """Dataset whose encoded matrix is exactly ``X`` (no categoricals)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    names = [f"f{j}" for j in range(X.shape[1])]
    schema = DatasetSchema([FeatureColumn(n, NUMERIC) for n in names], ["y"], "api", OFDF)
    groups = groups or ["G"] * len(X)
    recs = [FormulationRecord(f"R{i:03d}", groups[i], {}, dict(zip(names, map(float, row))), (0.0,))
            for i, row in enumerate(X)]
    ds = Dataset.from_records(schema, recs)
    return Dataset(schema, ds.records, None, X, tuple(names))
