"""Formulation property prediction: dataset handling, group-aware splitting,
from-scratch regressors and pharmaceutical accuracy criteria."""

__version__ = "0.1.0"

from .data import (  # noqa: E402
    Dataset, DatasetSchema, FormulationRecord, load_csv, write_csv,
)
from .splitting import MdfisConfig, SplitAssignment, mdfis_select, mdfis_three_way  # noqa: E402
from .metrics import accuracy_cdrc, accuracy_dt, f2_similarity, evaluate  # noqa: E402

__all__ = [
    "__version__", "Dataset", "DatasetSchema", "FormulationRecord", "load_csv", "write_csv",
    "MdfisConfig", "SplitAssignment", "mdfis_select", "mdfis_three_way",
    "accuracy_cdrc", "accuracy_dt", "f2_similarity", "evaluate",
]
