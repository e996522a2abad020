"""Command-line experiment runner.

Exit codes: 0 success, 2 usage or configuration error, 3 data or artifact
error, 4 prediction input error (unseen category label).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .data import (
    OFDF, SRMT, IntegrityError, ParseError, SchemaError, UnknownCategoryError, DatasetSchema, load_csv,
)
from .metrics import evaluate, format_table
from .models import ACCEPTED, MODEL_NAMES, ModelArtifact, train_model
from .plots import write_report_plots
from .splitting import (
    InsufficientDataError, MdfisConfig, dataset_distances, load_split, manual_split, maxdissim_three_way,
    mdfis_three_way, random_split, random_three_way, save_split,
)
from . import synthgen

log = logging.getLogger("formpred")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_PREDICT = 0, 2, 3, 4
OUTPUT_ENV = "FORMPRED_OUTPUT_DIR"
DEFAULT_NOISE = {OFDF: 3.0, SRMT: 2.0}

# CLI flag -> hyperparameter name
HP_FLAGS = {
    "k": "k", "components": "n_components", "max_depth": "max_depth", "trees": "n_trees",
    "max_features": "max_features", "hidden": "hidden_width", "hidden_layers": "hidden_layers",
    "epochs": "epochs", "lr": "learning_rate", "momentum": "momentum",
}


class UsageError(Exception):
    pass


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _default_out() -> str:
    return os.environ.get(OUTPUT_ENV, ".")


def _load_dataset(data: str, schema: str, require_targets: bool = True):
    return load_csv(data, DatasetSchema.load(schema), require_targets=require_targets)


# --- synth -----------------------------------------------------------------

def run_synth(cfg: dict) -> list[Path]:
    task = str(cfg["task"]).lower()
    if task not in (OFDF, SRMT):
        raise UsageError(f"unknown task {cfg['task']!r}; expected 'ofdf' or 'srmt'")
    noise = cfg.get("noise_sd")
    noise = DEFAULT_NOISE[task] if noise is None else float(noise)
    if cfg.get("group_sizes"):
        sizes = [int(s) for s in cfg["group_sizes"]]
        synth = synthgen.SynthConfig(sum(sizes), tuple(sizes), noise, int(cfg.get("seed", 0)),
                                     bool(cfg.get("linear", False)))
    else:
        records = int(cfg.get("records") or (131 if task == OFDF else 145))
        groups = int(cfg.get("groups") or (13 if task == OFDF else 29))
        synth = synthgen.SynthConfig.with_groups(records, groups, noise, int(cfg.get("seed", 0)),
                                                 bool(cfg.get("linear", False)))
    ds = synthgen.generate(task, synth)
    stem = cfg.get("stem") or task
    csv_path, schema_path = synthgen.write_dataset(ds, cfg["out"], stem)
    paths = [csv_path, schema_path]
    if cfg.get("manifest"):
        mpath = Path(cfg["out"]) / f"{stem}.synth.json"
        synthgen.write_manifest(mpath, task, synth)
        paths.append(mpath)
    cfg["resolved_synth"] = synth.to_dict()
    return paths


# --- split -----------------------------------------------------------------

def make_split(ds, cfg: dict):
    strategy = cfg.get("strategy", "mdfis")
    seed = int(cfg.get("seed", 0))
    if strategy == "random":
        if cfg.get("fraction") is not None:
            return random_split(ds, float(cfg["fraction"]), int(cfg.get("repeats") or 1), seed)
        return random_three_way(ds, int(cfg.get("val", 20)), int(cfg.get("test", 20)), seed)
    if strategy == "manual":
        ids_path = cfg.get("ids")
        if not ids_path:
            raise UsageError("--strategy manual needs --ids FILE")
        with open(ids_path, encoding="utf-8") as fh:
            doc = json.load(fh)
        return manual_split(ds, doc.get("validation", []), doc.get("test", []))
    if strategy == "maxdissim":
        return maxdissim_three_way(ds, int(cfg.get("val", 20)), int(cfg.get("test", 20)),
                                   int(cfg.get("initial_size") or 5), seed)
    if strategy == "mdfis":
        mcfg = MdfisConfig(
            selection_size=int(cfg.get("val", 20)),
            alpha=float(cfg["alpha"]) if cfg.get("alpha") is not None else 0.5,
            min_group_size=int(cfg.get("min_group_size") or 4),
            n_initial_candidates=int(cfg.get("initial_candidates") or 10000),
            initial_set_size=int(cfg.get("initial_size") or 5),
            seed=seed,
        )
        return mdfis_three_way(ds, mcfg, seed, n_test=int(cfg.get("test", 20)), dt=dataset_distances(ds))
    raise UsageError(f"unknown split strategy {strategy!r}")


def run_split(cfg: dict) -> list[Path]:
    ds = _load_dataset(cfg["data"], cfg["schema"])
    split = make_split(ds, cfg)
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    save_split(out, ds, split)
    return [out]


# --- train -----------------------------------------------------------------

def model_overrides(name: str, values: dict) -> dict:
    return {k: v for k, v in values.items() if v is not None and k in ACCEPTED[name]}


def _check_models(models: list[tuple[str, dict]]) -> None:
    for name, hp in models:
        if name not in MODEL_NAMES:
            raise UsageError(f"unknown model {name!r}; expected one of {', '.join(MODEL_NAMES)}")


def run_train(cfg: dict) -> list[Path]:
    models = cfg["models"]
    _check_models(models)
    ds = _load_dataset(cfg["data"], cfg["schema"])
    split = load_split(cfg["split"], ds, int(cfg.get("repeat", 0)))
    seed, jobs = int(cfg.get("seed", 0)), int(cfg.get("jobs") or 1)
    one_hot = bool(cfg.get("one_hot", False))

    def fit(item):
        name, hp = item
        try:
            return train_model(name, ds, split, hp, seed=seed, one_hot=one_hot)
        except ValueError as exc:
            if isinstance(exc, (SchemaError, ParseError, IntegrityError, InsufficientDataError)):
                raise
            raise UsageError(f"model {name}: {exc}") from exc

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            artifacts = list(pool.map(fit, models))
    else:
        artifacts = [fit(m) for m in models]

    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for art in artifacts:
        p = out / f"model_{art.name}.json"
        art.save(p)
        paths.append(p)
        for j, trace in enumerate(art.losses):
            suffix = "" if len(art.losses) == 1 else f"_{ds.schema.targets[j]}"
            lp = out / f"loss_{art.name}{suffix}.csv"
            with open(lp, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["epoch", "loss"])
                for e, v in enumerate(trace):
                    w.writerow([e, repr(float(v))])
            paths.append(lp)
    return paths


# --- evaluate --------------------------------------------------------------

def run_evaluate(cfg: dict) -> list[Path]:
    ds = _load_dataset(cfg["data"], cfg["schema"])
    split = load_split(cfg["split"], ds, int(cfg.get("repeat", 0)))
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    reports, paths = [], []
    for mf in cfg["model_files"]:
        art = ModelArtifact.load(mf)
        report = evaluate(art.predict(ds), ds, split, art.scaling, art.name)
        reports.append(report)
        rp, sp = out / f"report_{art.name}.json", out / f"scatter_{art.name}.csv"
        report.save(rp)
        report.save_scatter(sp)
        paths += [rp, sp]
        if cfg.get("plots"):
            paths += write_report_plots(report, out / "plots")
    table = out / "results.txt"
    table.write_text(format_table(reports), encoding="utf-8")
    paths.append(table)
    return paths


# --- predict ---------------------------------------------------------------

def run_predict(cfg: dict) -> list[Path]:
    art = ModelArtifact.load(cfg["model"])
    ds = load_csv(cfg["input"], art.schema, require_targets=False)
    P = art.predict(ds)
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([art.schema.id_column, *art.schema.targets])
        for rid, row in zip(ds.record_ids, P):
            w.writerow([rid, *(repr(float(v)) for v in row)])
    return [out]


# --- pipeline --------------------------------------------------------------

def _normalize_models(entries) -> list[tuple[str, dict]]:
    models = []
    for e in entries:
        if isinstance(e, str):
            models.append((e.lower(), {}))
        else:
            e = dict(e)
            name = str(e.pop("name")).lower()
            models.append((name, e))
    return models


def run_pipeline(cfg: dict) -> list[Path]:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    seed = int(cfg.get("seed", 0))
    paths: list[Path] = []
    timings = cfg.setdefault("timings", {})

    t = time.perf_counter()
    if cfg.get("data"):
        data, schema = cfg["data"], cfg["schema"]
    else:
        synth = dict(cfg.get("synth") or {})
        synth.setdefault("task", cfg.get("task", OFDF))
        synth.setdefault("seed", seed)
        synth["out"] = str(out / "data")
        paths += run_synth(synth)
        data, schema = str(paths[0]), str(paths[1])
        cfg["resolved_synth"] = synth.get("resolved_synth")
    timings["synth"] = time.perf_counter() - t

    t = time.perf_counter()
    split_cfg = dict(cfg.get("split") or {"strategy": "mdfis"})
    split_cfg.setdefault("seed", seed)
    split_cfg.update(data=data, schema=schema, out=str(out / "split.json"))
    paths += run_split(split_cfg)
    timings["split"] = time.perf_counter() - t

    t = time.perf_counter()
    models = _normalize_models(cfg.get("models") or ["mlr", "plsr", "knn", "rf", "ann1"])
    _check_models(models)
    paths += run_train({"data": data, "schema": schema, "split": str(out / "split.json"), "models": models,
                        "seed": seed, "jobs": cfg.get("jobs", 1), "out": str(out / "models"),
                        "one_hot": cfg.get("one_hot", False)})
    timings["train"] = time.perf_counter() - t

    t = time.perf_counter()
    model_files = [str(out / "models" / f"model_{name}.json") for name, _ in models]
    paths += run_evaluate({"data": data, "schema": schema, "split": str(out / "split.json"),
                           "model_files": model_files, "out": str(out / "reports"), "plots": cfg.get("plots")})
    timings["evaluate"] = time.perf_counter() - t
    return paths


# --- argument parsing ------------------------------------------------------

def _add_hp_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("hyperparameters (override task defaults)")
    g.add_argument("--k", type=int, help="k-NN neighbours")
    g.add_argument("--components", type=int, help="PLSR components")
    g.add_argument("--max-depth", type=int, help="RF maximum tree depth")
    g.add_argument("--trees", type=int, help="RF tree count")
    g.add_argument("--max-features", type=float, help="RF fraction of features tried per split")
    g.add_argument("--hidden", type=int, help="ANN1 hidden width")
    g.add_argument("--hidden-layers", type=int, help="DNN hidden layer count")
    g.add_argument("--epochs", type=int)
    g.add_argument("--lr", type=float, help="learning rate")
    g.add_argument("--momentum", type=float)


def _add_split_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--strategy", default="mdfis", choices=("random", "manual", "maxdissim", "mdfis"))
    p.add_argument("--fraction", type=float, help="random: held-out fraction (two-way split)")
    p.add_argument("--repeats", type=int, default=1, help="random: number of repeated splits")
    p.add_argument("--val", type=int, default=20, help="validation size")
    p.add_argument("--test", type=int, default=20, help="test size")
    p.add_argument("--ids", help="manual: JSON file with validation/test record ids")
    p.add_argument("--alpha", type=float, help="MD-FIS weight of the within-group mean distance (default 0.5)")
    p.add_argument("--min-group-size", type=int, help="MD-FIS small-group threshold (default 4)")
    p.add_argument("--initial-candidates", type=int, help="MD-FIS random initial sets drawn (default 10000)")
    p.add_argument("--initial-size", type=int, help="initial set size (default 5)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="formpred", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"formpred {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset (CSV + schema)")
    p.add_argument("--task", required=True, help="ofdf or srmt")
    p.add_argument("--records", type=int)
    p.add_argument("--groups", type=int)
    p.add_argument("--group-sizes", help="comma-separated explicit group sizes")
    p.add_argument("--noise-sd", type=float, help="target noise (s for ofdf, %% points for srmt)")
    p.add_argument("--linear", action="store_true", help="linear noise-free-able target variant (ofdf)")
    p.add_argument("--stem", help="output file stem (default: task name)")
    p.add_argument("--manifest", action="store_true", help="also write the generating parameters")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)

    p = sub.add_parser("split", help="split a dataset into train/validation/test")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    _add_split_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="split JSON path (default: <out dir>/split.json)")

    p = sub.add_parser("train", help="fit models on the training split")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--repeat", type=int, default=0, help="which split to use from a repeated-split file")
    p.add_argument("--model", action="append", required=True, help=f"one of {', '.join(MODEL_NAMES)}; repeatable")
    _add_hp_flags(p)
    p.add_argument("--one-hot", action="store_true", help="one-hot instead of integer category codes")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)

    p = sub.add_parser("evaluate", help="score saved models on every split")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--repeat", type=int, default=0)
    p.add_argument("--model-file", action="append", required=True, dest="model_files")
    p.add_argument("--plots", action="store_true", help="write SVG scatter plots")
    p.add_argument("--out", default=None)

    p = sub.add_parser("predict", help="predict a CSV with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", default=None, help="predictions CSV (default: <out dir>/predictions.csv)")

    p = sub.add_parser("pipeline", help="synth (optional) -> split -> train -> evaluate")
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--task", default=None)
    p.add_argument("--data")
    p.add_argument("--schema")
    _add_split_flags(p)
    p.add_argument("--model", action="append")
    p.add_argument("--plots", action="store_true")
    p.add_argument("--jobs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default=None)
    return parser


def _resolve(args: argparse.Namespace) -> dict:
    cmd = args.command
    out = args.out or _default_out()
    if cmd == "synth":
        sizes = [int(s) for s in args.group_sizes.split(",")] if args.group_sizes else None
        return {"task": args.task, "records": args.records, "groups": args.groups, "group_sizes": sizes,
                "noise_sd": args.noise_sd, "linear": args.linear, "stem": args.stem, "manifest": args.manifest,
                "seed": args.seed, "out": out}
    if cmd == "split":
        cfg = {k: getattr(args, k) for k in ("data", "schema", "strategy", "fraction", "repeats", "val", "test",
                                              "ids", "alpha", "min_group_size", "initial_candidates",
                                              "initial_size", "seed")}
        cfg["out"] = args.out or str(Path(_default_out()) / "split.json")
        return cfg
    if cmd == "train":
        hp = {HP_FLAGS[k]: getattr(args, k) for k in HP_FLAGS}
        names = [m.lower() for m in args.model]
        _check_models([(n, {}) for n in names])
        used = {k for k, v in hp.items() if v is not None}
        accepted = set().union(*(ACCEPTED[n] for n in names))
        if used - accepted:
            raise UsageError(f"hyperparameters {sorted(used - accepted)} do not apply to models {names}")
        models = [(n, model_overrides(n, hp)) for n in names]
        return {"data": args.data, "schema": args.schema, "split": args.split, "repeat": args.repeat,
                "models": models, "one_hot": args.one_hot, "jobs": args.jobs, "seed": args.seed, "out": out}
    if cmd == "evaluate":
        return {"data": args.data, "schema": args.schema, "split": args.split, "repeat": args.repeat,
                "model_files": args.model_files, "plots": args.plots, "out": out}
    if cmd == "predict":
        return {"model": args.model, "input": args.input,
                "out": args.out or str(Path(_default_out()) / "predictions.csv")}
    # pipeline
    cfg: dict = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            cfg = json.load(fh)
        if "output_dir" in cfg:
            cfg.setdefault("out", cfg.pop("output_dir"))
    split_keys = ("strategy", "fraction", "repeats", "val", "test", "ids", "alpha", "min_group_size",
                  "initial_candidates", "initial_size")
    if not args.config or "split" not in cfg:
        cfg["split"] = {k: getattr(args, k) for k in split_keys}
    for key in ("task", "data", "schema", "jobs", "seed"):
        if getattr(args, key) is not None:
            cfg[key] = getattr(args, key)
    if args.model:
        cfg["models"] = args.model
    if args.plots:
        cfg["plots"] = True
    if args.out or "out" not in cfg:
        cfg["out"] = out
    cfg.setdefault("seed", 0)
    return cfg


RUNNERS = {"synth": run_synth, "split": run_split, "train": run_train, "evaluate": run_evaluate,
           "predict": run_predict, "pipeline": run_pipeline}


def _manifest_dir(cmd: str, cfg: dict) -> Path:
    out = Path(cfg.get("out") or ".")
    return out.parent if cmd in ("split", "predict") else out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items() if k != "timings"}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer, np.floating)):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_manifest(cmd: str, cfg: dict, paths: list[Path], started: float, status: str, error: str = "") -> Path:
    mdir = _manifest_dir(cmd, cfg)
    mdir.mkdir(parents=True, exist_ok=True)
    doc = {
        "command": cmd,
        "tool_version": __version__,
        "config": _jsonable(cfg),
        "artifacts": {str(p): _sha256(Path(p)) for p in paths if Path(p).exists()},
        "timings": {"total_s": time.perf_counter() - started, **cfg.get("timings", {})},
        "status": status,
    }
    if error:
        doc["error"] = error
    path = mdir / f"manifest.{cmd}.json"
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return path


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    cmd = args.command
    started = time.perf_counter()
    cfg: dict = {}
    paths: list[Path] = []
    code, error = EXIT_OK, ""
    try:
        cfg = _resolve(args)
        paths = RUNNERS[cmd](cfg)
    except UnknownCategoryError as exc:
        code, error = EXIT_PREDICT, str(exc)
    except (UsageError, SchemaError) as exc:
        code, error = EXIT_USAGE, str(exc)
    except (InsufficientDataError, ParseError, IntegrityError, FileNotFoundError, json.JSONDecodeError,
            KeyError, IndexError) as exc:
        code, error = EXIT_DATA, str(exc)
    except ValueError as exc:
        code, error = EXIT_USAGE, str(exc)
    if cfg:
        try:
            write_manifest(cmd, cfg, paths, started, "ok" if code == EXIT_OK else "error", error)
        except OSError as exc:  # pragma: no cover
            log.warning("could not write manifest: %s", exc)
    if code:
        print(f"formpred {cmd}: error: {error}", file=sys.stderr)
    else:
        for p in paths:
            log.info("wrote %s", p)
    return code


if __name__ == "__main__":
    sys.exit(main())
