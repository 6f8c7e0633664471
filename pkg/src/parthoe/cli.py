"""Command-line entry point: ``parthoe <subcommand> [flags]``.

Configuration precedence, lowest first: built-in defaults, the matching
section of ``--config`` (TOML, or the resolved-config JSON written by an
earlier run), then flags given on the command line. The resolved values are
written as ``config.json`` next to the outputs, so passing that file back via
``--config`` reproduces the run.

Exit codes: 0 success, 2 usage or validation error, 1 runtime failure.
"""

import argparse
import csv
import json
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from ._rng import derive_rng
from .circular import acc_at, decode_orientation, mae
from .errors import ConfigError, InvalidInputError, TrainingDivergedError
from .gating import RELIABLE_DEG, score_report, write_pr_csv, write_summary
from .model import forward
from .sim import ESTIMATORS, TASKS, SimConfig, builtin_scenario, load_scenario, run_scenario
from .skeleton import gen_dataset, load_dataset, parse_mix
from .train import TrainConfig, load_checkpoint, save_checkpoint, train, write_history

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

EVAL_ESTIMATORS = ("model", "gt_echo", "uniform")
CONFIG_NAME = "config.json"


class UsageError(Exception):
    """Bad flags or configuration; maps to exit code 2."""


# -- configuration ----------------------------------------------------------

def _read_config(path):
    if path is None:
        return {}
    path = Path(path)
    try:
        if path.suffix == ".json":
            return json.loads(path.read_text(encoding="utf-8"))
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise UsageError(f"cannot parse config {path}: {exc}") from None


def resolve(section, defaults, args):
    """Merge defaults, the config-file section and explicit flags."""
    doc = _read_config(args.config)
    values = dict(defaults)
    file_section = doc.get(section, {})
    if not isinstance(file_section, dict):
        raise UsageError(f"config section [{section}] must be a table")
    unknown = set(file_section) - set(values)
    if unknown:
        raise UsageError(f"unknown keys in [{section}]: {', '.join(sorted(unknown))}")
    values.update(file_section)
    if "seed" in doc and "seed" in values:
        values["seed"] = doc["seed"]
    for key in values:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return values


def _write_resolved(out_dir, command, section, values):
    doc = {"command": command, section: values}
    with open(Path(out_dir) / CONFIG_NAME, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _split_list(value):
    if isinstance(value, str):
        return [v.strip() for v in value.split(",") if v.strip()]
    return list(value)


def _out_dir(path):
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- gen-data -----------------------------------------------------------------

GEN_DEFAULTS = {"n": 1000, "mix": "full:1.0", "noise": 0.05, "seed": 0, "out": "data.jsonl"}


def cmd_gen_data(args):
    cfg = resolve("gen_data", GEN_DEFAULTS, args)
    if int(cfg["n"]) <= 0:
        raise UsageError(f"--n must be positive, got {cfg['n']}")
    if float(cfg["noise"]) < 0:
        raise UsageError("--noise must be >= 0")
    try:
        mix = parse_mix(cfg["mix"])
    except InvalidInputError as exc:
        raise UsageError(str(exc)) from None
    out = Path(cfg["out"])
    if out.suffix != ".jsonl":
        out = _out_dir(out) / "data.jsonl"
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
    samples = gen_dataset(out, int(cfg["n"]), mix, float(cfg["noise"]), int(cfg["seed"]))
    _write_resolved(out.parent, "gen-data", "gen_data", cfg)
    print(f"wrote {len(samples)} samples to {out} (seed {cfg['seed']})")


# -- train --------------------------------------------------------------------

TRAIN_DEFAULTS = {**TrainConfig().to_dict(), "data": None, "val": None, "out": "run"}


def cmd_train(args):
    cfg = resolve("train", TRAIN_DEFAULTS, args)
    if cfg["data"] is None:
        raise UsageError("--data is required")
    if int(cfg["epochs"]) <= 0:
        raise UsageError(f"--epochs must be positive, got {cfg['epochs']}")
    if int(cfg["batch_size"]) <= 0:
        raise UsageError("--batch-size must be positive")
    cfg["hidden"] = [int(h) for h in _split_list(cfg["hidden"])]
    tcfg = TrainConfig.from_dict({f.name: cfg[f.name] for f in fields(TrainConfig)})
    data = load_dataset(cfg["data"])
    val = load_dataset(cfg["val"]) if cfg["val"] else None
    out = _out_dir(cfg["out"])
    _write_resolved(out, "train", "train", cfg)
    params, history = train(data, tcfg, val=val)
    save_checkpoint(out / "checkpoint.json", params, tcfg)
    write_history(out / "history.csv", history)
    last = history[-1]
    print(f"trained {tcfg.epochs} epochs: val Acc(30) {last['val_acc30']:.4f}, val MAE {last['val_mae']:.2f} deg")


# -- eval ---------------------------------------------------------------------

EVAL_DEFAULTS = {"model": None, "data": None, "estimator": "model", "seed": 0, "out": "eval"}
REPORT_FIELDS = ("mode", "n", "acc5", "acc15", "acc30", "mae")


def _estimates(cfg, data):
    """Predicted yaw, confidence and distribution for every sample."""
    kind = cfg["estimator"]
    if kind == "gt_echo":
        return data.theta_deg.copy(), None, None
    if kind == "uniform":
        rng = derive_rng(int(cfg["seed"]), "uniform-estimator")
        return rng.uniform(0.0, 360.0, size=len(data)), None, None
    if cfg["model"] is None:
        raise UsageError("--model is required for the model estimator")
    params, _ = load_checkpoint(cfg["model"])
    p_hat, c, _ = forward(params, data.joints)
    return decode_orientation(p_hat), c, p_hat


def orientation_report(pred, data):
    modes = np.array([str(m) for m in data.modes])
    rows = []
    for name in sorted(set(modes)) + ["all"]:
        sel = np.ones(len(modes), bool) if name == "all" else modes == name
        p, g = pred[sel], data.theta_deg[sel]
        rows.append({
            "mode": name, "n": int(sel.sum()),
            "acc5": acc_at(p, g, 5.0), "acc15": acc_at(p, g, 15.0), "acc30": acc_at(p, g, 30.0),
            "mae": mae(p, g),
        })
    return rows


def format_table(rows):
    lines = [f"{'mode':<12}{'n':>7}{'Acc(5)':>9}{'Acc(15)':>9}{'Acc(30)':>9}{'MAE':>9}"]
    for r in rows:
        lines.append(f"{r['mode']:<12}{r['n']:>7}{r['acc5']:>9.4f}{r['acc15']:>9.4f}{r['acc30']:>9.4f}{r['mae']:>9.2f}")
    return "\n".join(lines)


def cmd_eval(args):
    cfg = resolve("eval", EVAL_DEFAULTS, args)
    if cfg["estimator"] not in EVAL_ESTIMATORS:
        raise UsageError(f"unknown estimator {cfg['estimator']!r}; valid: {', '.join(EVAL_ESTIMATORS)}")
    if cfg["data"] is None:
        raise UsageError("--data is required")
    data = load_dataset(cfg["data"])
    pred, _, _ = _estimates(cfg, data)
    rows = orientation_report(pred, data)
    out = _out_dir(cfg["out"])
    _write_resolved(out, "eval", "eval", cfg)
    with open(out / "report.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_FIELDS)
        for r in rows:
            w.writerow([r["mode"], r["n"]] + [repr(float(r[k])) for k in REPORT_FIELDS[2:]])
    table = format_table(rows)
    (out / "report.txt").write_text(table + "\n", encoding="utf-8")
    print(table)


# -- eval-confidence ----------------------------------------------------------

CONF_DEFAULTS = {"model": None, "data": None, "threshold_deg": RELIABLE_DEG, "seed": 0, "out": "eval_confidence"}


def cmd_eval_confidence(args):
    cfg = resolve("eval_confidence", CONF_DEFAULTS, args)
    if cfg["data"] is None or cfg["model"] is None:
        raise UsageError("--model and --data are required")
    data = load_dataset(cfg["data"])
    cfg_model = dict(cfg, estimator="model")
    pred, conf, p_hat = _estimates(cfg_model, data)
    out = _out_dir(cfg["out"])
    _write_resolved(out, "eval-confidence", "eval_confidence", cfg)
    summary = {}
    for kind, scores in (("confidence", conf), ("max_prob", p_hat.max(axis=-1))):
        try:
            curve, info = score_report(pred, data.theta_deg, scores, kind, float(cfg["threshold_deg"]))
        except InvalidInputError as exc:
            raise RuntimeError(str(exc)) from None
        write_pr_csv(out / f"pr_{kind}.csv", curve)
        summary[kind] = info
        print(f"{kind:<12} max recall at 100% precision: {info['max_recall_at_p100']:.4f}")
    write_summary(out / "summary.json", summary)


# -- simulate -----------------------------------------------------------------

SIM_DEFAULTS = {
    **SimConfig().to_dict(),
    "scenario": "spin", "estimator": "cv_baseline,ground_truth", "task": "backward",
    "model": None, "seed": None, "out": "sim",
}


def _scenario(ref):
    path = Path(ref)
    if path.suffix == ".json" or path.exists():
        return load_scenario(path)
    try:
        return builtin_scenario(ref)
    except FileNotFoundError:
        raise UsageError(f"no scenario file or built-in scenario named {ref!r}") from None


def cmd_simulate(args):
    cfg = resolve("sim", SIM_DEFAULTS, args)
    estimators = _split_list(cfg["estimator"])
    tasks = _split_list(cfg["task"])
    bad = [e for e in estimators if e not in ESTIMATORS]
    if bad or not estimators:
        raise UsageError(f"unknown estimator {', '.join(bad) or '(none)'}; valid: {', '.join(ESTIMATORS)}")
    bad = [t for t in tasks if t not in TASKS]
    if bad or not tasks:
        raise UsageError(f"unknown task {', '.join(bad) or '(none)'}; valid: {', '.join(TASKS)}")
    if "model" in estimators and cfg["model"] is None:
        raise UsageError("--model is required for the model estimator")
    sim_cfg = SimConfig(**{f.name: cfg[f.name] for f in fields(SimConfig)})
    params = load_checkpoint(cfg["model"])[0] if "model" in estimators else None

    out = _out_dir(cfg["out"])
    _write_resolved(out, "simulate", "sim", cfg)
    runs = []
    for ref in _split_list(cfg["scenario"]):
        sc = _scenario(ref)
        seed = sc.seed if cfg["seed"] is None else int(cfg["seed"])
        for est in estimators:
            for task in tasks:
                res = run_scenario(sc, est, task, sim_cfg, seed, params)
                log_name = f"{sc.name}_{est}_{task}.csv"
                res.write_csv(out / log_name)
                runs.append({"scenario": sc.name, "estimator": est, "task": task,
                             "seed": seed, "ate": res.ate, "log": log_name})
                print(f"{sc.name:<16}{est:<14}{task:<10}ATE {res.ate:.4f} m")
    write_summary(out / "summary.json", {"runs": runs})


# -- parser -------------------------------------------------------------------

def _common(p):
    p.add_argument("--config", help="TOML config file or a resolved config.json")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory (gen-data also accepts a .jsonl path)")


def build_parser():
    parser = argparse.ArgumentParser(prog="parthoe", description="Orientation estimation from partial 2D skeletons.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic skeleton dataset")
    _common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--mix", help="occlusion mix, e.g. full:0.5,lower:0.5 or drop@0.3:1")
    p.add_argument("--noise", type=float, help="joint noise std in body heights")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a model on a dataset")
    _common(p)
    p.add_argument("--data")
    p.add_argument("--val")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--hidden", help="comma-separated hidden sizes")
    p.add_argument("--sigma", type=float, help="target width in bins")
    p.add_argument("--n-joints", dest="n_joints", type=int, choices=(17, 23))
    p.add_argument("--val-fraction", dest="val_fraction", type=float)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="Acc(N) and MAE per occlusion mode")
    _common(p)
    p.add_argument("--model")
    p.add_argument("--data")
    p.add_argument("--estimator", help=f"one of {', '.join(EVAL_ESTIMATORS)}")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("eval-confidence", help="precision-recall of confidence and max probability")
    _common(p)
    p.add_argument("--model")
    p.add_argument("--data")
    p.add_argument("--threshold-deg", dest="threshold_deg", type=float)
    p.set_defaults(func=cmd_eval_confidence)

    p = sub.add_parser("simulate", help="run person-following scenarios")
    _common(p)
    p.add_argument("--scenario", help="comma-separated scenario files or built-in names")
    p.add_argument("--estimator", help=f"comma-separated subset of {', '.join(ESTIMATORS)}")
    p.add_argument("--task", help="backward, forward or both")
    p.add_argument("--model")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verbose:
        import logging
        logging.basicConfig(level=logging.INFO, format="%(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        parser.exit(2, f"parthoe {args.command}: error: {exc}\n")
    except ConfigError as exc:
        where = f" (field {exc.field})" if exc.field else ""
        parser.exit(2, f"parthoe {args.command}: error: {exc}{where}\n")
    except TrainingDivergedError as exc:
        parser.exit(1, f"parthoe {args.command}: {exc}\n")
    except (OSError, InvalidInputError, RuntimeError, KeyError) as exc:
        parser.exit(1, f"parthoe {args.command}: error: {exc}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
