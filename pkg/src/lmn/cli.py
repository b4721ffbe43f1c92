"""
Experiment runner.

    lmn fit-ae   --config cfg.json --out runs/ae
    lmn train    --config cfg.json --set model=lmn-b --set sizes.f=100 --out runs/t
    lmn pretrain --config cfg.json --out runs/p
    lmn eval     --checkpoint runs/t/checkpoint.json --dataset jsb.json --out runs/e
    lmn sweep    --config cfg.json --out runs/s

Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""
import argparse
import copy
import csv
import json
import logging
import os
import sys

import numpy as np

from . import __version__, checkpoint, data, pretrain, seqae, train
from .errors import ConvergenceError, InvalidInputError, NumericError
from .model import init_lmn, init_rnn, parameter_count

log = logging.getLogger("lmn")

HIDDEN_GRID = [50, 100, 250, 500, 750]
LMN_GRID = [[50, 50], [50, 100], [100, 100], [100, 250], [250, 250], [250, 500]]
L2_GRID = [1e-4, 1e-5, 1e-6, 1e-7, 0.0]

DEFAULTS = {
    "dataset": None,
    "model": "lmn-b",
    "sizes": {"f": 100, "m": 100, "h": 100},
    "train": {},
    "pretrain": {"hidden": None, "k": 10, "p_mem": "auto", "max_p_mem": None,
                 "selu_hidden": True, "train": {}, "fine_tune": True},
    "ae": {"source": "inputs", "unfolded_checkpoint": None, "sweep": None, "split": "train"},
    "sweep": {"model": "lmn-b", "hidden_grid": HIDDEN_GRID, "lmn_grid": LMN_GRID, "l2_grid": L2_GRID},
    "checkpoint": None,
    "seed": 0,
}

MODEL_KINDS = ("lmn-a", "lmn-b", "rnn")


class ConfigError(InvalidInputError):
    pass


# configuration --------------------------------------------------------------

def _merge(base, override):
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(config, assignment):
    if "=" not in assignment:
        raise ConfigError(f"--set expects key=value, got {assignment!r}")
    key, value = assignment.split("=", 1)
    node = config
    parts = key.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot set {key}: {part} is not an object")
    node[parts[-1]] = _parse_value(value)


def build_config(args):
    config = copy.deepcopy(DEFAULTS)
    if args.config:
        try:
            with open(args.config) as fh:
                config = _merge(config, json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    for assignment in args.set or []:
        apply_override(config, assignment)
    if args.seed is not None:
        config["seed"] = args.seed
    if getattr(args, "dataset", None):
        config["dataset"] = args.dataset
    if getattr(args, "checkpoint", None):
        config["checkpoint"] = args.checkpoint
    return config


def train_config(section, seed):
    fields = set(train.TrainConfig.__dataclass_fields__)
    unknown = set(section) - fields
    if unknown:
        raise ConfigError(f"unknown train settings: {sorted(unknown)}")
    section = dict(section)
    section.setdefault("seed", seed)
    if "frozen" in section:
        section["frozen"] = tuple(section["frozen"])
    return train.TrainConfig(**section)


def load_splits(spec):
    """``(inputs, targets)`` pairs per split from a path or a synthetic spec."""
    if spec is None:
        raise ConfigError("no dataset given (use --dataset or the 'dataset' config key)")
    if isinstance(spec, dict):
        if "synthetic" not in spec:
            raise ConfigError("dataset object must have a 'synthetic' key")
        return data.make_synthetic(**spec["synthetic"])
    if not os.path.exists(spec):
        raise ConfigError(f"dataset file not found: {spec}")
    ds = data.load_dataset(spec)
    return {name: ds.pairs(name) for name in data.SPLITS}


def io_sizes(splits):
    x, t = splits["train"][0]
    return x.shape[1], t.shape[1]


def make_model(kind, sizes, a, o, seed):
    if kind not in MODEL_KINDS:
        raise ConfigError(f"unknown model kind {kind!r}; choose from {', '.join(MODEL_KINDS)}")
    if kind == "rnn":
        return "rnn", init_rnn(a, sizes["h"], o, seed=seed)
    return "lmn", init_lmn(a, sizes["f"], sizes["m"], o, variant=kind[-1].upper(), seed=seed)


def count_params(kind, sizes, a):
    if kind == "rnn":
        return parameter_count("RNN", a, h=sizes["h"])
    return parameter_count("LMN", a, f=sizes["f"], m=sizes["m"])


# outputs ---------------------------------------------------------------------

def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=_json_default)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def write_manifest(out, command, config):
    write_json(os.path.join(out, "manifest.json"), {
        "command": command, "config": config, "seed": config["seed"],
        "format_version": checkpoint.FORMAT_VERSION, "lmn_version": __version__,
    })


def write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


# commands ------------------------------------------------------------------

def cmd_fit_ae(config, out):
    """SVD truncation error and iterative reconstruction error per memory size."""
    splits = load_splits(config["dataset"])
    ae_cfg = config["ae"]
    sequences = [x for x, _ in splits[ae_cfg.get("split", "train")]]
    if ae_cfg.get("unfolded_checkpoint"):
        unfolded = checkpoint.load(ae_cfg["unfolded_checkpoint"])
        sequences = pretrain.collect_hidden_states(unfolded, sequences)
    elif ae_cfg.get("source", "inputs") != "inputs":
        raise ConfigError("ae.source 'hidden' needs ae.unfolded_checkpoint")

    full = seqae.fit(sequences, "auto")
    sweep = ae_cfg.get("sweep")
    if sweep is None:
        sweep = sorted({min(2 ** i, full.p) for i in range(int(np.log2(max(full.p, 1))) + 1)} | {full.p})
    rows = []
    for p in sweep:
        params = seqae.truncate(full, min(int(p), full.p))
        la = seqae.reconstruction_error(params, sequences)["total"]
        rows.append([int(p), repr(seqae.truncation_error(full.singular_values, params.p)), repr(la)])
        checkpoint.save(params, os.path.join(out, f"ae_p{int(p)}.json"), rng_seed=config["seed"])
    write_rows(os.path.join(out, "ae_errors.csv"), ["p", "svd_error", "la_error"], rows)
    return {"rank": full.p, "rows": len(rows)}


def _fit(kind, params, splits, tcfg):
    model_kind = "rnn" if kind == "rnn" else "lmn"
    return train.train_loop(model_kind, params, splits, tcfg)


def cmd_train(config, out):
    splits = load_splits(config["dataset"])
    a, o = io_sizes(splits)
    kind, sizes = config["model"], config["sizes"]
    _, params = make_model(kind, sizes, a, o, config["seed"])
    tcfg = train_config(config["train"], config["seed"])
    best, history = _fit(kind, params, splits, tcfg)
    checkpoint.save(best, os.path.join(out, "checkpoint.json"), rng_seed=config["seed"],
                    meta={"model": kind, "train": config["train"]})
    train.write_history(history, os.path.join(out, "history.csv"))
    metrics = {
        "model": kind,
        "best_val_accuracy": max(r["val_accuracy"] for r in history),
        "test_accuracy": train.evaluate_accuracy(best, splits.get("test") or []),
        "epochs": history[-1]["epoch"],
        "parameter_count": count_params(kind, sizes, a),
    }
    write_json(os.path.join(out, "metrics.json"), metrics)
    return metrics


def cmd_pretrain(config, out):
    splits = load_splits(config["dataset"])
    pcfg = config["pretrain"]
    hidden = pcfg.get("hidden") or config["sizes"]["f"]
    pconf = pretrain.PretrainConfig(
        hidden=hidden, k=pcfg.get("k", 10), p_mem=pcfg.get("p_mem", "auto"),
        max_p_mem=pcfg.get("max_p_mem"), selu_hidden=pcfg.get("selu_hidden", True),
        unfolded_train=train_config(pcfg.get("train", {}), config["seed"]), seed=config["seed"])
    lmn, diag = pretrain.pretrain_pipeline(splits, pconf)

    checkpoint.save(diag["unfolded"], os.path.join(out, "unfolded.json"), rng_seed=config["seed"])
    checkpoint.save(diag["autoencoder"], os.path.join(out, "autoencoder.json"), rng_seed=config["seed"])
    checkpoint.save(lmn, os.path.join(out, "pretrained.json"), rng_seed=config["seed"])
    train.write_history(diag["unfolded_history"], os.path.join(out, "unfolded_history.csv"))
    report = pretrain.diagnostics_json(diag)
    write_json(os.path.join(out, "diagnostics.json"), report)
    rows = [[q, t + 1, repr(err)]
            for q, profile in enumerate(report["per_timestep_error_profile"])
            for t, err in enumerate(profile)]
    write_rows(os.path.join(out, "reconstruction_profile.csv"), ["sequence", "timestep", "error"], rows)

    metrics = {"pretrained_val_accuracy": report["lmn_valid_accuracy"]}
    if pcfg.get("fine_tune", True):
        tcfg = train_config(config["train"], config["seed"])
        tuned, history = train.train_loop("lmn", lmn, splits, tcfg)
        checkpoint.save(tuned, os.path.join(out, "checkpoint.json"), rng_seed=config["seed"],
                        meta={"model": "pret-lmn-b"})
        train.write_history(history, os.path.join(out, "history.csv"))
        metrics["fine_tuned_val_accuracy"] = max(r["val_accuracy"] for r in history)
        metrics["test_accuracy"] = train.evaluate_accuracy(tuned, splits.get("test") or [])
    write_json(os.path.join(out, "metrics.json"), metrics)
    return metrics


def cmd_eval(config, out):
    if not config.get("checkpoint"):
        raise ConfigError("eval needs --checkpoint")
    doc = checkpoint.load_document(config["checkpoint"])
    params = checkpoint.from_dict(doc)
    splits = load_splits(config["dataset"])
    metrics = {"arch": doc["arch"], "variant": doc.get("variant"), "parameters": params.n_params()}
    sizes = doc["sizes"]
    if doc["arch"] == "lmn":
        metrics["parameter_count"] = parameter_count("LMN", sizes["a"], f=sizes["p"], m=sizes["m"])
    elif doc["arch"] == "rnn":
        metrics["parameter_count"] = parameter_count("RNN", sizes["a"], h=sizes["p"])
    for name in data.SPLITS:
        pairs = splits.get(name) or []
        metrics[f"{name}_accuracy"] = train.evaluate_accuracy(params, pairs) if pairs else None
    write_json(os.path.join(out, "metrics.json"), metrics)
    return metrics


def cmd_capacity_sweep(config, out):
    """Validation accuracy for every (size, l2) grid point."""
    splits = load_splits(config["dataset"])
    a, o = io_sizes(splits)
    sw = config["sweep"]
    kind = sw.get("model", "lmn-b")
    if kind == "rnn":
        sizes_list = [{"h": int(h)} for h in sw.get("hidden_grid", HIDDEN_GRID)]
    else:
        sizes_list = [{"f": int(f), "m": int(m)} for f, m in sw.get("lmn_grid", LMN_GRID)]
    l2_grid = sw.get("l2_grid", L2_GRID)
    if not sizes_list or not l2_grid:
        raise ConfigError("sweep grids must be non-empty")
    rows = []
    for sizes in sizes_list:
        for l2 in l2_grid:
            _, params = make_model(kind, sizes, a, o, config["seed"])
            tcfg = train_config(dict(config["train"], l2=float(l2)), config["seed"])
            best, history = _fit(kind, params, splits, tcfg)
            hidden_units = sizes["h"] if kind == "rnn" else sizes["f"] + sizes["m"]
            rows.append([kind, sizes.get("f", ""), sizes.get("m", ""), hidden_units, repr(float(l2)),
                         repr(max(r["val_accuracy"] for r in history)), history[-1]["epoch"],
                         count_params(kind, sizes, a)])
    write_rows(os.path.join(out, "capacity_sweep.csv"),
               ["model", "f", "m", "hidden_units", "l2", "val_accuracy", "epochs", "parameter_count"], rows)
    return {"rows": len(rows)}


COMMANDS = {
    "fit-ae": cmd_fit_ae,
    "train": cmd_train,
    "pretrain": cmd_pretrain,
    "eval": cmd_eval,
    "sweep": cmd_capacity_sweep,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="lmn", description="Linear Memory Network experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (dotted path, JSON value)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--dataset", help="dataset JSON (overrides config)")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "eval":
            p.add_argument("--checkpoint")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = build_config(args)
        os.makedirs(args.out, exist_ok=True)
        write_manifest(args.out, args.command, config)
        result = COMMANDS[args.command](config, args.out)
    except (NumericError, ConvergenceError) as exc:
        log.error("numeric failure: %s", exc)
        return 3
    except (InvalidInputError, KeyError, TypeError, OSError) as exc:
        log.error("configuration error: %s", exc)
        return 2
    log.info("%s done: %s", args.command, json.dumps(result, default=_json_default))
    return 0


if __name__ == "__main__":
    sys.exit(main())
