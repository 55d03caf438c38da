"""Command-line pipeline: synth, train, score, eval, plot.

Configuration is one flat JSON document; every key has a default and a
matching command-line flag that overrides it. Unknown config keys are
rejected so typos fail loudly. All validation happens before any output
file is touched.

Exit codes: 0 success, 1 configuration error, 2 data/parse error,
3 numeric failure during training.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import data as data_mod
from . import synth as synth_mod
from .detector import load_score_csv, score_series, write_score_csv
from .errors import ConfigError, DataError, NumericError, ParseError
from .evaluator import best_f1, evaluate
from .model import FCVAE, FCVAEConfig
from .trainer import TrainConfig, train

log = logging.getLogger(__name__)

MODEL_KEYS = ("window", "small_window", "small_window_stride", "cond_dim", "latent_dim",
              "hidden", "dropout", "lfm_mode", "use_gfm", "use_lfm", "mc_samples",
              "mask_last", "plain_elbo")
TRAIN_KEYS = ("epochs", "batch_size", "lr", "missing_rate", "augment_rate", "seed",
              "valid_fraction")

DEFAULTS = {
    # windowing / model geometry
    "window": 120,
    "stride": 1,
    "small_window": 30,
    "small_window_stride": 10,
    "cond_dim": 32,
    "latent_dim": 8,
    "hidden": [100, 100],
    "dropout": 0.1,
    "lfm_mode": "attention",
    "use_gfm": True,
    "use_lfm": True,
    "mc_samples": 1,
    "mask_last": True,
    "plain_elbo": False,
    # training
    "epochs": 50,
    "batch_size": 256,
    "lr": 1e-3,
    "missing_rate": 0.05,
    "augment_rate": 0.1,
    "valid_fraction": 0.0,
    "seed": 0,
    "ignore_labels": False,
    # detector
    "mcmc_iters": 10,
    "score_samples": 32,
    # evaluator
    "delay": 7,
}


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; remap to the config exit code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def load_run_config(path: str | None, overrides: dict) -> dict:
    """Defaults, then config file, then CLI flags; reject unknown keys."""
    cfg = dict(DEFAULTS)
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            doc = json.loads(p.read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"{p}: not valid JSON ({e})") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{p}: config must be a JSON object")
        unknown = set(doc) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(doc)
    for key, value in overrides.items():
        if value is not None:
            cfg[key] = value
    validate_run_config(cfg)
    return cfg


def validate_run_config(cfg: dict) -> None:
    """Cross-check every section before any work starts."""
    model_config(cfg).validate()
    train_config(cfg).validate()
    pre = data_mod.PreprocessConfig(window=cfg["window"], stride=cfg["stride"],
                                    missing_rate=cfg["missing_rate"],
                                    augment_rate=cfg["augment_rate"], seed=cfg["seed"])
    pre.validate()
    if cfg["mcmc_iters"] < 0:
        raise ConfigError(f"mcmc_iters must be >= 0, got {cfg['mcmc_iters']}")
    if cfg["score_samples"] < 1:
        raise ConfigError(f"score_samples must be >= 1, got {cfg['score_samples']}")
    if cfg["delay"] < 0:
        raise ConfigError(f"delay must be >= 0, got {cfg['delay']}")
    if not isinstance(cfg["ignore_labels"], bool):
        raise ConfigError(f"ignore_labels must be a boolean, got {cfg['ignore_labels']!r}")


def model_config(cfg: dict) -> FCVAEConfig:
    return FCVAEConfig(**{k: cfg[k] for k in MODEL_KEYS})


def train_config(cfg: dict) -> TrainConfig:
    return TrainConfig(**{k: cfg[k] for k in TRAIN_KEYS})


def _preprocess_training_set(dataset, ignore_labels: bool):
    curves, stats = [], {}
    for ts in dataset:
        if ignore_labels:
            ts = ts.copy()
            ts.labels[:] = 0
        prepped, mean, std = data_mod.preprocess_curve(ts, use_labels=True)
        curves.append(prepped)
        stats[ts.curve_id] = (mean, std)
    return curves, stats


# ---------------------------------------------------------------------------
# subcommands


def cmd_train(args) -> int:
    cfg = load_run_config(args.config, _collect_overrides(args))
    dataset = data_mod.load_dataset(args.data)
    curves, stats = _preprocess_training_set(dataset, cfg["ignore_labels"])

    model, history = train(curves, model_config(cfg), train_config(cfg))
    model.stats = stats

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    model.save(out)
    history.write_csv(out.with_name(out.stem + "_history.csv"))
    with open(out.with_name(out.stem + "_config.json"), "w") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")
    log.info("wrote model to %s", out)
    return 0


def cmd_score(args) -> int:
    overrides = {"mcmc_iters": args.mcmc_iters, "score_samples": args.score_samples,
                 "seed": args.seed}
    model = FCVAE.load(args.model)
    cfg = dict(DEFAULTS)
    cfg.update(model.config.to_dict())
    if args.config is not None:
        file_cfg = load_run_config(args.config, {})
        if file_cfg["window"] != model.config.window:
            raise ConfigError(
                f"config window {file_cfg['window']} does not match model window "
                f"{model.config.window}")
        cfg.update(file_cfg)
    for key, value in overrides.items():
        if value is not None:
            cfg[key] = value

    dataset = data_mod.load_dataset(args.data)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for ts in dataset:
        filled = data_mod.fill_missing(ts, use_labels=False)
        if ts.curve_id in model.stats:
            mean, std = model.stats[ts.curve_id]
        else:
            present = ~filled.missing
            mean = float(filled.values[present].mean())
            std = float(filled.values[present].std())
            if std < 1e-8:
                std = 1.0
            log.warning("curve %s not in training stats; standardizing with its own stats",
                        ts.curve_id)
        prepped = data_mod.apply_standardization(filled, mean, std)
        ss = score_series(prepped, model, n_iters=cfg["mcmc_iters"],
                          n_samples=cfg["score_samples"], seed=cfg["seed"])
        write_score_csv(ss, out_dir / f"{ts.curve_id}.csv")
        log.info("scored curve %s (%d points)", ts.curve_id, len(ss))
    return 0


def cmd_eval(args) -> int:
    scores_dir = Path(args.scores)
    if not scores_dir.is_dir():
        raise DataError(f"scores directory not found: {scores_dir}")
    files = sorted(scores_dir.glob("*.csv"))
    if not files:
        raise DataError(f"no score CSVs in {scores_dir}")
    series = [load_score_csv(p) for p in files]
    report = evaluate(series, delay=args.delay)
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if args.out is not None:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text + "\n")
    return 0


def cmd_synth(args) -> int:
    if args.curves < 1:
        raise ConfigError(f"--curves must be >= 1, got {args.curves}")
    if args.length < 2:
        raise ConfigError(f"--length must be >= 2, got {args.length}")
    if not 0.0 <= args.anomaly_rate < 0.5:
        raise ConfigError(f"--anomaly-rate must be in [0, 0.5), got {args.anomaly_rate}")
    curves = synth_mod.generate_dataset(args.curves, args.length, args.anomaly_rate,
                                        seed=args.seed)
    paths = synth_mod.write_dataset(curves, args.out)
    log.info("wrote %d curves to %s", len(paths), args.out)
    return 0


def cmd_plot(args) -> int:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ss = load_score_csv(args.scores)
    values = None
    if args.data is not None:
        ts = data_mod.load_csv(args.data)
        if len(ts) == len(ss):
            values = ts.values
        else:
            log.warning("data series length %d != score length %d; skipping value trace",
                        len(ts), len(ss))

    n_axes = 2 if values is not None else 1
    fig, axes = plt.subplots(n_axes, 1, figsize=(12, 3 * n_axes), sharex=True, squeeze=False)
    axes = axes[:, 0]
    x = np.arange(len(ss))

    if values is not None:
        ax = axes[0]
        ax.plot(x, values, lw=0.7, color="tab:blue", label="value")
        for s, e in _runs(ss.labels):
            ax.axvspan(s, e + 1, color="tab:red", alpha=0.2)
        ax.set_ylabel("value")
        ax.legend(loc="upper right")

    ax = axes[-1]
    defined = ss.defined
    ax.plot(x[defined], ss.scores[defined], lw=0.7, color="tab:orange", label="anomaly score")
    if ss.labels.any() and defined.any():
        thr = best_f1(ss).threshold
        ax.axhline(thr, color="tab:green", ls="--", lw=1.0,
                   label=f"best-F1 threshold {thr:.3g}")
    for s, e in _runs(ss.labels):
        ax.axvspan(s, e + 1, color="tab:red", alpha=0.2)
    ax.set_ylabel("score")
    ax.set_xlabel("index")
    ax.legend(loc="upper right")
    fig.suptitle(f"curve {ss.curve_id}")
    fig.tight_layout()
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, format="svg")
    plt.close(fig)
    log.info("wrote plot to %s", out)
    return 0


def _runs(labels):
    from .evaluator import label_runs
    return label_runs(labels)


# ---------------------------------------------------------------------------
# argument wiring


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file (flat keys, see README)")
    p.add_argument("--window", type=int, help="window length W")
    p.add_argument("--stride", type=int, help="window stride for training")
    p.add_argument("--small-window", dest="small_window", type=int, help="LFM small-window length")
    p.add_argument("--small-window-stride", dest="small_window_stride", type=int,
                   help="LFM small-window stride")
    p.add_argument("--cond-dim", dest="cond_dim", type=int, help="condition embedding dimension")
    p.add_argument("--latent-dim", dest="latent_dim", type=int, help="latent dimension")
    p.add_argument("--dropout", type=float, help="dropout rate in the condition extractors")
    p.add_argument("--mc-samples", dest="mc_samples", type=int,
                   help="latent draws per training loss evaluation")
    p.add_argument("--epochs", type=int, help="training epochs")
    p.add_argument("--batch-size", dest="batch_size", type=int, help="training batch size")
    p.add_argument("--lr", type=float, help="Adam learning rate")
    p.add_argument("--missing-rate", dest="missing_rate", type=float,
                   help="per-point missing-injection probability")
    p.add_argument("--augment-rate", dest="augment_rate", type=float,
                   help="fraction of windows replaced by synthetic anomalies")
    p.add_argument("--valid-fraction", dest="valid_fraction", type=float,
                   help="fraction of windows held out for validation loss")
    p.add_argument("--seed", type=int, help="master seed")
    # ablations
    p.add_argument("--no-gfm", dest="use_gfm", action="store_false", default=None,
                   help="disable the global frequency condition")
    p.add_argument("--no-lfm", dest="use_lfm", action="store_false", default=None,
                   help="disable the local frequency condition")
    p.add_argument("--lfm-mode", dest="lfm_mode", choices=["attention", "latest", "average_pooling"],
                   help="how LFM fuses small-window embeddings")
    p.add_argument("--no-augment", dest="no_augment", action="store_true",
                   help="disable anomaly augmentation (augment_rate = 0)")
    p.add_argument("--no-mask-last", dest="mask_last", action="store_false", default=None,
                   help="compute conditions without masking the last point")
    p.add_argument("--plain-elbo", dest="plain_elbo", action="store_true", default=None,
                   help="disable alpha/beta weighting in the training objective")
    p.add_argument("--ignore-labels", dest="ignore_labels", action="store_true", default=None,
                   help="train as if all labels were 0 (fully unsupervised protocol)")


def _collect_overrides(args) -> dict:
    keys = ("window", "stride", "small_window", "small_window_stride", "cond_dim",
            "latent_dim", "dropout", "mc_samples", "epochs", "batch_size", "lr",
            "missing_rate", "augment_rate", "valid_fraction", "seed", "use_gfm",
            "use_lfm", "lfm_mode", "mask_last", "plain_elbo", "ignore_labels")
    overrides = {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}
    if getattr(args, "no_augment", False):
        overrides["augment_rate"] = 0.0
    return overrides


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fcvae",
                     description="Frequency-conditioned VAE anomaly detection for "
                                 "univariate time series")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model on a dataset directory")
    p.add_argument("--data", required=True, help="directory of curve CSVs")
    p.add_argument("--out", required=True, help="output model JSON path")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="score a dataset with a trained model")
    p.add_argument("--model", required=True, help="trained model JSON")
    p.add_argument("--data", required=True, help="directory of curve CSVs")
    p.add_argument("--out", required=True, help="output directory for score CSVs")
    p.add_argument("--config", help="optional config JSON; must agree with the model")
    p.add_argument("--mcmc-iters", dest="mcmc_iters", type=int,
                   help="imputation iterations per window")
    p.add_argument("--score-samples", dest="score_samples", type=int,
                   help="latent draws per score")
    p.add_argument("--seed", type=int, help="scoring seed")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="evaluate score CSVs against their labels")
    p.add_argument("--scores", required=True, help="directory of score CSVs")
    p.add_argument("--delay", type=int, default=DEFAULTS["delay"],
                   help="max allowed detection delay in points (default %(default)s)")
    p.add_argument("--out", help="optional path for the report JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate the synthetic benchmark dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--curves", type=int, default=5, help="number of curves (default %(default)s)")
    p.add_argument("--length", type=int, default=5000, help="points per curve (default %(default)s)")
    p.add_argument("--anomaly-rate", dest="anomaly_rate", type=float, default=0.01,
                   help="fraction of anomalous points (default %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="generator seed (default %(default)s)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("plot", help="render value/score traces to SVG")
    p.add_argument("--scores", required=True, help="score CSV for one curve")
    p.add_argument("--out", required=True, help="output SVG path")
    p.add_argument("--data", help="optional matching curve CSV for the value trace")
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except (DataError, ParseError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2
    except NumericError as e:
        print(f"numeric error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
