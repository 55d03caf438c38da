"""Train, score, and evaluate on your own labeled dataset.

Point this script at a directory of curve CSVs and it runs the whole
pipeline: preprocessing, model training, anomaly scoring, and the
adjusted-F1 evaluation. Everything it produces lands in --workdir:

    model.json            trained model (config + weights + per-curve stats)
    model_history.csv     per-epoch training loss
    scores/<curve>.csv    one anomaly score per point (blank during warm-up)
    report.json           pooled and per-curve precision/recall/F1
    plots/<curve>.svg     value and score traces (with --plots)

Input format, one CSV per curve, filename is the curve id:

    timestamp,value,label
    0,0.731,0
    60,0.645,0
    120,,0
    240,4.918,1

- timestamps are integers on a regular grid; gaps and empty value
  fields are treated as missing and filled by linear interpolation;
- label 1 marks a known anomalous point, 0 (or unlabeled data with
  all zeros) means normal;
- labeled and missing points are excluded from the standardization
  statistics and, during training, carry zero weight in the loss.

The evaluation follows the usual streaming convention: a detection
anywhere within the first `--delay` points of an anomalous segment
credits the whole segment, later detections do not. The threshold is
chosen by sweeping all observed scores and keeping the best F1, so the
report is an upper bound over fixed thresholds, comparable across
models scored on the same data.

Typical use:

    python3 demos/run_dataset.py --data my_curves/ --workdir out/
    python3 demos/run_dataset.py --data my_curves/ --workdir out/ \
        --epochs 30 --window 60 --delay 3 --plots

If your curves have no labels at all the training still works (it is
unsupervised); the evaluation step is skipped because there is nothing
to score against.
"""

import argparse
import json
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from fcvae import cli as fcvae_cli
from fcvae.data import load_dataset


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--data", required=True, help="directory of curve CSVs")
    ap.add_argument("--workdir", required=True, help="output directory")
    ap.add_argument("--epochs", type=int, default=50)
    ap.add_argument("--window", type=int, default=120)
    ap.add_argument("--small-window", type=int, default=30)
    ap.add_argument("--small-window-stride", type=int, default=10)
    ap.add_argument("--latent-dim", type=int, default=8)
    ap.add_argument("--cond-dim", type=int, default=32)
    ap.add_argument("--delay", type=int, default=7,
                    help="max detection delay credited by the evaluation")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--plots", action="store_true", help="also render SVG traces")
    args = ap.parse_args(argv)

    work = Path(args.workdir)
    model_path = work / "model.json"
    scores_dir = work / "scores"
    size_flags = ["--window", str(args.window),
                  "--small-window", str(args.small_window),
                  "--small-window-stride", str(args.small_window_stride),
                  "--latent-dim", str(args.latent_dim),
                  "--cond-dim", str(args.cond_dim),
                  "--seed", str(args.seed)]

    t0 = time.time()
    print(f"training on {args.data} ({args.epochs} epochs)")
    code = fcvae_cli.main(["train", "--data", args.data, "--out", str(model_path),
                           "--epochs", str(args.epochs)] + size_flags)
    if code != 0:
        return code
    print(f"trained in {time.time() - t0:.1f}s; scoring")
    code = fcvae_cli.main(["score", "--model", str(model_path), "--data", args.data,
                           "--out", str(scores_dir), "--seed", str(args.seed)])
    if code != 0:
        return code

    labeled = any(ts.labels.any() for ts in load_dataset(args.data))
    if labeled:
        code = fcvae_cli.main(["eval", "--scores", str(scores_dir),
                               "--delay", str(args.delay),
                               "--out", str(work / "report.json")])
        if code != 0:
            return code
        report = json.loads((work / "report.json").read_text())
        best = report["dataset"]["best_f1"]
        delayed = report["dataset"]["delay_f1"]
        print(f"dataset best F1 {best['f1']:.4f} "
              f"(precision {best['precision']:.4f}, recall {best['recall']:.4f})")
        print(f"dataset F1 at delay {args.delay}: {delayed['f1']:.4f}")
    else:
        print("no labels found; skipping evaluation")

    if args.plots:
        for score_csv in sorted(scores_dir.glob("*.csv")):
            curve = score_csv.stem
            fcvae_cli.main(["plot", "--scores", str(score_csv),
                            "--data", str(Path(args.data) / f"{curve}.csv"),
                            "--out", str(work / "plots" / f"{curve}.svg")])
    print(f"done in {time.time() - t0:.1f}s; outputs in {work}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
