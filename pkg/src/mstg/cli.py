"""Command-line surface: synth, train, predict, eval, gradcheck, export-graphs."""

import argparse
import sys
from pathlib import Path

import numpy as np

from .checks import run_suite
from .config import load_config
from .data import (
    MotionSequence,
    extract_windows,
    load_motion_csv,
    save_motion_csv,
    synth_generate,
)
from .graphs import SkeletonSpec
from .metrics import mae
from .model import MotionModel
from .training import load_model, save_checkpoint, train


def _load_dataset(data_dir, config):
    data_dir = Path(data_dir)
    skeleton_path = data_dir / "skeleton.txt"
    if not skeleton_path.exists():
        raise FileNotFoundError(f"{skeleton_path}: skeleton file not found")
    skeleton = SkeletonSpec.from_file(skeleton_path)
    csvs = sorted(p for p in data_dir.glob("*.csv"))
    if not csvs:
        raise FileNotFoundError(f"{data_dir}: no .csv motion files")
    pairs = []
    for path in csvs:
        seq = load_motion_csv(path)
        if seq.joints != skeleton.joint_count or seq.channels != skeleton.channels:
            raise ValueError(
                f"{path}: sequence is {seq.joints}x{seq.channels} but skeleton "
                f"is {skeleton.joint_count}x{skeleton.channels}"
            )
        pairs.extend(
            extract_windows(seq.frames, config.observed_frames,
                            config.predict_frames, config.window_stride)
        )
    if config.limit_windows > 0:
        pairs = pairs[:config.limit_windows]
    return skeleton, pairs


def _cmd_synth(args):
    seq = synth_generate(args.joints, args.frames, args.seed, channels=args.channels)
    save_motion_csv(args.out, seq)
    if args.skeleton_out:
        SkeletonSpec.chain(args.joints, args.channels).to_file(args.skeleton_out)
    print(f"wrote {args.frames} frames x {args.joints} joints to {args.out}")
    return 0


def _cmd_train(args):
    config = load_config(args.config)
    skeleton, pairs = _load_dataset(args.data, config)
    config.with_skeleton(skeleton).validate()
    model = MotionModel(config, skeleton)
    rows, optimizer = train(pairs, model, config, log_path=args.log)
    save_checkpoint(args.out, model, optimizer)
    last = rows[-1]
    print(
        f"trained {last.step} steps over {last.epoch + 1} epochs on "
        f"{len(pairs)} windows; final loss {last.total:.6g}, "
        f"train MAE {last.mae:.6g}"
    )
    print(f"checkpoint: {args.out}")
    return 0


def _cmd_predict(args):
    model, config, _, _ = load_model(args.checkpoint)
    seq = load_motion_csv(args.input)
    skeleton = config.skeleton()
    if seq.joints != skeleton.joint_count or seq.channels != skeleton.channels:
        raise ValueError(
            f"{args.input}: sequence is {seq.joints}x{seq.channels} but the "
            f"checkpoint expects {skeleton.joint_count}x{skeleton.channels}"
        )
    if len(seq.frames) < config.observed_frames:
        raise ValueError(
            f"{args.input}: need at least {config.observed_frames} frames, "
            f"got {len(seq.frames)}"
        )
    observed = seq.frames[-config.observed_frames:]
    pred, _ = model.predict(observed)
    save_motion_csv(args.out, MotionSequence(pred.data, unit=seq.unit))
    print(f"wrote {config.predict_frames} predicted frames to {args.out}")
    return 0


def _cmd_eval(args):
    model, config, _, _ = load_model(args.checkpoint)
    _, pairs = _load_dataset(args.data, config)
    horizon_sums = np.zeros(config.predict_frames)
    for observed, future in pairs:
        pred, _ = model.predict(observed)
        per_horizon, _ = mae(pred.data, future)
        horizon_sums += per_horizon
    per_horizon = horizon_sums / len(pairs)
    print("horizon,mae")
    for i, err in enumerate(per_horizon, start=1):
        print(f"{i},{err:.6g}")
    print(f"mean,{per_horizon.mean():.6g}")
    return 0


def _cmd_gradcheck(args):
    ok = run_suite(seed=args.seed)
    print("gradient suite:", "pass" if ok else "FAIL")
    return 0 if ok else 1


def _save_matrix(path, matrix):
    with open(path, "w", encoding="utf-8") as fh:
        for row in np.atleast_2d(matrix):
            fh.write(",".join(f"{v:.6g}" for v in row) + "\n")


def _cmd_export_graphs(args):
    model, config, _, _ = load_model(args.checkpoint)
    seq = load_motion_csv(args.input)
    if len(seq.frames) < config.observed_frames:
        raise ValueError(
            f"{args.input}: need at least {config.observed_frames} frames"
        )
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    _, aux = model.predict(seq.frames[-config.observed_frames:])
    written = 0
    for i, block in enumerate(model.encoder.blocks):
        _save_matrix(outdir / f"block{i}_spatial_adj.csv",
                     block.spatial_graph.adjacency.data)
        _save_matrix(outdir / f"block{i}_temporal_adj.csv",
                     block.temporal_graph.adjacency.data)
        written += 2
        block_aux = aux.blocks[i]
        for r, (pool, unpool, coarse) in enumerate(
            zip(block_aux.pool_ops, block_aux.unpool_ops, block_aux.coarse_graphs),
            start=1,
        ):
            _save_matrix(outdir / f"block{i}_scale{r}_pool.csv", pool.data)
            _save_matrix(outdir / f"block{i}_scale{r}_unpool.csv", unpool.data)
            _save_matrix(outdir / f"block{i}_scale{r}_adj.csv", coarse.data)
            written += 3
    print(f"wrote {written} matrices to {outdir}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mstg",
        description="Skeleton motion prediction with multiscale spatio-temporal graphs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic motion CSV")
    p.add_argument("--joints", type=int, default=6)
    p.add_argument("--frames", type=int, default=120)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--channels", type=int, default=3)
    p.add_argument("--out", required=True)
    p.add_argument("--skeleton-out", help="also write the chain skeleton file")
    p.set_defaults(fn=_cmd_synth)

    p = sub.add_parser("train", help="train on a directory of motion CSVs")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True, help="dir with skeleton.txt and *.csv")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--log", help="metrics CSV path")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("predict", help="predict future frames from observed CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_predict)

    p = sub.add_parser("eval", help="MAE table over a directory of sequences")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("gradcheck", help="run the finite-difference suite")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_gradcheck)

    p = sub.add_parser("export-graphs", help="dump learned graphs and pooling maps")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True, help="motion CSV conditioning the pooling")
    p.add_argument("--outdir", required=True)
    p.set_defaults(fn=_cmd_export_graphs)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (FileNotFoundError, ValueError, ArithmeticError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
