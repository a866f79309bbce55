"""``signkit`` command line: synth, convert, split, occlude, train, eval, analyze.

Exit codes: 0 success, 1 data or runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import analysis_report
from .features import DEFAULT_COMPONENTS, PoseFeaturizer
from .models import (
    FLIP_MODES,
    MODEL_KINDS,
    LabeledSample,
    PredictionOutcome,
    TrainConfig,
    evaluate,
    history_to_ndjson,
    load_model,
    train,
)
from .nn import ShapeMismatch, make_rng
from .pose import PoseFormatError, UnknownComponent, load_layout, read_pose, select_components, write_pose
from .synthetic import (
    OcclusionMode,
    OcclusionSpec,
    OcclusionTarget,
    SynthesisConfig,
    TooFewSigners,
    generate_dataset,
    occlude_samples,
    signer_disjoint_split,
)

log = logging.getLogger("signkit")

MANIFEST_COLUMNS = ("sample_id", "file_path", "class_id", "signer_id")
OUTCOME_COLUMNS = (
    "sample_id", "true_label", "predicted_label", "correct", "dominant_hand_presence", "multi_symbol_flag",
)
CHECKPOINT = "checkpoint.bin"
HISTORY = "history.ndjson"
OUTCOMES = "outcomes.csv"
REPORT = "report.json"
HIST = "hist.csv"


class DataError(Exception):
    """Bad input data; reported with exit code 1."""


# --------------------------------------------------------------------------- #
# manifests and outcome tables


@dataclass(frozen=True)
class ManifestRow:
    sample_id: str
    file_path: str  # relative to the manifest's directory
    class_id: int
    signer_id: str


def read_manifest(path) -> list[ManifestRow]:
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as f:
            reader = csv.DictReader(f)
            if tuple(reader.fieldnames or ()) != MANIFEST_COLUMNS:
                raise DataError(f"{path}: expected header {','.join(MANIFEST_COLUMNS)}")
            rows = []
            for n, r in enumerate(reader, start=2):
                try:
                    rows.append(ManifestRow(r["sample_id"], r["file_path"], int(r["class_id"]), r["signer_id"]))
                except (TypeError, ValueError) as e:
                    raise DataError(f"{path}:{n}: bad row ({e})") from None
    except OSError as e:
        raise DataError(f"cannot read manifest: {e}") from None
    seen = set()
    for r in rows:
        if r.sample_id in seen:
            raise DataError(f"{path}: duplicate sample_id {r.sample_id}")
        seen.add(r.sample_id)
    return rows


def write_manifest(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(MANIFEST_COLUMNS)
        for r in rows:
            w.writerow([r.sample_id, r.file_path, r.class_id, r.signer_id])


def load_samples(manifest) -> tuple[list[LabeledSample], Path]:
    """Read every pose listed in a manifest; errors name the failing sample."""
    manifest = Path(manifest)
    base = manifest.parent
    out = []
    for r in read_manifest(manifest):
        try:
            pose = read_pose(base / r.file_path)
        except (OSError, PoseFormatError) as e:
            raise DataError(f"sample {r.sample_id}: {e}") from None
        out.append(LabeledSample(r.sample_id, pose, r.class_id, r.signer_id))
    return out, base


def save_samples(samples, out_dir: Path) -> list[ManifestRow]:
    """Write poses under ``out_dir/poses`` plus ``out_dir/manifest.csv``."""
    pose_dir = out_dir / "poses"
    pose_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for s in samples:
        rel = f"poses/{s.sample_id}.pose"
        write_pose(out_dir / rel, s.pose)
        rows.append(ManifestRow(s.sample_id, rel, int(s.label), s.signer_id))
    write_manifest(out_dir / "manifest.csv", rows)
    return rows


def write_outcomes(path, outcomes) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(OUTCOME_COLUMNS)
        for o in outcomes:
            w.writerow([
                o.sample_id, o.true_label, "" if o.predicted_label is None else o.predicted_label,
                int(o.correct), repr(float(o.dominant_hand_presence)), int(o.multi_symbol_flag),
            ])


def read_outcomes(path) -> list[PredictionOutcome]:
    try:
        with open(path, newline="", encoding="utf-8") as f:
            reader = csv.DictReader(f)
            if tuple(reader.fieldnames or ()) != OUTCOME_COLUMNS:
                raise DataError(f"{path}: expected header {','.join(OUTCOME_COLUMNS)}")
            out = []
            for n, r in enumerate(reader, start=2):
                try:
                    pred = r["predicted_label"]
                    out.append(PredictionOutcome(
                        sample_id=r["sample_id"],
                        true_label=int(r["true_label"]),
                        predicted_label=None if pred == "" else int(pred),
                        correct=bool(int(r["correct"])),
                        dominant_hand_presence=float(r["dominant_hand_presence"]),
                        multi_symbol_flag=bool(int(r["multi_symbol_flag"])),
                    ))
                except (TypeError, ValueError) as e:
                    raise DataError(f"{path}:{n}: bad row ({e})") from None
    except OSError as e:
        raise DataError(f"cannot read outcomes: {e}") from None
    return out


# --------------------------------------------------------------------------- #
# commands


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_synth(args) -> int:
    cfg = SynthesisConfig(
        classes=args.classes, samples_per_class=args.samples, signers=args.signers,
        frames=(args.frames_min, args.frames_max), seed=args.seed,
    )
    rows = save_samples(generate_dataset(cfg), _out_dir(args))
    print(f"wrote {len(rows)} samples to {args.out}")
    return 0


def cmd_convert(args) -> int:
    samples, _ = load_samples(args.manifest)
    components = load_layout(args.layout).components
    names = [c.name for c in components]
    out = []
    for s in samples:
        try:
            pose = select_components(s.pose, names)
        except UnknownComponent as e:
            raise DataError(f"sample {s.sample_id}: {e.args[0]}") from None
        out.append(LabeledSample(s.sample_id, pose, s.label, s.signer_id))
    save_samples(out, _out_dir(args))
    print(f"converted {len(out)} samples to layout {args.layout}")
    return 0


def cmd_split(args) -> int:
    rows = read_manifest(args.manifest)
    samples = [LabeledSample(r.sample_id, None, r.class_id, r.signer_id) for r in rows]
    train_s, val_s = signer_disjoint_split(samples, args.train_fraction, args.seed)
    by_id = {r.sample_id: r for r in rows}
    out = _out_dir(args)
    base = Path(args.manifest).parent
    for name, part in (("train.csv", train_s), ("val.csv", val_s)):
        write_manifest(out / name, [_rebase(by_id[s.sample_id], base, out) for s in part])
    print(f"train: {len(train_s)} samples, val: {len(val_s)} samples")
    return 0


def _rebase(row: ManifestRow, src: Path, dst: Path) -> ManifestRow:
    rel = os.path.relpath(src / row.file_path, dst)
    return ManifestRow(row.sample_id, Path(rel).as_posix(), row.class_id, row.signer_id)


def cmd_occlude(args) -> int:
    samples, _ = load_samples(args.manifest)
    spec = OcclusionSpec(OcclusionMode(args.mode), OcclusionTarget(args.target), args.fraction, args.seed)
    n_hit = int(np.floor(args.sample_fraction * len(samples) + 0.5))
    hit = set(make_rng(args.seed, 500).choice(len(samples), size=n_hit, replace=False).tolist())
    chosen = [s for i, s in enumerate(samples) if i in hit]
    occluded = {s.sample_id: s for s in occlude_samples(chosen, spec)}
    out = [occluded.get(s.sample_id, s) for s in samples]
    save_samples(out, _out_dir(args))
    print(f"occluded {len(chosen)} of {len(samples)} samples ({spec.mode.value}, fraction {spec.fraction})")
    return 0


def _featurizer(args):
    comps = DEFAULT_COMPONENTS if args.components is None else tuple(args.components.split(","))
    return PoseFeaturizer(components=comps)


def cmd_train(args) -> int:
    samples, _ = load_samples(args.manifest)
    if args.val_manifest:
        train_s = samples
        val_s, _ = load_samples(args.val_manifest)
    else:
        try:
            train_s, val_s = signer_disjoint_split(samples, args.train_fraction, args.split_seed)
        except TooFewSigners as e:
            raise DataError(str(e)) from None
    cfg = TrainConfig(batch_size=args.batch, epochs=args.epochs, seed=args.seed,
                      learning_rate=args.lr, flip_mode=args.flip_mode)
    if args.model == "bilstm":
        model = MODEL_KINDS["bilstm"](
            projection_dim=args.projection_dim, lstm_hidden=args.hidden, lstm_layers=args.layers,
            dropout=args.dropout, featurizer=_featurizer(args), verbose=args.verbose,
        )
    else:
        model = MODEL_KINDS["transformer-ctc"](
            d_model=args.d_model, heads=args.heads, blocks=args.blocks, ff_dim=args.ff_dim,
            dropout=args.dropout, beam_width=args.beam_width, featurizer=_featurizer(args),
            verbose=args.verbose,
        )
    _check_samples(model, train_s + val_s)
    history = train(model, train_s, cfg, eval_set=val_s)
    out = _out_dir(args)
    model.save(out / CHECKPOINT)
    (out / HISTORY).write_text(history_to_ndjson(history), encoding="utf-8")
    val = [h for h in history if h["split"] == "validation"]
    if val:
        print(f"validation accuracy: {val[-1]['accuracy']:.4f}")
    print(f"train accuracy (last epoch): {history[-1 - bool(val)]['accuracy']:.4f}")
    return 0


def _check_samples(model, samples):
    """Featurize each sample once up front so a failure names its sample_id."""
    feat = model.featurizer if model.featurizer is not None else PoseFeaturizer()
    for s in samples:
        try:
            feat.prepare(s.pose)
        except (UnknownComponent, ValueError) as e:
            msg = e.args[0] if e.args else type(e).__name__
            raise DataError(f"sample {s.sample_id}: {msg}") from None


def cmd_eval(args) -> int:
    try:
        model = load_model(args.checkpoint)
    except OSError as e:
        raise DataError(f"cannot read checkpoint: {e}") from None
    except (KeyError, ValueError) as e:
        raise DataError(f"bad checkpoint {args.checkpoint}: {e}") from None
    samples, _ = load_samples(args.manifest)
    if model.featurizer_ is not None:
        _check_samples_fitted(model, samples)
    _, outcomes = evaluate(model, samples)
    accuracy = float(np.mean([o.correct for o in outcomes])) if outcomes else 0.0
    write_outcomes(_out_dir(args) / OUTCOMES, outcomes)
    print(f"accuracy: {accuracy:.4f}")
    return 0


def _check_samples_fitted(model, samples):
    for s in samples:
        try:
            model.featurizer_.prepare(s.pose)
        except (UnknownComponent, ValueError) as e:
            msg = e.args[0] if e.args else type(e).__name__
            raise DataError(f"sample {s.sample_id}: {msg}") from None


def cmd_analyze(args) -> int:
    outcomes = read_outcomes(args.outcomes)
    if not outcomes:
        raise DataError("outcomes file has no rows: both presence groups are empty")
    report = analysis_report(outcomes, bins=args.bins, method=args.method)
    out = _out_dir(args)
    (out / REPORT).write_text(report.to_json(), encoding="utf-8")
    (out / HIST).write_text(report.histogram_csv(), encoding="utf-8")
    print(report.summary())
    if report.test is None:
        print(f"notice: rank-sum test skipped ({report.test_skipped_reason})")
    return 0


# --------------------------------------------------------------------------- #
# parser


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _unit_float(text):
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"must be in [0, 1], got {v}")
    return v


def _open_unit_float(text):
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"must be in (0, 1), got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="signkit", description="Pose-based isolated sign recognition toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic labeled dataset")
    s.add_argument("--classes", type=_positive_int, default=10)
    s.add_argument("--samples", type=_positive_int, default=50, help="samples per class")
    s.add_argument("--signers", type=_positive_int, default=6)
    s.add_argument("--frames-min", type=int, default=12)
    s.add_argument("--frames-max", type=int, default=20)
    s.add_argument("--seed", type=int, default=7)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("convert", help="reduce poses to a layout's components (e.g. 543 -> 75 points)")
    s.add_argument("--manifest", required=True)
    s.add_argument("--layout", default="holistic_75")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_convert)

    s = sub.add_parser("split", help="signer-disjoint train/val manifests")
    s.add_argument("--manifest", required=True)
    s.add_argument("--train-fraction", type=_open_unit_float, default=0.8)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_split)

    s = sub.add_parser("occlude", help="write an occluded copy of a dataset")
    s.add_argument("--manifest", required=True)
    s.add_argument("--mode", required=True, choices=[m.value for m in OcclusionMode])
    s.add_argument("--target", default="dominant", choices=[t.value for t in OcclusionTarget])
    s.add_argument("--fraction", type=_unit_float, required=True, help="fraction of frames blanked")
    s.add_argument("--sample-fraction", type=_unit_float, default=1.0,
                   help="fraction of samples occluded (chosen with --seed)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_occlude)

    s = sub.add_parser("train", help="train a model; writes checkpoint.bin and history.ndjson")
    s.add_argument("--model", required=True, choices=sorted(MODEL_KINDS))
    s.add_argument("--manifest", required=True)
    s.add_argument("--val-manifest", help="validation manifest (default: signer-disjoint split)")
    s.add_argument("--train-fraction", type=_open_unit_float, default=0.8)
    s.add_argument("--split-seed", type=int, default=0)
    s.add_argument("--epochs", type=_positive_int, default=30)
    s.add_argument("--batch", type=int, default=512)
    s.add_argument("--lr", type=float, default=1e-3)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--flip-mode", choices=FLIP_MODES, default="off")
    s.add_argument("--components", help="comma-separated components (default BODY,LEFT_HAND,RIGHT_HAND)")
    s.add_argument("--dropout", type=float, default=None)
    g = s.add_argument_group("bilstm")
    g.add_argument("--projection-dim", type=_positive_int, default=512)
    g.add_argument("--hidden", type=_positive_int, default=256)
    g.add_argument("--layers", type=_positive_int, default=2)
    g = s.add_argument_group("transformer-ctc")
    g.add_argument("--d-model", type=_positive_int, default=128)
    g.add_argument("--heads", type=_positive_int, default=8)
    g.add_argument("--blocks", type=_positive_int, default=2)
    g.add_argument("--ff-dim", type=_positive_int, default=256)
    g.add_argument("--beam-width", type=_positive_int, default=5)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="evaluate a checkpoint; writes outcomes.csv")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--manifest", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("analyze", help="presence analysis; writes report.json and hist.csv")
    s.add_argument("--outcomes", required=True)
    s.add_argument("--bins", type=_positive_int, default=10)
    s.add_argument("--method", choices=("auto", "exact", "normal"), default="auto")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_analyze)
    return p


def _validate(parser, args):
    if args.command == "synth":
        if args.signers < 2:
            parser.error("--signers must be >= 2: signer-disjoint splits need at least two signers")
        if not 2 <= args.frames_min <= args.frames_max:
            parser.error("need 2 <= --frames-min <= --frames-max")
    if args.command == "train":
        if args.batch < 2:
            parser.error("--batch must be >= 2 (batch norm needs two rows)")
        if args.dropout is None:
            args.dropout = 0.2 if args.model == "bilstm" else 0.1
        if not 0 <= args.dropout < 1:
            parser.error("--dropout must be in [0, 1)")
        if args.model == "transformer-ctc" and (args.d_model % args.heads or args.d_model % 2):
            parser.error("--d-model must be even and divisible by --heads")


def _thread_limit():
    raw = os.environ.get("SIGNKIT_THREADS")
    if raw is None or raw == "":
        return None
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        raise ValueError(f"SIGNKIT_THREADS must be a positive integer, got {raw!r}")
    return n


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _validate(parser, args)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        threads = _thread_limit()
    except ValueError as e:
        print(f"signkit: error: {e}", file=sys.stderr)
        return 2
    try:
        if threads is None:
            return args.func(args)
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=threads):
            return args.func(args)
    except DataError as e:
        print(f"signkit: error: {e}", file=sys.stderr)
        return 1
    except ShapeMismatch as e:
        print(f"signkit: shape mismatch: {e}", file=sys.stderr)
        return 1
    except (PoseFormatError, UnknownComponent, TooFewSigners, OSError, ValueError) as e:
        print(f"signkit: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
