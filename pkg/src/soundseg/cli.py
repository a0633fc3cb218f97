"""Command-line entry points.

Report-producing subcommands write JSON plus a delimited CSV, an aligned
text table, and a rendered figure into the output directory.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import fixtures as fixtures_mod
from . import synthesis
from .config import load_config
from .fixtures import FixtureSpec
from .ontology import default_alias_path, load_alias_table
from .protocols import (
    evaluate,
    make_openset_split,
    run_finetune_sweep,
    run_zero_shot,
)
from .reports import (
    metrics_table,
    render_class_bar_figure,
    render_sweep_figure,
    sweep_table,
    write_json,
    write_metrics_csv,
    write_sweep_csv,
)
from .train import load_checkpoint, save_checkpoint, train

log = logging.getLogger(__name__)


def _add_config_args(p):
    p.add_argument("--config", default=None, help="key-value config file")
    p.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config key, e.g. --set model.num_queries=8",
    )


def cmd_synthesize(args):
    table = load_alias_table(args.aliases or default_alias_path())
    visual_raw = []
    for path in args.visual:
        if path.endswith(".json"):
            visual_raw.extend(synthesis.iter_coco_instances(path, dataset=args.visual_dataset))
        else:
            visual_raw.extend(synthesis.iter_openimages_csv(path, dataset=args.visual_dataset))
    audio_raw = []
    for path in args.audio:
        audio_raw.extend(synthesis.iter_audio_csv(path, dataset=args.audio_dataset))

    visual = synthesis.collect_visual(visual_raw, table)
    audio = synthesis.collect_audio(audio_raw, table)
    log.info(
        "collected %d visual (%d unresolved, %d malformed), %d audio",
        len(visual), visual.n_unresolved, visual.n_malformed, len(audio),
    )
    triplets = synthesis.compose_triplets(visual.records, audio.records, seed=args.seed)
    manifest = synthesis.split_manifest(triplets, args.test_frac, seed=args.seed)
    synthesis.write_manifest(manifest, args.out)
    print(f"wrote {len(manifest.samples)} triplets ({len(manifest.split_samples('test'))} test) to {args.out}")


def cmd_fixtures(args):
    spec = FixtureSpec(
        canvas=args.canvas,
        classes=tuple(args.classes),
        instances_per_image=(args.instances[0], args.instances[1]),
        clips_per_class=args.clips_per_class,
        style=args.style,
    )
    paths = fixtures_mod.generate_fixtures(spec, args.n, args.seed, args.out)
    print(f"fixtures written under {args.out}")
    for k, v in paths.items():
        print(f"  {k}: {v}")


def cmd_train(args):
    cfg = load_config(args.config, args.overrides)
    manifest = synthesis.read_manifest(args.manifest)
    result = train(cfg, manifest, args.root, max_steps=args.steps)
    save_checkpoint(args.out, result.model, cfg, cfg.seed)
    print(f"trained {result.steps} steps, final loss {result.losses[-1]:.4f}; checkpoint at {args.out}")


def _emit_report(report, out_dir, stem="report"):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_json(report, out / f"{stem}.json")
    (out / f"{stem}.txt").write_text(metrics_table(report), encoding="utf-8")
    write_metrics_csv(report, out / f"{stem}.csv")
    render_class_bar_figure(report, out / f"{stem}.png")
    print(metrics_table(report), end="")


def cmd_eval(args):
    model, cfg, _ = load_checkpoint(args.checkpoint)
    manifest = synthesis.read_manifest(args.manifest)
    report = evaluate(model, manifest, args.root, cfg, split=args.split)
    _emit_report(report, args.out_dir)


def cmd_zero_shot(args):
    model, cfg, _ = load_checkpoint(args.checkpoint)
    manifest = synthesis.read_manifest(args.manifest)
    report = run_zero_shot(model, manifest, args.root, cfg, split=args.split)
    _emit_report(report, args.out_dir, stem="zero_shot")


def cmd_finetune_sweep(args):
    model, cfg, _ = load_checkpoint(args.checkpoint)
    manifest = synthesis.read_manifest(args.manifest)
    rows = run_finetune_sweep(
        model, manifest, args.root, cfg,
        fractions=args.fractions, finetune_steps=args.steps,
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_json(rows, out / "sweep.json")
    write_sweep_csv(rows, out / "sweep.csv")
    (out / "sweep.txt").write_text(sweep_table(rows), encoding="utf-8")
    render_sweep_figure(rows, out / "sweep.png")
    print(sweep_table(rows), end="")


def cmd_split_openset(args):
    manifest = synthesis.read_manifest(args.manifest)
    seen, unseen = make_openset_split(manifest, args.n_seen, args.seed)
    synthesis.write_manifest(seen, args.out_seen)
    synthesis.write_manifest(unseen, args.out_unseen)
    print(
        f"seen: {sorted(seen.class_counts)} ({len(seen.samples)} samples); "
        f"unseen: {sorted(unseen.class_counts)} ({len(unseen.samples)} samples)"
    )


def build_parser():
    parser = argparse.ArgumentParser(prog="soundseg")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", help="compose a triplet manifest from source annotations")
    p.add_argument("--visual", nargs="+", required=True)
    p.add_argument("--audio", nargs="+", required=True)
    p.add_argument("--aliases", default=None)
    p.add_argument("--visual-dataset", default="fixture_visual")
    p.add_argument("--audio-dataset", default="fixture_audio")
    p.add_argument("--test-frac", type=float, default=0.0833)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("fixtures", help="generate procedural fixture data")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--canvas", type=int, default=64)
    p.add_argument("--classes", nargs="+", default=["disk", "square"])
    p.add_argument("--instances", nargs=2, type=int, default=[1, 1])
    p.add_argument("--clips-per-class", type=int, default=4)
    p.add_argument("--style", choices=["synthetic", "real"], default="synthetic")
    p.set_defaults(func=cmd_fixtures)

    p = sub.add_parser("train", help="train a model on a manifest")
    _add_config_args(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--root", required=True)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a manifest split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--root", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("zero-shot", help="evaluate a checkpoint on unseen data")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--root", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_zero_shot)

    p = sub.add_parser("finetune-sweep", help="data-efficient finetuning sweep")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--root", required=True)
    p.add_argument("--fractions", nargs="+", type=float, default=[0.0, 0.1, 0.2, 0.3, 1.0])
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_finetune_sweep)

    p = sub.add_parser("split-openset", help="class-disjoint seen/unseen split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--n-seen", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-seen", required=True)
    p.add_argument("--out-unseen", required=True)
    p.set_defaults(func=cmd_split_openset)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        args.func(args)
    except Exception as exc:  # surface package errors as clean CLI failures
        if args.verbose:
            raise
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
