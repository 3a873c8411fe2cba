"""
Command-line interface for boxcap.

One entry point with a subcommand per workflow step: synthesise data, inspect
it, train, fine-tune, generate, evaluate, render and dump the curriculum.
"""

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .. import __version__
from ..core.checkpoint import load_checkpoint, restore_model
from ..core.config import ModelConfig, load_config
from ..core.curriculum import schedule_table
from ..core.inference import CaptionGenerator, read_predictions, write_predictions
from ..core.trainer import FINETUNE, PRETRAIN, Trainer
from ..data.loader import dataset_stats, load_dataset, save_dataset
from ..data.synth import synth_cards
from ..data.vocab import build_vocab
from ..eval.report import REPORT_KEYS, build_report, write_report
from ..model.net import BoxCaptioner
from ..utils.constants import DataDefaults, NeighborModes
from ..utils.errors import BoxcapError
from ..utils.helpers import ensure_directory_exists, seed_everything
from .render import render_captions

logger = logging.getLogger(__name__)

# --neighbors accepts "0" for the no-context variant
NEIGHBOR_CHOICES = {
    "0": NeighborModes.NONE,
    **{mode: mode for mode in NeighborModes.get_modes()},
}


def positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def configure_logging(verbose=False):
    """Configure the root logger once for command-line use."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def _model_overrides(args):
    overrides = {}
    if getattr(args, "no_image", False):
        overrides["use_image"] = False
    if getattr(args, "no_location", False):
        overrides["use_location"] = False
    if getattr(args, "no_info", False):
        overrides["use_info"] = False
    if getattr(args, "neighbors", None):
        overrides["neighbor_mode"] = NEIGHBOR_CHOICES[args.neighbors]
    return overrides


def _train_config(args):
    config, model_values = load_config(args.config)
    changes = {}
    if getattr(args, "strategy", None):
        changes["cm_strategy"] = args.strategy
    if getattr(args, "levels", None):
        changes["cm_levels"] = args.levels
    if args.progress:
        changes["progress"] = True
    if changes:
        config = dataclasses.replace(config, **changes)
    return config, model_values


def cmd_synth(args):
    split = synth_cards(args.n, args.seed, split=args.split)
    path = save_dataset(split, args.out, inline=args.inline)
    print(f"Wrote {len(split)} {args.split} cards to {path}")
    return 0


def cmd_stats(args):
    stats = dataset_stats(load_dataset(args.data, strict=not args.raw))
    print(f"mean captions per image = {stats.mean_captions_per_image:.4f}")
    print(f"mean caption length = {stats.mean_length:.4f}")
    print(f"captions per image = {stats.captions_per_image_histogram}")
    print(f"caption length = {stats.length_histogram}")
    return 0


def cmd_train(args):
    config, model_values = _train_config(args)
    dataset = load_dataset(args.data, split="train")
    seed_everything(config.seed)
    if args.resume:
        model, vocab = restore_model(load_checkpoint(args.resume))
    else:
        vocab = build_vocab(dataset)
        values = {**model_values, **_model_overrides(args), "vocab_size": len(vocab)}
        model = BoxCaptioner(ModelConfig(**values))
    trainer = Trainer(
        model, vocab, dataset, config, args.out, PRETRAIN, resume_from=args.resume
    )
    path = trainer.run()
    print(f"Wrote checkpoint to {path}")
    return 0


def cmd_finetune(args):
    config, model_values = _train_config(args)
    dataset = load_dataset(args.data, split="train")
    seed_everything(config.seed)
    source = args.resume or args.checkpoint
    model, vocab = restore_model(load_checkpoint(source), **model_values)
    trainer = Trainer(
        model, vocab, dataset, config, args.out, FINETUNE, resume_from=args.resume
    )
    path = trainer.run()
    print(f"Wrote checkpoint to {path}")
    return 0


def cmd_generate(args):
    model, vocab = restore_model(load_checkpoint(args.checkpoint), dropout=0.0)
    cards = load_dataset(args.data, split=args.split)
    generator = CaptionGenerator(model, vocab, max_len=args.max_len, beam=args.beam)
    count = write_predictions(args.out, generator.predict(cards))
    print(f"Wrote {count} predictions to {args.out}")
    return 0


def cmd_eval(args):
    references = load_dataset(args.references, split=args.split)
    predictions = read_predictions(args.predictions)
    embedding = vocab = None
    if args.checkpoint:
        model, vocab = restore_model(load_checkpoint(args.checkpoint))
        embedding = model.encoder.word.weight.detach().cpu().numpy()
    report = build_report(
        predictions, references, embedding, vocab, k=args.clusters, seed=args.seed
    )
    write_report(report, args.out, tables=args.tables)
    values = report.as_dict()
    for key in REPORT_KEYS:
        print(f"{key} = {values[key]}")
    return 0


def cmd_render(args):
    cards = load_dataset(args.data, split=args.split)
    if not 0 <= args.index < len(cards):
        raise BoxcapError(
            f"card index {args.index} out of range for {len(cards)} cards"
        )
    card = cards[args.index]
    captions = card.captions
    if args.predictions:
        generated = read_predictions(args.predictions).get(card.card_id)
        if generated is None:
            raise BoxcapError(f"no predictions for card '{card.card_id}'")
        captions = [generated[i][1] for i in sorted(generated)]
    if args.empty:
        captions = []
    out = Path(args.out)
    ensure_directory_exists(out.parent)
    render_captions(card.image, card.boxes, captions, scale=args.scale).save(out)
    print(f"Rendered card '{card.card_id}' to {out}")
    return 0


def cmd_schedule_dump(args):
    rows = schedule_table(args.max_step, args.every)
    lines = ["step,p1,p2,p3"]
    lines.extend(f"{step},{p1:.12g},{p2:.12g},{p3:.12g}" for step, p1, p2, p3 in rows)
    text = "\n".join(lines) + "\n"
    if args.out:
        out = Path(args.out)
        ensure_directory_exists(out.parent)
        out.write_text(text, encoding="utf-8")
        print(f"Wrote {len(rows)} rows to {out}")
    else:
        sys.stdout.write(text)
    return 0


def _add_training_arguments(parser):
    parser.add_argument("--config", required=True, help="flat key = value config file")
    parser.add_argument("--data", required=True, help="training dataset file")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--resume", help="checkpoint of an interrupted run to continue")
    parser.add_argument(
        "--strategy",
        choices=("progressive", "fixed"),
        help="caption-matching level strategy",
    )
    parser.add_argument("--levels", help="enabled caption-matching levels, e.g. I,II")
    parser.add_argument("--progress", action="store_true", help="show a progress bar")


def build_parser():
    """Build the argument parser."""
    parser = argparse.ArgumentParser(
        prog="box-captioner",
        description="Generate captions for text boxes on product images.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth", help="write a synthetic dataset")
    synth.add_argument("--n", type=positive_int, required=True, help="number of cards")
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--split", choices=("train", "valid", "test"), default="train")
    synth.add_argument("--out", required=True, help="dataset file to write")
    synth.add_argument("--inline", action="store_true", help="embed images as arrays")
    synth.set_defaults(handler=cmd_synth)

    stats = commands.add_parser("stats", help="caption length and count statistics")
    stats.add_argument("--data", required=True)
    stats.add_argument("--raw", action="store_true", help="skip the caption filters")
    stats.set_defaults(handler=cmd_stats)

    train = commands.add_parser(
        "train", help="pre-train with caption generation and matching"
    )
    _add_training_arguments(train)
    for name, part in (
        ("--no-image", "image tokens"),
        ("--no-location", "location token"),
        ("--no-info", "product info"),
    ):
        train.add_argument(name, action="store_true", help=f"replace the {part}")
    train.add_argument(
        "--neighbors",
        choices=tuple(NEIGHBOR_CHOICES),
        help="neighbour context of the location token",
    )
    train.set_defaults(handler=cmd_train)

    finetune = commands.add_parser(
        "finetune", help="fine-tune with caption generation only"
    )
    _add_training_arguments(finetune)
    finetune.add_argument("--checkpoint", required=True, help="pre-trained checkpoint")
    finetune.set_defaults(handler=cmd_finetune)

    generate = commands.add_parser("generate", help="write a prediction file")
    generate.add_argument("--checkpoint", required=True)
    generate.add_argument("--data", required=True)
    generate.add_argument("--split", choices=("train", "valid", "test"), default="test")
    generate.add_argument("--out", required=True, help="prediction file to write")
    generate.add_argument("--beam", type=positive_int, default=1, help="beam width")
    generate.add_argument(
        "--max-len",
        type=positive_int,
        default=DataDefaults.MAX_CAPTION_TOKENS,
        help="maximum caption tokens",
    )
    generate.set_defaults(handler=cmd_generate)

    evaluate = commands.add_parser("eval", help="score predictions against references")
    evaluate.add_argument("--predictions", required=True)
    evaluate.add_argument("--references", required=True)
    evaluate.add_argument("--split", choices=("train", "valid", "test"), default="test")
    evaluate.add_argument("--out", required=True, help="report file to write")
    evaluate.add_argument(
        "--checkpoint", help="model whose embeddings cluster caption types"
    )
    evaluate.add_argument("--clusters", type=positive_int, default=4)
    evaluate.add_argument("--seed", type=int, default=0)
    evaluate.add_argument("--tables", action="store_true", help="also write CSV tables")
    evaluate.set_defaults(handler=cmd_eval)

    render = commands.add_parser("render", help="draw captions into their boxes")
    render.add_argument("--data", required=True)
    render.add_argument("--split", choices=("train", "valid", "test"), default="test")
    render.add_argument("--index", type=int, default=0, help="card index in the file")
    render.add_argument(
        "--predictions", help="use generated instead of reference captions"
    )
    render.add_argument("--empty", action="store_true", help="draw no captions")
    render.add_argument("--scale", type=positive_int, default=1)
    render.add_argument("--out", required=True, help="PNG file to write")
    render.set_defaults(handler=cmd_render)

    dump = commands.add_parser("schedule-dump", help="write the curriculum table")
    dump.add_argument("--max-step", type=positive_int, required=True)
    dump.add_argument("--every", type=positive_int, default=1)
    dump.add_argument("--out", help="CSV file; stdout when omitted")
    dump.set_defaults(handler=cmd_schedule_dump)

    return parser


def main(argv=None):
    """
    Run the command line.

    Args:
        argv (list): Arguments without the program name; sys.argv when None

    Returns:
        int: Exit status, 0 on success, 1 on errors, 2 on usage errors
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    configure_logging(args.verbose)
    try:
        return args.handler(args)
    except KeyboardInterrupt:
        print("\nInterrupted by user", file=sys.stderr)
        return 130
    except (BoxcapError, OSError, ValueError) as e:
        logger.debug("Command failed", exc_info=True)
        print(f"Error: {e}", file=sys.stderr)
        return 1
