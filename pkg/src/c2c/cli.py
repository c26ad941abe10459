"""``c2c`` command line: segment, featurize, synth, train, eval, ablate.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure (NaN abort).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings

from . import __version__
from .audio_io import PIPELINE_RATE, load_manifest, load_wav, resample_linear, split_dataset, write_wav
from .config import PROFILES, format_config, load_config
from .errors import ConfigError, DataError, NumericalError
from .features import LOG_MEL, RAW_FRAME, extract_features, write_features
from .model.checkpoint import load_checkpoint, save_checkpoint
from .model.network import C2CModel
from .preprocess import preprocess_pipeline, segment
from .synth import SynthSpec, generate_corpus
from .train_eval.ablation import DEFAULT_SUITE, format_table, run_ablation_suite
from .train_eval.trainer import SCENARIOS, ClipStore, build_examples, evaluate, get_scenario, train

log = logging.getLogger("c2c")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Raise instead of exiting so dispatch() owns the exit code."""

    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n\n{self.format_help()}")


def _default_seed():
    raw = os.environ.get("C2C_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"C2C_SEED must be an integer, got {raw!r}") from None


def _add_common(p, config=True):
    p.add_argument("--seed", type=int, default=None,
                   help="random seed (default: $C2C_SEED, else 0)")
    if config:
        p.add_argument("--config", metavar="PATH", help="config file with [section] key = value lines")
        p.add_argument("--profile", choices=sorted(PROFILES), default="desk",
                       help="built-in defaults to start from (default: desk)")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override one config value; repeatable")


def _config(args):
    overrides = {}
    for item in args.overrides:
        key, sep, value = item.partition("=")
        if not sep or "." not in key:
            raise UsageError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        overrides[key.strip()] = value.strip()
    cfg = load_config(args.config, args.profile, overrides)
    return cfg.with_seed(args.seed)


def build_parser():
    parser = _Parser(prog="c2c", description="Cough-based COVID-19 screening pipeline.")
    parser.add_argument("--version", action="version", version=f"c2c {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    p = sub.add_parser("segment", help="cut the cough regions out of one recording")
    p.add_argument("--in", dest="input", required=True, metavar="WAV", help="input recording")
    p.add_argument("--out", required=True, metavar="WAV", help="concatenated cough regions")
    p.add_argument("--regions", metavar="JSON", help="also write the detected regions here")
    _add_common(p)

    p = sub.add_parser("featurize", help="compute a feature matrix for one recording")
    p.add_argument("--in", dest="input", required=True, metavar="WAV", help="input recording")
    p.add_argument("--out", required=True, metavar="PATH", help="C2CF feature file")
    p.add_argument("--frontend", choices=(LOG_MEL, RAW_FRAME), default=LOG_MEL, help="feature kind")
    p.add_argument("--no-preprocess", action="store_true", help="skip cough segmentation")
    _add_common(p)

    p = sub.add_parser("synth", help="generate a labelled synthetic burst corpus")
    p.add_argument("--out-dir", required=True, help="directory for WAVs, manifest.csv and truth.json")
    p.add_argument("--n-clips", type=int, default=SynthSpec.n_clips, help="number of cough clips")
    p.add_argument("--clip-sec", type=float, default=SynthSpec.clip_sec, help="clip duration in seconds")
    p.add_argument("--snr-db", type=float, default=SynthSpec.snr_db, help="burst to background level")
    p.add_argument("--min-bursts", type=int, default=SynthSpec.bursts_per_clip[0], help="fewest bursts per clip")
    p.add_argument("--max-bursts", type=int, default=SynthSpec.bursts_per_clip[1], help="most bursts per clip")
    p.add_argument("--with-breath", action="store_true", help="add a label-free breath clip per subject")
    _add_common(p, config=False)

    p = sub.add_parser("train", help="train one scenario and evaluate it on the held-out split")
    p.add_argument("--manifest", required=True, help="manifest CSV")
    p.add_argument("--out-dir", required=True, help="receives model.c2cm, report.json and config.ini")
    p.add_argument("--scenario", choices=sorted(SCENARIOS), default="C2C", help="pipeline variant")
    _add_common(p)

    p = sub.add_parser("eval", help="score a checkpoint on a manifest")
    p.add_argument("--manifest", required=True, help="manifest CSV")
    p.add_argument("--checkpoint", required=True, help="model.c2cm written by train")
    p.add_argument("--scenario", choices=sorted(SCENARIOS), default="C2C", help="pipeline variant")
    p.add_argument("--split", choices=("validation", "all"), default="validation",
                   help="score the seeded held-out split or every row")
    p.add_argument("--out", metavar="JSON", help="write the report here instead of stdout")
    _add_common(p)

    p = sub.add_parser("ablate", help="run the scenario suite and print the comparison table")
    p.add_argument("--manifest", required=True, help="manifest CSV")
    p.add_argument("--out-dir", help="write per-scenario reports, ablation.txt and ablation.csv here")
    p.add_argument("--scenarios", nargs="+", choices=sorted(SCENARIOS), default=list(DEFAULT_SUITE),
                   metavar="NAME", help=f"subset to run (default: {' '.join(DEFAULT_SUITE)})")
    _add_common(p)
    return parser


# -- subcommands -------------------------------------------------------------

def cmd_segment(args):
    cfg = _config(args)
    clip = resample_linear(load_wav(args.input), PIPELINE_RATE)
    out, regions = segment(clip, cfg.preprocess)
    write_wav(out, args.out)
    if args.regions:
        record = {
            "input": args.input,
            "sample_rate": out.sample_rate,
            "flags": sorted(out.flags),
            "regions": [r.to_dict(out.sample_rate) for r in regions],
        }
        with open(args.regions, "w", encoding="utf-8") as fh:
            json.dump(record, fh, indent=1)
    log.info("%d region(s), %d samples kept", len(regions), len(out))


def cmd_featurize(args):
    cfg = _config(args)
    clip = resample_linear(load_wav(args.input), PIPELINE_RATE)
    if not args.no_preprocess:
        clip = preprocess_pipeline(clip, cfg.preprocess)
    feats = extract_features(clip, args.frontend, cfg.frontend)
    write_features(feats, args.out)
    log.info("%s features, %d x %d", feats.kind, *feats.shape)


def cmd_synth(args):
    spec = SynthSpec(n_clips=args.n_clips, clip_sec=args.clip_sec, snr_db=args.snr_db,
                     bursts_per_clip=(args.min_bursts, args.max_bursts), seed=args.seed,
                     with_breath=args.with_breath)
    manifest, truths = generate_corpus(spec, args.out_dir)
    print(manifest)
    log.info("%d clips written", len(truths))


def _progress(epoch, loss):
    log.info("epoch %d  loss %.4f", epoch, loss)


def cmd_train(args):
    cfg = _config(args)
    entries = load_manifest(args.manifest)
    split = split_dataset(entries, cfg.train.val_fraction, cfg.train.seed)
    root = os.path.dirname(os.path.abspath(args.manifest))
    result = train(split, args.scenario, cfg, root=root, progress=_progress)
    os.makedirs(args.out_dir, exist_ok=True)
    save_checkpoint(result.model.state_dict(), os.path.join(args.out_dir, "model.c2cm"))
    with open(os.path.join(args.out_dir, "report.json"), "w", encoding="utf-8") as fh:
        fh.write(result.report.to_json())
    with open(os.path.join(args.out_dir, "config.ini"), "w", encoding="utf-8") as fh:
        fh.write(format_config(cfg))
    print(f"{args.scenario}  ROC-AUC {result.report.roc_auc:.4f}")


def cmd_eval(args):
    cfg = _config(args)
    scenario = get_scenario(args.scenario)
    entries = load_manifest(args.manifest)
    if args.split == "validation":
        entries = split_dataset(entries, cfg.train.val_fraction, cfg.train.seed).validation
    root = os.path.dirname(os.path.abspath(args.manifest))
    model = C2CModel.from_state_dict(load_checkpoint(args.checkpoint), modality=scenario.modalities[0])
    if model.modalities != scenario.modalities:
        raise ConfigError(f"checkpoint holds {model.modalities} encoders, scenario {scenario.name} "
                          f"needs {scenario.modalities}")
    examples = build_examples(entries, scenario.modalities, root)
    report = evaluate(model, examples, ClipStore(cfg, scenario.preprocess), scenario, cfg,
                      cfg.fingerprint(scenario.name))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(report.to_json())
        print(f"{scenario.name}  ROC-AUC {report.roc_auc:.4f}")
    else:
        print(report.to_json())


def cmd_ablate(args):
    cfg = _config(args)

    def progress(name, report):
        log.info("%s  ROC-AUC %.4f", name, report.roc_auc)

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        reports = run_ablation_suite(args.manifest, cfg, args.scenarios, args.out_dir, progress)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    sys.stdout.write(format_table(reports))


COMMANDS = {
    "segment": cmd_segment,
    "featurize": cmd_featurize,
    "synth": cmd_synth,
    "train": cmd_train,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
}


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_help())
        if args.seed is None:
            args.seed = _default_seed()
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(name)s: %(message)s", stream=sys.stderr)
        COMMANDS[args.command](args)
    except SystemExit as exc:
        # --help and --version
        return EXIT_OK if exc.code in (None, 0) else EXIT_USAGE
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, OSError, ValueError) as exc:
        where = f"{exc.filename}: " if getattr(exc, "filename", None) else ""
        print(f"data error: {where}{exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main():
    sys.exit(dispatch())
