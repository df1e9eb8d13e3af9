"""Command-line front end: plan, build, validate, sweep, separate, show-config.

Settings resolve as flags > ``--channel-config`` > ``--config`` > defaults.
Config files are ``key = value`` text.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .audio import WORKING_RATE, read_wav, resample, write_wav
from .channel import ChannelModel, SimulatedSession, fake_session, parse_config_text
from .errors import ConfigError, MixforgeError
from .evaluate import (
    parse_distances,
    parse_kinds,
    run_sweep,
    sweep_csv,
    validate_dataset,
    validation_csv,
)
from .gmm import separate_gmm
from .pipeline import build_dataset
from .planner import build_mixture_list, count_for_hours, load_plan, scan_corpus

log = logging.getLogger("mixforge")

SWEEP_DISTANCES = "0.5,1,1.5,2,2.5,3"

DEFAULTS = {
    "working_rate": WORKING_RATE,
    "count": 10,
    "hours": None,
    "plan_seed": 0,
    "max_len_ratio": 1.5,
    "max_uses_per_speaker": 4,
    "gain_jitter_db": 0.0,
    "max_attempts": 5,
    "jobs": 1,
    "mask": "wfm,irm,ibm",
    "pesq_cmd": None,
    "distances": SWEEP_DISTANCES,
    "separate_seed": 0,
}
_CHANNEL_DEFAULTS = {k: getattr(ChannelModel(), k) for k in ChannelModel.config_keys()}

_TYPES = {"working_rate": int, "count": int, "hours": float, "plan_seed": int,
          "max_len_ratio": float, "max_uses_per_speaker": int, "gain_jitter_db": float,
          "max_attempts": int, "jobs": int, "mask": str, "pesq_cmd": str, "distances": str,
          "separate_seed": int}


def _coerce(key, raw):
    if key in _CHANNEL_DEFAULTS:
        return ChannelModel.coerce(key, raw)
    if key not in _TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    if raw is None or (isinstance(raw, str) and raw.strip().lower() in ("", "none")):
        return None
    try:
        return _TYPES[key](raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def resolve_config(args):
    cfg = dict(DEFAULTS)
    cfg.update(_CHANNEL_DEFAULTS)
    for attr, channel_only in (("config", False), ("channel_config", True)):
        path = getattr(args, attr, None)
        if not path:
            continue
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        for key, raw in parse_config_text(p.read_text(encoding="utf-8")).items():
            if channel_only and key not in _CHANNEL_DEFAULTS:
                raise ConfigError(f"{p}: {key!r} is not a channel setting")
            cfg[key] = _coerce(key, raw)
    for key in cfg:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def channel_model(cfg):
    try:
        return ChannelModel(**{k: cfg[k] for k in _CHANNEL_DEFAULTS})
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _emit(text, out):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- commands


def cmd_plan(args, cfg):
    files = scan_corpus(args.corpus_dir, cfg["working_rate"])
    count = count_for_hours(files, cfg["hours"]) if cfg["hours"] else cfg["count"]
    plan = build_mixture_list(files, count, seed=cfg["plan_seed"],
                              max_len_ratio=cfg["max_len_ratio"],
                              max_uses_per_speaker=cfg["max_uses_per_speaker"],
                              gain_jitter_db=cfg["gain_jitter_db"])
    _emit(plan.to_text(), args.out)
    log.info("planned %d mixtures from %d files", len(plan), len(files))
    return 0


def make_session(spec, cfg):
    if spec in (None, "", "sim", "simulator"):
        return SimulatedSession(channel_model(cfg))
    if spec.startswith("fake"):
        _, _, schedule = spec.partition(":")
        return fake_session(schedule)
    if spec == "hardware":
        raise ConfigError("no hardware session adapter is bundled; implement the Session "
                          "protocol (mixforge.channel.Session) for your device")
    raise ConfigError(f"unknown session {spec!r}; use sim or fake:<schedule>")


def cmd_build(args, cfg):
    plan = load_plan(args.plan, cfg["working_rate"])
    session = None if args.synthetic else make_session(args.session, cfg)
    manifest = build_dataset(plan, session, args.out, cfg["max_attempts"], cfg["working_rate"],
                             cfg["jobs"], synthetic=args.synthetic)
    failed = [e.mixture_name for e in manifest.entries if not e.ok]
    log.info("%d/%d entries recorded", len(manifest.entries) - len(failed), len(manifest.entries))
    for name in failed:
        print(f"failed: {name}", file=sys.stderr)
    return 1 if failed else 0


def cmd_validate(args, cfg):
    kinds = parse_kinds(cfg["mask"])
    rows = validate_dataset(args.dataset, kinds, cfg["pesq_cmd"], cfg["jobs"])
    _emit(validation_csv(rows, kinds), args.out)
    return 0


def cmd_sweep(args, cfg):
    kinds = parse_kinds(cfg["mask"])
    distances = parse_distances(cfg["distances"])
    plan = load_plan(args.plan, cfg["working_rate"])
    rows = run_sweep(plan, channel_model(cfg), distances, kinds, args.work_dir,
                     cfg["max_attempts"], cfg["jobs"], cfg["pesq_cmd"], cfg["working_rate"])
    _emit(sweep_csv(rows), args.out)
    return 0


def cmd_separate(args, cfg):
    mix = read_wav(args.mix)
    mix = resample(mix, cfg["working_rate"])
    est1, est2 = separate_gmm(mix, 2, seed=cfg["separate_seed"], working_rate=cfg["working_rate"])
    write_wav(est1, args.out1)
    write_wav(est2, args.out2)
    return 0


def cmd_show_config(args, cfg):
    for key in list(DEFAULTS) + list(_CHANNEL_DEFAULTS):
        value = cfg[key]
        print(f"{key} = {'none' if value is None else value}")
    return 0


def cmd_make_toy_corpus(args, cfg):
    from .toycorpus import make_toy_corpus

    paths = make_toy_corpus(args.out, args.dialects, args.speakers, args.sentences, args.seed)
    log.info("wrote %d files under %s", len(paths), args.out)
    return 0


# ------------------------------------------------------------------ parser


def _channel_flags(p):
    g = p.add_argument_group("channel simulator")
    g.add_argument("--channel-config", help="key = value channel model file")
    g.add_argument("--mic-distance", dest="mic_distance_m", type=float)
    g.add_argument("--source-spacing", dest="source_spacing_m", type=float)
    g.add_argument("--rt60", dest="reverb_rt60_s", type=float)
    g.add_argument("--snr", dest="noise_snr_db", type=float, help="noise SNR in dB (omit for no noise)")
    g.add_argument("--drive", dest="nonlinearity_drive", type=float, help="soft-clip drive, 0 = off")
    g.add_argument("--channel-seed", dest="seed", type=int)


def build_parser():
    parser = argparse.ArgumentParser(prog="mixforge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="key = value settings file")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("--working-rate", dest="working_rate", type=int)
    parser.add_argument("--jobs", type=int, help="parallel entries (simulator only)")
    parser.add_argument("--show-config", action="store_true",
                        help="print effective settings and exit (same as the show-config command)")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("plan", help="scan a corpus and write a mixture plan")
    p.add_argument("--corpus-dir", required=True)
    p.add_argument("--count", type=int)
    p.add_argument("--hours", type=float, help="target corpus size; overrides --count")
    p.add_argument("--seed", dest="plan_seed", type=int)
    p.add_argument("--max-len-ratio", type=float)
    p.add_argument("--max-uses", dest="max_uses_per_speaker", type=int)
    p.add_argument("--gain-jitter-db", type=float)
    p.add_argument("-o", "--out", help="plan file (default stdout)")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("build", help="record ground truths and mixtures for a plan")
    p.add_argument("--plan", required=True)
    p.add_argument("--out", required=True, help="dataset directory")
    p.add_argument("--session", default="sim", help="sim (default) or fake:<schedule>")
    p.add_argument("--synthetic", action="store_true", help="digital sums instead of recordings")
    p.add_argument("--max-attempts", type=int)
    _channel_flags(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("validate", help="score ground truths with ideal masks")
    p.add_argument("--dataset", required=True)
    p.add_argument("--mask", help="comma list of ibm, irm, wfm, mix")
    p.add_argument("--pesq-cmd", help="external PESQ command with {ref} and {deg}")
    p.add_argument("-o", "--out", help="CSV file (default stdout)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("sweep", help="rebuild and validate at several mic distances")
    p.add_argument("--plan", required=True)
    p.add_argument("--distances", help=f"comma list in metres (default {SWEEP_DISTANCES})")
    p.add_argument("--mask")
    p.add_argument("--pesq-cmd")
    p.add_argument("--work-dir", required=True, help="where per-distance datasets are built")
    p.add_argument("--max-attempts", type=int)
    p.add_argument("-o", "--out")
    _channel_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("separate", help="GMM clustering separation of one mixture")
    p.add_argument("--mix", required=True)
    p.add_argument("--out1", required=True)
    p.add_argument("--out2", required=True)
    p.add_argument("--seed", dest="separate_seed", type=int)
    p.set_defaults(func=cmd_separate)

    p = sub.add_parser("show-config", help="print effective settings")
    _channel_flags(p)
    p.set_defaults(func=cmd_show_config)

    p = sub.add_parser("make-toy-corpus", help="write a small speech-like test corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--dialects", type=int, default=4)
    p.add_argument("--speakers", type=int, default=3, help="speakers per dialect")
    p.add_argument("--sentences", type=int, default=3, help="sentences per speaker")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_make_toy_corpus)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.show_config:
        args.command, args.func = "show-config", cmd_show_config
    elif args.command is None:
        parser.error("a command is required")
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return args.func(args, cfg)
    except (MixforgeError, ValueError, OSError) as exc:
        print(f"mixforge {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
