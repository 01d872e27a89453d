"""Command-line entry point: ``leaf-apcen <subcommand> [flags]``.

Every run prints its resolved configuration to stderr as ``key = value``
lines (re-usable as a ``--config`` file) and writes machine-readable
``key=value`` summaries to stdout. Flag values beat config-file values,
which beat built-in defaults.

Exit codes: 0 success, 2 bad arguments or configuration, 3 I/O failure,
4 malformed input data, 5 gradient check failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import augmentation as aug
from . import controller as ctl
from . import gradcheck as gc
from . import kernels
from . import normalization as nz
from . import signal_io as sio
from . import training as tr
from .errors import (
    AliasRisk,
    BadMagic,
    ClipTooShort,
    ConfigInvalid,
    CorruptHeader,
    DimensionOverflow,
    EmptyTestSet,
    NonFiniteInput,
    PoolTooSmall,
    ShapeMismatch,
    SilentClip,
    UnsupportedFormat,
)
from .frontend import FrontendConfig, design_filterbank, energy_map

log = logging.getLogger("leaf_apcen")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_FORMAT, EXIT_GRADCHECK = 0, 2, 3, 4, 5
USAGE_ERRORS = (ConfigInvalid, AliasRisk, ShapeMismatch, EmptyTestSet, PoolTooSmall)
FORMAT_ERRORS = (UnsupportedFormat, CorruptHeader, BadMagic, DimensionOverflow, ClipTooShort,
                 NonFiniteInput, SilentClip)  # fmt: skip
EXTRACT_VARIANTS = ("energy",) + tr.VARIANTS
TRAINED = ("pcen", "simp_pcen", "apcen")
# flags that must be supplied by the command line or the config file
REQUIRED = {
    "extract": ("input", "out"),
    "augment": ("manifest", "out"),
    "synth-task": ("out",),
    "train": ("manifest",),
    "eval": ("checkpoint", "manifest"),
    "inspect-gain": ("input", "checkpoint", "out"),
}


class UsageError(Exception):
    """Bad flag combination detected after parsing."""


# -- config file ---------------------------------------------------------------


def read_config(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment. Keys may use - or _."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for k, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigInvalid(f"{path}:{k}: expected 'key = value', got {raw.strip()!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            if not key:
                raise ConfigInvalid(f"{path}:{k}: empty key")
            out[key.replace("-", "_")] = value
    return out


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigInvalid(f"not a boolean: {text!r}")


def _coerce(action: argparse.Action, text: str):
    if action.nargs == 0 or isinstance(action, argparse.BooleanOptionalAction):
        return _parse_bool(text)
    value = action.type(text) if action.type else text
    if action.choices is not None and value not in action.choices:
        raise ConfigInvalid(f"{action.dest}: {value!r} is not one of {list(action.choices)}")
    return value


def _apply_config(parser, sub, cfg: dict, command: str):
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", argparse.SUPPRESS)}
    main_actions = {a.dest: a for a in parser._actions}
    sub_defaults, main_defaults = {}, {}
    for key, text in cfg.items():
        if key in ("config", "command"):
            continue
        if key in actions:
            sub_defaults[key] = _coerce(actions[key], text)
        elif key in main_actions and key != "help":
            main_defaults[key] = _coerce(main_actions[key], text)
        else:
            raise ConfigInvalid(f"config key {key!r} is not a flag of '{command}'")
    parser.set_defaults(**main_defaults)
    sub.set_defaults(**sub_defaults)


# -- parser --------------------------------------------------------------------


def _common(parser, suppress: bool):
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=d if suppress else 0,
                        help="root seed for every random stream (default: 0)")  # fmt: skip
    parser.add_argument("--config", default=d, help="key = value file; flags override it (default: none)")
    parser.add_argument("-v", "--verbose", action="store_true", default=d if suppress else False,
                        help="debug logging on stderr (default: off)")  # fmt: skip


def _frontend_flags(p):
    g = p.add_argument_group("front-end (ignored when a model checkpoint supplies its own)")
    g.add_argument("--n-filters", type=int, default=40, help="mel-spaced Gabor filters (default: 40)")
    g.add_argument("--kernel-len", type=int, default=150, help="filter length in samples (default: 150)")
    g.add_argument("--pool-len", type=int, default=None, help="pooling length (default: kernel length)")
    g.add_argument("--hop", type=int, default=160, help="frame hop in samples (default: 160)")
    g.add_argument("--f-min", type=float, default=0.0, help="lowest mel breakpoint in Hz (default: 0)")
    g.add_argument("--f-max", type=float, default=None, help="highest mel breakpoint in Hz (default: Nyquist)")


def build_parser():
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="leaf-apcen", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _common(parser, suppress=False)
    subs = parser.add_subparsers(dest="command", metavar="SUBCOMMAND", required=True)
    table = {}

    def add(name, help_):
        p = subs.add_parser(name, help=help_, description=help_, formatter_class=fmt)
        _common(p, suppress=True)
        table[name] = p
        return p

    p = add("extract", "Write normalized feature maps for one WAV file or a directory of them.")
    p.add_argument("--input", help="WAV file or directory of WAV files")
    p.add_argument("--variant", choices=EXTRACT_VARIANTS, default="fixed",
                   help="normalization stage; 'energy' writes the raw pooled energies")  # fmt: skip
    p.add_argument("--checkpoint", help="model checkpoint (or controller weights for apcen)")
    p.add_argument("--out", help="output file (single input) or directory")
    p.add_argument("--format", choices=("bin", "csv"), default="bin", help="output layout")
    _frontend_flags(p)

    p = add("augment", "Perturb a labeled corpus into the four evaluation conditions.")
    p.add_argument("--manifest", help="input manifest.csv")
    p.add_argument("--out", help="output corpus directory")
    p.add_argument("--pool", help="noise pool directory with speech/ and music/ WAVs (default: synthetic)")
    p.add_argument("--snr-min", type=float, default=0.0, help="lowest mixing SNR in dB")
    p.add_argument("--snr-max", type=float, default=15.0, help="highest mixing SNR in dB")
    p.add_argument("--babble-sources", type=int, default=3, help="speech sources summed per babble track")
    p.add_argument("--gain-min", type=float, default=-8.0, help="lowest per-segment gain in dB")
    p.add_argument("--gain-max", type=float, default=8.0, help="highest per-segment gain in dB")
    p.add_argument("--segment-ms", type=float, default=250.0, help="loudness segment length")
    p.add_argument("--crossfade-ms", type=float, default=5.0, help="gain ramp at segment boundaries")
    p.add_argument("--level-min", type=float, default=-40.0, help="lowest segment level in dBFS")
    p.add_argument("--level-max", type=float, default=-15.0, help="highest segment level in dBFS")

    p = add("synth-task", "Generate the 8-class synthetic AM-tone task.")
    p.add_argument("--out", help="output directory")
    p.add_argument("--profile", choices=("clean", "complex"), default="clean",
                   help="'complex' also writes the perturbed corpus")  # fmt: skip
    p.add_argument("--train-per-class", type=int, default=20, help="training clips per class")
    p.add_argument("--val-per-class", type=int, default=8, help="validation clips per class")
    p.add_argument("--test-per-class", type=int, default=8, help="test clips per class")
    p.add_argument("--pool", help="noise pool directory for the complex profile (default: synthetic)")

    p = add("train", "Train one variant and keep the lowest-validation-loss checkpoint.")
    p.add_argument("--manifest", help="corpus manifest.csv with train/val/test splits")
    p.add_argument("--variant", choices=tr.VARIANTS, default="apcen", help="normalization stage")
    p.add_argument("--out", default="run", help="output directory for best.ckpt and history.csv")
    p.add_argument("--scale", choices=("desk", "full"), default="desk",
                   help="preset for the unset optimizer flags: desk = batch 32, 30 epochs, lr 3e-3; "
                        "full = batch 256, 150 epochs, lr 1e-4")  # fmt: skip
    p.add_argument("--epochs", type=int, default=None, help="epochs (default: from --scale)")
    p.add_argument("--batch-size", type=int, default=None, help="batch size (default: from --scale)")
    p.add_argument("--learning-rate", type=float, default=None, help="Adam step size (default: from --scale)")
    p.add_argument("--weight-decay", type=float, default=1e-4, help="decoupled weight decay")
    p.add_argument("--clip-seconds", type=float, default=1.0, help="training crop length")
    p.add_argument("--hidden", type=int, default=ctl.HIDDEN, help="controller GRU width")
    p.add_argument("--mlp-hidden", type=int, default=ctl.MLP_HIDDEN, help="controller MLP width")
    p.add_argument("--backend-hidden", type=int, default=64, help="classifier hidden width")
    p.add_argument("--bptt-window", type=int, default=0, help="truncation window in frames; 0 = full")
    p.add_argument("--controller-axis", choices=("channel", "time"), default="channel",
                   help="axis the controller recurrence runs along")  # fmt: skip
    p.add_argument("--per-channel", action=argparse.BooleanOptionalAction, default=True,
                   help="predict one (alpha, gamma) per channel instead of one per frame")  # fmt: skip
    _frontend_flags(p)

    p = add("eval", "Top-1 accuracy of a checkpoint on one split.")
    p.add_argument("--checkpoint", help="model checkpoint")
    p.add_argument("--manifest", help="corpus manifest.csv")
    p.add_argument("--split", choices=sio.SPLITS, default="test", help="split to score")
    p.add_argument("--clip-seconds", type=float, default=1.0, help="window length for logit averaging")

    p = add("gradcheck", "Compare analytic gradients with central differences.")
    p.add_argument("--module", choices=("all",) + gc.MODULES, default="all", help="which backward pass")
    p.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds starting at --seed")
    p.add_argument("--corrupt", action="store_true",
                   help="test hook: perturb the analytic gradients so the check must fail")  # fmt: skip

    p = add("inspect-gain", "Dump the gain map and the (alpha, gamma) trajectory of an adaptive model.")
    p.add_argument("--input", help="WAV file")
    p.add_argument("--checkpoint", help="apcen model checkpoint or controller weights")
    p.add_argument("--out", help="gain CSV (frames x channels)")
    p.add_argument("--trajectory-out", default=None, help="trajectory CSV (default: <out>_trajectory.csv)")
    _frontend_flags(p)

    p = add("info", "Show the build, default configuration, or the header of a file.")
    p.add_argument("--file", default=None, help="feature file, model checkpoint or controller weights")
    return parser, table


# -- helpers -------------------------------------------------------------------


def _emit(**kv):
    for k, v in kv.items():
        if isinstance(v, float):
            v = f"{v:.9g}"
        print(f"{k}={v}")
    sys.stdout.flush()


def _frontend(args) -> FrontendConfig:
    return FrontendConfig(n_filters=args.n_filters, kernel_len=args.kernel_len, pool_len=args.pool_len,
                          hop=args.hop, f_min=args.f_min, f_max=args.f_max)  # fmt: skip


def _read_bytes(path) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


def load_checkpoint(path):
    """A :class:`training.Model` or bare :class:`controller.ControllerWeights`, by magic."""
    buf = _read_bytes(path)
    if buf[:4] == tr.MODEL_MAGIC:
        return tr.load_model_bytes(buf)
    if buf[:4] == ctl.MAGIC:
        w, used = ctl.weights_from_bytes(buf)
        if used != len(buf):
            raise CorruptHeader(f"{path}: {len(buf) - used} trailing bytes")
        return w
    raise BadMagic(f"{path}: magic {buf[:4]!r} is neither {tr.MODEL_MAGIC!r} nor {ctl.MAGIC!r}")


def _normalizer(args, variant):
    """Return ``(frontend config, E -> X)`` for a feature variant."""
    if variant in TRAINED and not args.checkpoint:
        raise UsageError(f"--checkpoint is required for --variant {variant}")
    ckpt = load_checkpoint(args.checkpoint) if args.checkpoint else None
    if isinstance(ckpt, tr.Model):
        if variant not in ("energy", ckpt.variant):
            raise UsageError(f"--checkpoint holds a {ckpt.variant!r} model, not {variant!r}")
        model = ckpt
        if variant == "energy":
            return model.frontend, lambda E: E
        return model.frontend, lambda E: tr.normalize(model, E)[0]
    fe = _frontend(args)
    if isinstance(ckpt, ctl.ControllerWeights):
        if variant != "apcen":
            raise UsageError("--checkpoint holds controller weights, which only fit --variant apcen")
        return fe, lambda E: ctl.apcen_process(E, ckpt)[0]
    if variant == "energy":
        return fe, lambda E: E
    params = nz.PcenParams.initial(fe.n_filters)
    return fe, lambda E: nz.pcen_forward(E, params)


def _inputs(path: Path) -> list:
    if path.is_dir():
        files = sorted(path.glob("*.wav"))
        if not files:
            raise FileNotFoundError(f"{path}: no .wav files")
        return files
    if not path.exists():
        raise FileNotFoundError(f"{path}: no such file")
    return [path]


# -- subcommands ---------------------------------------------------------------


def cmd_extract(args) -> int:
    fe, norm = _normalizer(args, args.variant)
    src = Path(args.input)
    files = _inputs(src)
    out = Path(args.out)
    suffix = ".csv" if args.format == "csv" else ".apcn"
    if src.is_dir():
        out.mkdir(parents=True, exist_ok=True)
        targets = [out / (f.stem + suffix) for f in files]
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        targets = [out]
    fb = design_filterbank(fe)
    kind = sio.KIND_ENERGY if args.variant == "energy" else sio.KIND_FEATURE
    shape = None
    for f, dst in zip(files, targets):
        clip = sio.read_wav(f)
        X = norm(energy_map(clip.samples, fb))
        shape = X.shape
        if args.format == "csv":
            sio.save_features_csv(X, dst)
        else:
            sio.save_features(X, dst, sample_rate=fe.sample_rate, hop=fe.hop, kind=kind)
        log.info("%s -> %s (%d x %d)", f, dst, *X.shape)
    _emit(files=len(files), frames=shape[0], channels=shape[1], variant=args.variant, out=out)
    return EXIT_OK


def cmd_augment(args) -> int:
    spec = aug.AugmentSpec(
        snr_range_db=(args.snr_min, args.snr_max), n_babble_sources=args.babble_sources,
        gain_range_db=(args.gain_min, args.gain_max), segment_ms=args.segment_ms,
        spl_bounds_dbfs=(args.level_min, args.level_max), crossfade_ms=args.crossfade_ms, seed=args.seed,
    )  # fmt: skip
    if args.pool:
        pool = aug.NoisePool.from_dir(args.pool)
    else:
        pool = aug.NoisePool.synthetic(seed=args.seed)
    rows = aug.build_corpus(args.manifest, pool, args.out, seed=args.seed, spec=spec)
    counts = {c: sum(r.condition == c for r in rows) for c in aug.CONDITIONS}
    _emit(clips=len(rows), **{f"n_{c}": n for c, n in counts.items()},
          manifest=Path(args.out) / "manifest.csv")  # fmt: skip
    return EXIT_OK


def cmd_synth_task(args) -> int:
    spec = tr.SynthTask(args.train_per_class, args.val_per_class, args.test_per_class, profile=args.profile)
    pool = aug.NoisePool.from_dir(args.pool) if args.pool else None
    manifest = tr.generate_task(spec, args.out, seed=args.seed, pool=pool)
    rows = sio.read_manifest(manifest)
    _emit(manifest=manifest, clips=len(rows), classes=len(spec.classes))
    return EXIT_OK


def train_config(args) -> tr.TrainConfig:
    preset = tr.TrainConfig.desk() if args.scale == "desk" else tr.TrainConfig()
    pick = lambda v, d: d if v is None else v  # noqa: E731
    return tr.TrainConfig(
        variant=args.variant, learning_rate=pick(args.learning_rate, preset.learning_rate),
        weight_decay=args.weight_decay, batch_size=pick(args.batch_size, preset.batch_size),
        epochs=pick(args.epochs, preset.epochs), clip_seconds=args.clip_seconds, seed=args.seed,
        hidden=args.hidden, mlp_hidden=args.mlp_hidden, backend_hidden=args.backend_hidden,
        bptt_window=args.bptt_window, controller_axis=args.controller_axis, per_channel=args.per_channel,
    )  # fmt: skip


def cmd_train(args) -> int:
    cfg = train_config(args)

    def progress(epoch, train_loss, val_loss):
        print(f"epoch {epoch}/{cfg.epochs} train_loss={train_loss:.6f} val_loss={val_loss:.6f}", file=sys.stderr)

    res = tr.train(cfg, args.manifest, args.out, frontend=_frontend(args), progress=progress)
    _emit(variant=cfg.variant, best_epoch=res.best_epoch, best_val_loss=res.best_val_loss,
          final_train_loss=res.history[-1][1], seconds=res.seconds, checkpoint=res.checkpoint,
          backend=kernels.BACKEND)  # fmt: skip
    return EXIT_OK


def cmd_eval(args) -> int:
    model = tr.load_model(args.checkpoint)
    res = tr.evaluate(model, args.manifest, split=args.split, clip_seconds=args.clip_seconds)
    _emit(variant=model.variant, split=args.split, accuracy=res.accuracy, n_clips=res.n_clips,
          trajectories_in_box=str(res.trajectories_in_box).lower())  # fmt: skip
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    if args.seeds < 1:
        raise UsageError("--seeds must be >= 1")
    seeds = range(args.seed, args.seed + args.seeds)
    results = gc.run(args.module, seeds, corrupt=args.corrupt)
    for (module, group), r in gc.summarize(results).items():
        print(f"module={module} group={group} max_rel_error={r.rel_error:.3e} threshold={r.threshold:.0e} "
              f"status={'pass' if r.passed else 'FAIL'}")  # fmt: skip
    failed = [r for r in results if not r.passed]
    for r in failed:
        coord = ",".join(str(c) for c in r.worst_coord)
        print(f"gradcheck failure: module={r.module} group={r.group} seed={r.seed} coord=({coord}) "
              f"rel_error={r.rel_error:.3e}", file=sys.stderr)  # fmt: skip
    _emit(groups_checked=len(results), failures=len(failed))
    return EXIT_GRADCHECK if failed else EXIT_OK


def final_gain_change(E, G, floor=1e-6) -> float:
    """Largest relative gain change between the last two frames, over channels carrying energy."""
    if G.shape[0] < 2:
        return 0.0
    live = E[-1] >= floor * max(float(E[-1].max()), 1e-300)
    live &= G[-1] > 0
    if not np.any(live):
        return 0.0
    return float(np.max(np.abs(G[-1, live] - G[-2, live]) / G[-1, live]))


def cmd_inspect_gain(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    if isinstance(ckpt, tr.Model):
        if ckpt.variant != "apcen":
            raise UsageError(f"--checkpoint holds a {ckpt.variant!r} model; inspect-gain needs apcen")
        fe, w = ckpt.frontend, ckpt.norm
    else:
        fe, w = _frontend(args), ckpt
    clip = sio.read_wav(_inputs(Path(args.input))[0])
    E = energy_map(clip.samples, design_filterbank(fe))
    X, traj = ctl.apcen_process(E, w)
    G = ctl.gain_map(E, X)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    traj_out = Path(args.trajectory_out) if args.trajectory_out else out.with_name(out.stem + "_trajectory.csv")
    sio.save_features_csv(G, out)
    T, N = E.shape
    frame, chan = np.meshgrid(np.arange(T), np.arange(N), indexing="ij")
    table = np.column_stack([frame.ravel(), chan.ravel(), traj.alpha.ravel(), traj.gamma.ravel()])
    np.savetxt(traj_out, table, fmt=("%d", "%d", "%.9g", "%.9g"), delimiter=",",
               header="frame,channel,alpha,gamma", comments="")  # fmt: skip
    _emit(frames=T, channels=N, gain_out=out, trajectory_out=traj_out,
          in_box=str(traj.in_box(w.gamma_min, w.gamma_range)).lower(),
          final_gain_change=final_gain_change(E, G))  # fmt: skip
    return EXIT_OK


def cmd_info(args) -> int:
    if args.file is None:
        fe = FrontendConfig()
        _emit(version=__version__, kernels=kernels.BACKEND, n_filters=fe.n_filters, kernel_len=fe.gabor_size,
              hop=fe.hop, sample_rate=fe.sample_rate, controller_params=ctl.init_weights().count())  # fmt: skip
        return EXIT_OK
    buf = _read_bytes(args.file)
    if buf[:4] == sio.FEATURE_MAGIC:
        f = sio.load_features(args.file)
        kind = "energy" if f.kind == sio.KIND_ENERGY else "feature"
        _emit(type=kind, frames=f.values.shape[0], channels=f.values.shape[1], sample_rate=f.sample_rate, hop=f.hop)
        return EXIT_OK
    obj = load_checkpoint(args.file)
    if isinstance(obj, tr.Model):
        extra = {"controller_params": obj.norm.count()} if obj.variant == "apcen" else {}
        _emit(type="model", variant=obj.variant, classes=obj.backend.n_classes, n_filters=obj.frontend.n_filters,
              best_epoch=obj.meta.get("best_epoch", 0), best_val_loss=obj.meta.get("best_val_loss", 0.0),
              **extra)  # fmt: skip
    else:
        _emit(type="controller", axis=obj.axis, per_channel=str(obj.per_channel).lower(), hidden=obj.hidden,
              mlp_hidden=obj.mlp_hidden, params=obj.count())  # fmt: skip
    return EXIT_OK


COMMANDS = {
    "extract": cmd_extract,
    "augment": cmd_augment,
    "synth-task": cmd_synth_task,
    "train": cmd_train,
    "eval": cmd_eval,
    "gradcheck": cmd_gradcheck,
    "inspect-gain": cmd_inspect_gain,
    "info": cmd_info,
}


def parse(argv=None):
    """Parse flags and merge the config file; returns ``(parser, args)``."""
    parser, table = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            cfg = read_config(args.config)
        except OSError as exc:
            parser.exit(EXIT_IO, f"leaf-apcen: cannot read --config: {exc}\n")
        except ConfigInvalid as exc:
            parser.error(str(exc))
        parser, table = build_parser()
        try:
            _apply_config(parser, table[args.command], cfg, args.command)
        except (ConfigInvalid, ValueError) as exc:
            parser.error(str(exc))
        config_path = args.config
        args = parser.parse_args(argv)
        args.config = config_path
    missing = [k for k in REQUIRED.get(args.command, ()) if getattr(args, k, None) in (None, "")]
    if missing:
        table[args.command].error("the following arguments are required: "
                                  + ", ".join("--" + k.replace("_", "-") for k in missing))  # fmt: skip
    return parser, args


def _print_config(args):
    print(f"# leaf-apcen {args.command} resolved config", file=sys.stderr)
    for k, v in sorted(vars(args).items()):
        if k != "command":
            print(f"{k} = {v}", file=sys.stderr)


def main(argv=None) -> int:
    parser, args = parse(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)  # fmt: skip
    _print_config(args)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"leaf-apcen {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except USAGE_ERRORS as exc:
        print(f"leaf-apcen {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FORMAT_ERRORS as exc:
        print(f"leaf-apcen {args.command}: format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except OSError as exc:
        print(f"leaf-apcen {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
