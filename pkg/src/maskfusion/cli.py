"""Command-line surface: corpus synthesis, oracle enhancement, training,
checkpoint-based enhancement, metric evaluation, and fusion sweeps.

Configuration comes from an optional `key = value` file (--config) with
`#` comments; command-line flags override file values. Exit codes:
0 success, 2 usage/config error, 3 data or file-format error, 4 numeric
failure (training divergence).
"""
import argparse
import os
import sys

import numpy as np

from . import evalkit
from .dsp import Waveform, magnitude, stft
from .estimator import (
    EstimatorConfig,
    TrainConfig,
    TrainItem,
    TrainingDivergedError,
    checkpoint_bytes,
    load_checkpoint,
    predict_masks,
    train,
)
from .ioutil import atomic_write_bytes, atomic_write_text
from .masks import (
    FusionParams,
    Mask,
    compute_irm,
    compute_tbm,
    enhance,
    fuse_masks,
    save_mask,
)
from .wavio import FormatError, wav_read, wav_write


class ConfigError(ValueError):
    """Bad configuration file or key."""


CONFIG_DEFAULTS = {
    "seed": 0,
    "train_utts": 60,
    "dev_utts": 10,
    "test_utts": 10,
    "duration": 2.0,
    "snrs": "-5,0,5,10",
    "epochs": 20,
    "learning_rate": 1e-3,
    "batch_frames": 256,
    "alpha": 0.1,
    "context": 5,
    "hidden1": 200,
    "hidden2": 300,
    "delta": 0.5,
    "gamma": 0.5,
    "deltas": "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1",
    "gammas": "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1",
    "metric": "si_sdr",
}


def load_config(path):
    """Parse `key = value` lines; '#' starts a comment; unknown keys rejected."""
    values = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, raw = line.partition("=")
            key = key.strip()
            raw = raw.strip()
            if key not in CONFIG_DEFAULTS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            default = CONFIG_DEFAULTS[key]
            try:
                values[key] = type(default)(raw)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return values


def resolve(args, key):
    """Flag value if given, else config-file value, else default."""
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    return args._config.get(key, CONFIG_DEFAULTS[key])


def parse_float_list(text):
    try:
        return tuple(float(v) for v in str(text).split(","))
    except ValueError as exc:
        raise ConfigError(f"bad number list {text!r}: {exc}") from None


# ---------------------------------------------------------------------------
# Corpus on disk
# ---------------------------------------------------------------------------


def _snr_tag(snr):
    return f"snr{snr:+g}"


def cmd_synth(args):
    spec = evalkit.CorpusSpec(
        seed=int(resolve(args, "seed")),
        n_train=int(resolve(args, "train_utts")),
        n_dev=int(resolve(args, "dev_utts")),
        n_test=int(resolve(args, "test_utts")),
        duration=float(resolve(args, "duration")),
        snrs=parse_float_list(resolve(args, "snrs")),
    )
    corpus = evalkit.synth_corpus(spec)
    out = args.out
    manifest = []
    for split in ("train", "dev", "test"):
        os.makedirs(os.path.join(out, split), exist_ok=True)
        seen_clean = set()
        for mix in corpus.split(split):
            base = mix.utt_id.split("/")[1]
            if mix.utt_id not in seen_clean:
                rel = f"{split}/{base}_clean.wav"
                wav_write(os.path.join(out, rel), mix.clean)
                manifest.append(f"{mix.utt_id},clean,{rel},,{spec.seed}")
                seen_clean.add(mix.utt_id)
            for kind, wave in (("noise", mix.noise), ("noisy", mix.noisy)):
                rel = f"{split}/{base}_{_snr_tag(mix.snr_db)}_{kind}.wav"
                wav_write(os.path.join(out, rel), wave)
                manifest.append(f"{mix.utt_id},{kind},{rel},{mix.snr_db:g},{spec.seed}")
    atomic_write_text(os.path.join(out, "manifest.txt"), "\n".join(manifest) + "\n")
    print(f"wrote {len(manifest)} files under {out}")
    return 0


def load_corpus_dir(corpus_dir):
    """Read a synthesized corpus back from its manifest.

    Returns {split: [(utt_id, snr_db, clean, noise, noisy), ...]}.
    """
    manifest_path = os.path.join(corpus_dir, "manifest.txt")
    if not os.path.exists(manifest_path):
        raise FormatError(f"{manifest_path}: manifest not found")
    cleans = {}
    entries = {}
    order = []
    with open(manifest_path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 5:
                raise FormatError(f"{manifest_path}:{lineno}: expected 5 fields")
            utt_id, kind, rel, snr, _seed = parts
            path = os.path.join(corpus_dir, rel)
            if kind == "clean":
                cleans[utt_id] = path
            else:
                key = (utt_id, float(snr))
                if key not in entries:
                    entries[key] = {}
                    order.append(key)
                entries[key][kind] = path
    splits = {"train": [], "dev": [], "test": []}
    for (utt_id, snr), paths in ((k, entries[k]) for k in order):
        split = utt_id.split("/")[0]
        if split not in splits:
            raise FormatError(f"{manifest_path}: unknown split in id {utt_id!r}")
        if "noise" not in paths or "noisy" not in paths:
            raise FormatError(f"{manifest_path}: incomplete mixture {utt_id} at {snr} dB")
        splits[split].append(
            (
                utt_id,
                snr,
                wav_read(cleans[utt_id]),
                wav_read(paths["noise"]),
                wav_read(paths["noisy"]),
            )
        )
    return splits


def _oracle_targets(clean, noise, noisy):
    clean_mag = magnitude(stft(clean))
    noise_mag = magnitude(stft(noise))
    noisy_mag = magnitude(stft(noisy))
    irm = compute_irm(clean_mag, noise_mag)
    tbm = compute_tbm(clean_mag)
    return noisy_mag, irm, tbm


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _metrics_line(label, est, ref):
    return (
        f"{label}: si_sdr={evalkit.si_sdr(est, ref):.3f} dB  "
        f"segsnr={evalkit.segmental_snr(est, ref):.3f} dB  "
        f"lsd={evalkit.log_spectral_distance(est, ref):.3f} dB"
    )


def cmd_oracle(args):
    clean = wav_read(args.clean)
    noise = wav_read(args.noise)
    noisy, scaled = evalkit.mix_at_snr(clean, noise, args.snr, seed=int(resolve(args, "seed")))
    clean_cut = Waveform(clean.samples[: len(noisy)])
    noisy_mag, irm, tbm = _oracle_targets(clean_cut, scaled, noisy)

    if args.mask == "irm":
        mask = irm
    elif args.mask == "tbm":
        mask = tbm
    else:
        p = FusionParams(float(resolve(args, "delta")), float(resolve(args, "gamma")))
        mask = fuse_masks(irm, Mask(tbm.data, "soft"), p)

    out = enhance(noisy, mask)
    wav_write(args.out, out)
    if args.mask_dump:
        save_mask(args.mask_dump, mask)
    print(_metrics_line("before", noisy, clean_cut))
    print(_metrics_line("after ", out, clean_cut))
    return 0


def cmd_train(args):
    splits = load_corpus_dir(args.corpus_dir)
    if not splits["train"] or not splits["dev"]:
        raise FormatError(f"{args.corpus_dir}: corpus is missing train or dev mixtures")
    def build_items(rows):
        items = []
        for _, _, clean, noise, noisy in rows:
            noisy_mag, irm, tbm = _oracle_targets(clean, noise, noisy)
            items.append(TrainItem(noisy_mag, irm.data, tbm.data))
        return items

    train_items = build_items(splits["train"])
    dev_items = build_items(splits["dev"])
    cfg = EstimatorConfig(
        context=int(resolve(args, "context")),
        hidden1=int(resolve(args, "hidden1")),
        hidden2=int(resolve(args, "hidden2")),
        seed=int(resolve(args, "seed")),
    )
    tcfg = TrainConfig(
        learning_rate=float(resolve(args, "learning_rate")),
        epochs=int(resolve(args, "epochs")),
        batch_frames=int(resolve(args, "batch_frames")),
        alpha=float(resolve(args, "alpha")),
        seed=int(resolve(args, "seed")),
    )
    params, stats, log = train(train_items, dev_items, cfg, tcfg)
    atomic_write_bytes(args.out, checkpoint_bytes(params, stats, cfg))
    log_lines = [
        f"epoch={e.epoch} train={e.train_loss:.10e} dev={e.dev_loss:.10e} kept={int(e.kept)}"
        for e in log
    ]
    atomic_write_text(args.log, "\n".join(log_lines) + "\n")
    for line in log_lines:
        print(line)
    print(f"checkpoint written to {args.out}")
    return 0


def cmd_enhance(args):
    noisy = wav_read(args.noisy)
    params, stats, cfg = load_checkpoint(args.checkpoint)
    irm_est, tbm_est = predict_masks(params, noisy, stats, cfg.context)
    p = FusionParams(float(resolve(args, "delta")), float(resolve(args, "gamma")))
    fused = fuse_masks(irm_est, tbm_est, p)
    out = enhance(noisy, fused)
    wav_write(args.out, out)
    if args.dump_irm:
        save_mask(args.dump_irm, irm_est)
    if args.dump_tbm:
        save_mask(args.dump_tbm, tbm_est)
    print(f"enhanced {args.noisy} -> {args.out} (delta={p.delta}, gamma={p.gamma})")
    return 0


def cmd_sweep(args):
    if not args.oracle and not args.checkpoint:
        raise ConfigError("sweep needs either --oracle or --ckpt CHECKPOINT")
    splits = load_corpus_dir(args.corpus_dir)
    mixtures = splits[args.split]
    if not mixtures:
        raise FormatError(f"{args.corpus_dir}: no {args.split} mixtures in corpus")

    items = []
    if args.oracle:
        for _, snr, clean, noise, noisy in mixtures:
            _, irm, tbm = _oracle_targets(clean, noise, noisy)
            items.append(
                evalkit.SweepItem(irm, Mask(tbm.data, "soft"), noisy, clean, snr)
            )
    else:
        params, stats, cfg = load_checkpoint(args.checkpoint)
        for _, snr, clean, _, noisy in mixtures:
            irm_est, tbm_est = predict_masks(params, noisy, stats, cfg.context)
            items.append(evalkit.SweepItem(irm_est, tbm_est, noisy, clean, snr))

    grid = evalkit.SweepGrid(
        deltas=parse_float_list(resolve(args, "deltas")),
        gammas=parse_float_list(resolve(args, "gammas")),
        metric=str(resolve(args, "metric")),
    )
    report = evalkit.sweep_fusion(items, grid)
    table = evalkit.report_text(report)
    if args.out_table:
        atomic_write_text(args.out_table, table)
    if args.out_csv:
        atomic_write_text(args.out_csv, evalkit.report_csv(report))
    print(table, end="")
    return 0


# ---------------------------------------------------------------------------
# Parser / entry point
# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="maskfusion",
        description="Time-frequency mask fusion speech enhancement toolkit",
    )
    parser.add_argument("--config", help="key = value configuration file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--out", required=True, help="output corpus directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--train-utts", dest="train_utts", type=int)
    p.add_argument("--dev-utts", dest="dev_utts", type=int)
    p.add_argument("--test-utts", dest="test_utts", type=int)
    p.add_argument("--duration", type=float)
    p.add_argument("--snrs", help="comma-separated SNR list in dB")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("oracle", help="mix and enhance with oracle masks")
    p.add_argument("clean", help="clean speech WAV")
    p.add_argument("noise", help="noise WAV")
    p.add_argument("--snr", type=float, required=True)
    p.add_argument("--mask", choices=("irm", "tbm", "fuse"), default="irm")
    p.add_argument("--delta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--out", required=True, help="enhanced WAV path")
    p.add_argument("--mask-dump", dest="mask_dump", help="write the applied mask dump")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("train", help="train the two-head mask estimator")
    p.add_argument("corpus_dir")
    p.add_argument("--out", default="model.mfnn", help="checkpoint path")
    p.add_argument("--log", default="train_log.txt", help="per-epoch loss log path")
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--batch-frames", dest="batch_frames", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--context", type=int)
    p.add_argument("--hidden1", type=int)
    p.add_argument("--hidden2", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("enhance", help="enhance a noisy WAV with a trained model")
    p.add_argument("noisy")
    p.add_argument("checkpoint")
    p.add_argument("--delta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--out", required=True)
    p.add_argument("--dump-irm", dest="dump_irm")
    p.add_argument("--dump-tbm", dest="dump_tbm")
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("sweep", help="evaluate the (delta, gamma) fusion grid")
    p.add_argument("corpus_dir")
    p.add_argument("--ckpt", dest="checkpoint", help="model checkpoint")
    p.add_argument("--oracle", action="store_true", help="use oracle masks instead")
    p.add_argument("--split", choices=("train", "dev", "test"), default="test")
    p.add_argument("--deltas", help="comma-separated delta grid")
    p.add_argument("--gammas", help="comma-separated gamma grid")
    p.add_argument("--metric", choices=sorted(evalkit.METRICS))
    p.add_argument("--out-table", dest="out_table")
    p.add_argument("--out-csv", dest="out_csv")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args._config = load_config(args.config) if args.config else {}
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except TrainingDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
