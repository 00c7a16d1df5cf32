"""Synthetic corpus generation, SNR-controlled mixing, objective metrics,
and the (delta, gamma) fusion sweep harness.

The sweep mirrors the familiar grid-table layout (per-SNR columns plus an
AVG column and baseline rows). Metrics are SI-SDR, segmental SNR, and log
spectral distance; no perceptual score is computed here, so sweep tables
reproduce structure and degenerate-case identities, not any published
perceptual numbers.
"""
import io
from dataclasses import dataclass, field

import numpy as np

from .dsp import SAMPLE_RATE, Waveform, magnitude, stft
from .masks import FusionParams, Mask, apply_mask, binarize, compute_irm, compute_tbm, enhance

SI_SDR_CAP_DB = 100.0
SEGSNR_FLOOR_DB = -10.0
SEGSNR_CEIL_DB = 35.0
_SILENT_FRAME_POWER = 1e-10
_LSD_FLOOR = 1e-8

DEFAULT_SNRS = (-5.0, 0.0, 5.0, 10.0)


def mix_at_snr(clean: Waveform, noise: Waveform, snr_db: float, seed: int = 0):
    """Scale noise to hit the requested SNR and add it to the clean signal.

    Noise shorter than the clean signal is looped, longer noise is cropped,
    both from a seeded random offset. Returns (noisy, scaled_noise).
    """
    if not np.isfinite(snr_db):
        raise ValueError("snr_db must be finite")
    x = clean.samples
    n = noise.samples
    if len(n) == 0:
        raise ValueError("noise signal is empty")
    if len(n) != len(x):
        reps = int(np.ceil((len(x) + len(n)) / len(n)))
        tiled = np.tile(n, reps)
        offset = int(np.random.default_rng(seed).integers(0, len(n)))
        n = tiled[offset : offset + len(x)]
    p_clean = np.mean(x**2)
    p_noise = np.mean(n**2)
    if p_clean == 0:
        raise ValueError("clean signal is silent")
    if p_noise == 0:
        raise ValueError("noise signal is silent")
    gain = np.sqrt(p_clean / (p_noise * 10.0 ** (snr_db / 10.0)))
    scaled = gain * n
    return Waveform(x + scaled, clean.sample_rate), Waveform(scaled, clean.sample_rate)


def si_sdr(est: Waveform, ref: Waveform) -> float:
    """Scale-invariant signal-to-distortion ratio in dB, capped at +100."""
    e = est.samples
    r = ref.samples
    if len(e) != len(r):
        raise ValueError(f"length mismatch: {len(e)} vs {len(r)}")
    ref_energy = np.dot(r, r)
    if ref_energy == 0:
        raise ValueError("reference signal is silent")
    target = (np.dot(e, r) / ref_energy) * r
    residual = e - target
    num = np.dot(target, target)
    den = np.dot(residual, residual)
    if num == 0:
        return -SI_SDR_CAP_DB
    if den == 0 or num / den >= 10.0 ** (SI_SDR_CAP_DB / 10.0):
        return SI_SDR_CAP_DB
    return float(10.0 * np.log10(num / den))


def segmental_snr(est: Waveform, ref: Waveform, frame: int = 512, hop: int = 256) -> float:
    """Mean per-frame SNR in dB, clamped to [-10, 35]; silent ref frames skipped."""
    e = est.samples
    r = ref.samples
    if len(e) != len(r):
        raise ValueError(f"length mismatch: {len(e)} vs {len(r)}")
    snrs = []
    for start in range(0, max(len(r) - frame + 1, 1), hop):
        rf = r[start : start + frame]
        ef = e[start : start + frame]
        p_ref = np.mean(rf**2)
        if p_ref < _SILENT_FRAME_POWER:
            continue
        p_err = np.mean((ef - rf) ** 2)
        if p_err == 0:
            snrs.append(SEGSNR_CEIL_DB)
            continue
        snrs.append(np.clip(10.0 * np.log10(p_ref / p_err), SEGSNR_FLOOR_DB, SEGSNR_CEIL_DB))
    if not snrs:
        raise ValueError("all reference frames are silent")
    return float(np.mean(snrs))


def log_spectral_distance(est: Waveform, ref: Waveform) -> float:
    """RMS over T-F bins of 20 (log10|S_est| - log10|S_ref|), floored magnitudes."""
    if len(est) != len(ref):
        raise ValueError(f"length mismatch: {len(est)} vs {len(ref)}")
    s_est = np.maximum(magnitude(stft(est)).data, _LSD_FLOOR)
    s_ref = np.maximum(magnitude(stft(ref)).data, _LSD_FLOOR)
    diff = 20.0 * (np.log10(s_est) - np.log10(s_ref))
    return float(np.sqrt(np.mean(diff**2)))


METRICS = {
    "si_sdr": si_sdr,
    "segsnr": segmental_snr,
    "lsd": log_spectral_distance,
}


# ---------------------------------------------------------------------------
# Synthetic corpus
# ---------------------------------------------------------------------------

NOISE_KINDS = ("white", "pink", "babble")


@dataclass(frozen=True)
class CorpusSpec:
    seed: int = 0
    n_train: int = 60
    n_dev: int = 10
    n_test: int = 10
    duration: float = 2.0
    sample_rate: int = SAMPLE_RATE
    snrs: tuple = DEFAULT_SNRS


@dataclass
class Mixture:
    utt_id: str
    split: str
    snr_db: float
    noise_kind: str
    clean: Waveform
    noise: Waveform  # already scaled to the target SNR
    noisy: Waveform


@dataclass
class Corpus:
    spec: CorpusSpec
    train: list
    dev: list
    test: list

    def split(self, name):
        return {"train": self.train, "dev": self.dev, "test": self.test}[name]


def _synth_clean(rng, n, sr):
    """Harmonic complex with drifting f0, formant-like envelope, and
    amplitude modulation that leaves silent gaps."""
    t = np.arange(n) / sr
    f0 = rng.uniform(80.0, 300.0)
    drift = rng.uniform(-0.2, 0.2) * f0
    inst_f0 = f0 + drift * t / t[-1]
    phase = 2.0 * np.pi * np.cumsum(inst_f0) / sr
    formants = rng.uniform(300.0, 3000.0, size=3)
    bandwidths = rng.uniform(80.0, 300.0, size=3)
    x = np.zeros(n)
    n_harm = int(sr / 2 / f0) - 1
    for h in range(1, max(n_harm, 2)):
        freq = h * inst_f0
        if freq[0] >= sr / 2:
            break
        amp = sum(
            np.exp(-((h * f0 - fc) ** 2) / (2.0 * bw**2))
            for fc, bw in zip(formants, bandwidths)
        )
        x += amp * np.sin(h * phase + rng.uniform(0, 2 * np.pi))
    # syllable-rate amplitude modulation with hard silence gaps
    env = 0.5 * (1.0 + np.sin(2.0 * np.pi * rng.uniform(1.5, 4.0) * t + rng.uniform(0, 2 * np.pi)))
    env = env**2
    gap_len = int(0.2 * sr)
    n_gaps = rng.integers(2, 5)
    for _ in range(n_gaps):
        start = int(rng.integers(0, max(n - gap_len, 1)))
        env[start : start + gap_len] = 0.0
    x *= env
    peak = np.max(np.abs(x))
    if peak > 0:
        x *= 0.5 / peak
    return x


def _synth_noise(rng, kind, n, sr):
    if kind == "white":
        x = rng.standard_normal(n)
    elif kind == "pink":
        white = rng.standard_normal(n)
        spec = np.fft.rfft(white)
        freqs = np.fft.rfftfreq(n, d=1.0 / sr)
        freqs[0] = freqs[1]
        spec /= np.sqrt(freqs)
        x = np.fft.irfft(spec, n)
    elif kind == "babble":
        # overlapping tonal bursts, crudely speech-shaped
        x = 0.1 * rng.standard_normal(n)
        t = np.arange(n) / sr
        for _ in range(20):
            f = rng.uniform(100.0, 2000.0)
            start = int(rng.integers(0, n))
            dur = int(rng.uniform(0.05, 0.3) * sr)
            stop = min(start + dur, n)
            seg = np.sin(2.0 * np.pi * f * t[start:stop] + rng.uniform(0, 2 * np.pi))
            x[start:stop] += rng.uniform(0.3, 1.0) * seg * np.hanning(stop - start)
    else:
        raise ValueError(f"unknown noise kind {kind!r}")
    peak = np.max(np.abs(x))
    if peak > 0:
        x *= 0.5 / peak
    return x


def synth_corpus(spec: CorpusSpec) -> Corpus:
    """Deterministic synthetic corpus.

    Train/dev utterances are mixed at one SNR each (cycled through the SNR
    list); every test utterance is mixed at all SNRs so evaluation covers
    each condition.
    """
    rng = np.random.default_rng(spec.seed)
    n = int(round(spec.duration * spec.sample_rate))
    corpus = Corpus(spec=spec, train=[], dev=[], test=[])
    counts = {"train": spec.n_train, "dev": spec.n_dev, "test": spec.n_test}
    for split in ("train", "dev", "test"):
        for i in range(counts[split]):
            clean = Waveform(_synth_clean(rng, n, spec.sample_rate), spec.sample_rate)
            kind = NOISE_KINDS[i % len(NOISE_KINDS)]
            noise = Waveform(_synth_noise(rng, kind, n, spec.sample_rate), spec.sample_rate)
            utt_id = f"{split}/utt{i:04d}"
            if split == "test":
                snrs = spec.snrs
            else:
                snrs = (spec.snrs[i % len(spec.snrs)],)
            for snr in snrs:
                noisy, scaled = mix_at_snr(clean, noise, snr, seed=spec.seed + i)
                corpus.split(split).append(
                    Mixture(utt_id, split, float(snr), kind, clean, scaled, noisy)
                )
    return corpus


# ---------------------------------------------------------------------------
# Fusion sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepGrid:
    deltas: tuple
    gammas: tuple
    metric: str = "si_sdr"

    def __post_init__(self):
        if not self.deltas or not self.gammas:
            raise ValueError("delta and gamma grids must be non-empty")
        for v in list(self.deltas) + list(self.gammas):
            if not 0 <= v <= 1:
                raise ValueError(f"grid values must lie in [0, 1], got {v}")
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}; choose from {sorted(METRICS)}")
        object.__setattr__(self, "deltas", tuple(self.deltas))
        object.__setattr__(self, "gammas", tuple(self.gammas))


@dataclass
class SweepItem:
    """One evaluation utterance with its estimated (or oracle) masks."""

    irm_est: Mask
    tbm_est: Mask
    noisy: Waveform
    clean: Waveform
    snr_db: float


@dataclass
class SweepReport:
    grid: SweepGrid
    snrs: tuple
    cells: dict          # (delta, gamma, snr) -> mean metric value
    baselines: dict      # name -> {snr: value}

    def cell_avg(self, delta, gamma):
        return float(np.mean([self.cells[(delta, gamma, s)] for s in self.snrs]))

    def baseline_avg(self, name):
        return float(np.mean([self.baselines[name][s] for s in self.snrs]))


def _fused_value(item, delta, gamma, metric_fn):
    # delta == 0 or 1 are degenerate grid points outside FusionParams'
    # open interval; apply the same strict-comparison rule directly.
    fused = Mask(
        np.where(item.tbm_est.data > delta, item.irm_est.data, gamma * item.irm_est.data),
        "soft",
    )
    out = enhance(item.noisy, fused)
    return metric_fn(out, item.clean)


def sweep_fusion(items, grid: SweepGrid) -> SweepReport:
    """Evaluate the fusion rule over the (delta, gamma) grid.

    Cell values are metric means over the items at each SNR. Baseline rows:
    the unprocessed noisy signal, IRM-only enhancement, and TBM-only
    enhancement (soft TBM binarized at 0.5).
    """
    if not items:
        raise ValueError("no sweep items given")
    metric_fn = METRICS[grid.metric]
    snrs = tuple(sorted({it.snr_db for it in items}))
    by_snr = {s: [it for it in items if it.snr_db == s] for s in snrs}

    cells = {}
    for delta in grid.deltas:
        for gamma in grid.gammas:
            for snr in snrs:
                vals = [_fused_value(it, delta, gamma, metric_fn) for it in by_snr[snr]]
                cells[(delta, gamma, snr)] = float(np.mean(vals))

    baselines = {"noisy": {}, "irm": {}, "tbm": {}}
    for snr in snrs:
        group = by_snr[snr]
        baselines["noisy"][snr] = float(
            np.mean([metric_fn(it.noisy, it.clean) for it in group])
        )
        baselines["irm"][snr] = float(
            np.mean([metric_fn(enhance(it.noisy, it.irm_est), it.clean) for it in group])
        )
        baselines["tbm"][snr] = float(
            np.mean(
                [
                    metric_fn(enhance(it.noisy, binarize(it.tbm_est, 0.5)), it.clean)
                    for it in group
                ]
            )
        )
    return SweepReport(grid=grid, snrs=snrs, cells=cells, baselines=baselines)


def report_text(report: SweepReport) -> str:
    """Aligned plain-text table: baseline rows, then one row per (delta, gamma)."""
    snrs = report.snrs
    header = ["delta", "gamma"] + [f"{s:+.0f}dB" for s in snrs] + ["AVG"]
    rows = []
    for name in ("noisy", "irm", "tbm"):
        vals = [report.baselines[name][s] for s in snrs]
        rows.append([name, "-"] + [f"{v:.3f}" for v in vals] + [f"{report.baseline_avg(name):.3f}"])
    for delta in report.grid.deltas:
        for gamma in report.grid.gammas:
            vals = [report.cells[(delta, gamma, s)] for s in snrs]
            rows.append(
                [f"{delta:.2f}", f"{gamma:.2f}"]
                + [f"{v:.3f}" for v in vals]
                + [f"{report.cell_avg(delta, gamma):.3f}"]
            )
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
    buf = io.StringIO()
    buf.write(f"metric: {report.grid.metric}\n")
    for row in [header] + rows:
        buf.write("  ".join(c.rjust(w) for c, w in zip(row, widths)) + "\n")
    return buf.getvalue()


def report_csv(report: SweepReport) -> str:
    """Grid cells only: delta,gamma,snr_db,metric,value."""
    lines = ["delta,gamma,snr_db,metric,value"]
    for delta in report.grid.deltas:
        for gamma in report.grid.gammas:
            for snr in report.snrs:
                value = report.cells[(delta, gamma, snr)]
                lines.append(f"{delta},{gamma},{snr},{report.grid.metric},{value:.6f}")
    return "\n".join(lines) + "\n"


def oracle_sweep_items(mixtures) -> list:
    """Build sweep items from oracle masks of corpus mixtures."""
    items = []
    for mix in mixtures:
        clean_mag = magnitude(stft(mix.clean))
        noise_mag = magnitude(stft(mix.noise))
        irm = compute_irm(clean_mag, noise_mag)
        tbm = compute_tbm(clean_mag)
        items.append(SweepItem(irm, Mask(tbm.data, "soft"), mix.noisy, mix.clean, mix.snr_db))
    return items
