import numpy as np
import pytest

from maskfusion.dsp import Waveform, magnitude, stft
from maskfusion.evalkit import (
    CorpusSpec,
    SweepGrid,
    SweepItem,
    log_spectral_distance,
    mix_at_snr,
    oracle_sweep_items,
    report_csv,
    report_text,
    segmental_snr,
    si_sdr,
    sweep_fusion,
    synth_corpus,
)
from maskfusion.masks import Mask

from conftest import oracle_masks


def measured_snr_db(clean, noise):
    return 10 * np.log10(np.mean(clean.samples**2) / np.mean(noise.samples**2))


class TestMixAtSnr:
    def equal_power_pair(self, rng):
        clean = Waveform(rng.standard_normal(8000) * 0.1)
        noise = Waveform(rng.standard_normal(8000))
        noise = Waveform(noise.samples * np.sqrt(np.mean(clean.samples**2) / np.mean(noise.samples**2)))
        return clean, noise

    def test_zero_db_unit_gain(self, rng):
        clean, noise = self.equal_power_pair(rng)
        _, scaled = mix_at_snr(clean, noise, 0.0)
        np.testing.assert_allclose(scaled.samples, noise.samples, rtol=1e-12)

    def test_ten_db_gain(self, rng):
        clean, noise = self.equal_power_pair(rng)
        _, scaled = mix_at_snr(clean, noise, 10.0)
        np.testing.assert_allclose(scaled.samples, 10 ** (-0.5) * noise.samples, rtol=1e-12)

    def test_minus_five_db_gain(self, rng):
        clean, noise = self.equal_power_pair(rng)
        _, scaled = mix_at_snr(clean, noise, -5.0)
        np.testing.assert_allclose(scaled.samples, 10**0.25 * noise.samples, rtol=1e-12)

    @pytest.mark.parametrize("snr", [-5.0, 0.0, 5.0, 10.0, 3.7])
    def test_achieved_snr_exact(self, rng, snr):
        clean = Waveform(rng.standard_normal(6000) * 0.2)
        noise = Waveform(rng.standard_normal(6000) * 0.7)
        noisy, scaled = mix_at_snr(clean, noise, snr)
        assert abs(measured_snr_db(clean, scaled) - snr) < 1e-9
        np.testing.assert_allclose(noisy.samples, clean.samples + scaled.samples)

    def test_noise_looped_and_cropped(self, rng):
        clean = Waveform(rng.standard_normal(9000) * 0.2)
        short = Waveform(rng.standard_normal(2000))
        long = Waveform(rng.standard_normal(30000))
        for noise in (short, long):
            noisy, scaled = mix_at_snr(clean, noise, 5.0, seed=4)
            assert len(noisy) == len(clean)
            assert abs(measured_snr_db(clean, scaled) - 5.0) < 1e-9

    def test_silent_inputs_rejected(self, rng):
        x = Waveform(rng.standard_normal(1000))
        z = Waveform(np.zeros(1000))
        with pytest.raises(ValueError):
            mix_at_snr(z, x, 0.0)
        with pytest.raises(ValueError):
            mix_at_snr(x, z, 0.0)


class TestSiSdr:
    def test_identity_capped(self, rng):
        x = Waveform(rng.standard_normal(4000))
        assert si_sdr(x, x) == 100.0

    def test_scale_invariance(self, rng):
        x = Waveform(rng.standard_normal(4000))
        assert si_sdr(Waveform(2 * x.samples), x) == 100.0
        noisy = Waveform(x.samples + 0.1 * rng.standard_normal(4000))
        a = si_sdr(noisy, x)
        b = si_sdr(Waveform(3.7 * noisy.samples), x)
        assert a == pytest.approx(b, abs=1e-9)

    def test_orthogonal_equal_power_is_zero_db(self):
        n = 4000
        ref = np.zeros(n)
        ref[::2] = 1.0
        noise = np.zeros(n)
        noise[1::2] = 1.0  # orthogonal to ref, equal power
        assert si_sdr(Waveform(ref + noise), Waveform(ref)) == pytest.approx(0.0, abs=1e-12)

    def test_silent_estimate_floored(self, rng):
        x = Waveform(rng.standard_normal(1000))
        assert si_sdr(Waveform(np.zeros(1000)), x) == -100.0

    def test_zero_reference_rejected(self, rng):
        with pytest.raises(ValueError):
            si_sdr(Waveform(rng.standard_normal(100)), Waveform(np.zeros(100)))

    def test_length_mismatch(self, rng):
        with pytest.raises(ValueError):
            si_sdr(Waveform(np.ones(10)), Waveform(np.ones(11)))


class TestSegmentalSnr:
    def test_identity_hits_ceiling(self, rng):
        x = Waveform(rng.standard_normal(4000))
        assert segmental_snr(x, x) == 35.0

    def test_silent_estimate_zero_db(self, rng):
        # est = 0 gives per-frame error power equal to the reference power
        x = Waveform(rng.standard_normal(4000))
        assert segmental_snr(Waveform(np.zeros(4000)), x) == pytest.approx(0.0, abs=1e-12)

    def test_floor_clamp(self, rng):
        x = Waveform(rng.standard_normal(4000) * 0.01)
        loud = Waveform(x.samples + rng.standard_normal(4000))
        assert segmental_snr(loud, x) == -10.0

    def test_silent_frames_excluded(self, rng):
        ref = np.zeros(4096)
        ref[:512] = rng.standard_normal(512)
        est = ref + 0.01 * rng.standard_normal(4096)
        # only the first frame has reference energy; result is finite
        v = segmental_snr(Waveform(est), Waveform(ref))
        assert -10.0 <= v <= 35.0

    def test_all_silent_rejected(self, rng):
        z = Waveform(np.zeros(2000))
        with pytest.raises(ValueError):
            segmental_snr(z, z)


class TestLsd:
    def test_identity_is_zero(self, rng):
        x = Waveform(rng.standard_normal(4000) * 0.3)
        assert log_spectral_distance(x, x) == 0.0

    def test_factor_ten_is_twenty_db(self, rng):
        x = Waveform(rng.standard_normal(4000) * 0.3)
        # verify the floor is not hit so the identity is exact
        assert np.min(magnitude(stft(x)).data) > 1e-8
        v = log_spectral_distance(Waveform(10 * x.samples), x)
        assert v == pytest.approx(20.0, abs=1e-9)

    def test_silent_estimate_uses_floor(self, rng):
        x = Waveform(rng.standard_normal(4000) * 0.3)
        v = log_spectral_distance(Waveform(np.zeros(4000)), x)
        assert np.isfinite(v) and v > 0


class TestSynthCorpus:
    def test_deterministic(self):
        spec = CorpusSpec(seed=5, n_train=2, n_dev=1, n_test=1, duration=1.0)
        a = synth_corpus(spec)
        b = synth_corpus(spec)
        for ma, mb in zip(a.train + a.dev + a.test, b.train + b.dev + b.test):
            np.testing.assert_array_equal(ma.clean.samples, mb.clean.samples)
            np.testing.assert_array_equal(ma.noisy.samples, mb.noisy.samples)

    def test_counts_and_snrs(self):
        spec = CorpusSpec(seed=5, n_train=4, n_dev=2, n_test=2, duration=1.0)
        c = synth_corpus(spec)
        assert len(c.train) == 4  # one SNR per train utterance
        assert len(c.test) == 2 * len(spec.snrs)  # all SNRs per test utterance
        assert {m.snr_db for m in c.test} == set(spec.snrs)

    def test_mixture_snr_exact(self, tiny_corpus):
        for mix in tiny_corpus.train + tiny_corpus.test:
            assert abs(measured_snr_db(mix.clean, mix.noise) - mix.snr_db) < 1e-9

    def test_clean_has_silent_frames(self, tiny_corpus):
        fracs = []
        seen = set()
        for mix in tiny_corpus.train + tiny_corpus.dev + tiny_corpus.test:
            if mix.utt_id in seen:
                continue
            seen.add(mix.utt_id)
            m = magnitude(stft(mix.clean)).data
            fracs.append(np.mean((m**2).sum(axis=1) < 1e-8))
        assert np.mean(fracs) >= 0.10

    def test_tbm_has_zero_bins(self, tiny_corpus):
        for mix in tiny_corpus.test[:2]:
            _, tbm = oracle_masks(mix)
            assert np.any(tbm.data == 0)


@pytest.fixture(scope="module")
def items(tiny_corpus):
    return oracle_sweep_items(tiny_corpus.test)


class TestSweep:
    def test_gamma_one_equals_irm_baseline(self, items):
        grid = SweepGrid(deltas=(0.2, 0.5, 0.8), gammas=(0.0, 1.0))
        report = sweep_fusion(items, grid)
        for delta in grid.deltas:
            for snr in report.snrs:
                assert report.cells[(delta, 1.0, snr)] == report.baselines["irm"][snr]

    def test_tiny_delta_equals_gamma_one(self, tiny_corpus):
        # strictly interior tbm values, as an estimator would produce
        rng = np.random.default_rng(0)
        items = []
        for mix in tiny_corpus.test[:4]:
            irm, tbm = oracle_masks(mix)
            soft_tbm = Mask(np.clip(tbm.data, 0.05, 0.95) + rng.uniform(-0.01, 0.01, tbm.data.shape))
            items.append(SweepItem(irm, soft_tbm, mix.noisy, mix.clean, mix.snr_db))
        report = sweep_fusion(items, SweepGrid(deltas=(1e-9,), gammas=(0.3, 1.0)))
        for snr in report.snrs:
            assert report.cells[(1e-9, 0.3, snr)] == report.cells[(1e-9, 1.0, snr)]

    def test_cell_count_and_csv(self, items):
        grid = SweepGrid(deltas=(0.3, 0.6), gammas=(0.0, 0.5, 1.0))
        report = sweep_fusion(items, grid)
        snrs = report.snrs
        assert len(report.cells) == 2 * 3 * len(snrs)
        csv_text = report_csv(report)
        lines = csv_text.strip().splitlines()
        assert lines[0] == "delta,gamma,snr_db,metric,value"
        assert len(lines) - 1 == 2 * 3 * len(snrs)

    def test_text_table_layout(self, items):
        grid = SweepGrid(deltas=(0.5,), gammas=(0.0, 1.0))
        report = sweep_fusion(items, grid)
        text = report_text(report)
        lines = text.strip().splitlines()
        assert "AVG" in lines[1]
        assert any(line.strip().startswith("noisy") for line in lines)
        assert any(line.strip().startswith("irm") for line in lines)
        assert any(line.strip().startswith("tbm") for line in lines)
        # header + 3 baselines + one row per grid cell pair
        assert len(lines) == 1 + 1 + 3 + 2

    def test_oracle_irm_beats_noisy_at_zero_db(self, items):
        report = sweep_fusion([i for i in items if i.snr_db == 0.0], SweepGrid((0.5,), (1.0,)))
        assert report.baselines["irm"][0.0] > report.baselines["noisy"][0.0]

    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError):
            SweepGrid(deltas=(), gammas=(0.5,))

    def test_unknown_metric_rejected(self):
        with pytest.raises(ValueError):
            SweepGrid(deltas=(0.5,), gammas=(0.5,), metric="pesq")

    def test_no_items_rejected(self):
        with pytest.raises(ValueError):
            sweep_fusion([], SweepGrid((0.5,), (0.5,)))
