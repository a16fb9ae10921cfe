"""DSP oracles: framing, intensity, VAD, pitch, stability, MFCC, pauses.

Hand-computed anchors: a 0.5-amplitude sine spanning whole periods has
RMS 0.5/sqrt(2), i.e. 20*log10 of that = -9.030899869919436 dBFS; one
second at sr 16000 with a 400-sample window and 160-sample hop gives
1 + (16000-400)//160 = 98 frames.
"""

import math
import wave

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adlisten.audio import (
    ACOUSTIC_STATS_DIM,
    AudioBuffer,
    DEFAULT_VAD_DB,
    FRAME_FEATURE_DIM,
    FrameSpec,
    INTENSITY_FLOOR_DB,
    N_MFCC,
    ProsodicFrame,
    analyze_audio,
    detect_pauses,
    estimate_f0,
    extract_acoustic_vector,
    extract_prosodic_frames,
    frame_feature_matrix,
    frame_signal,
    intensity_db,
    load_wav,
    mfcc,
    pool_frames,
    save_wav,
    spectral_stability,
    voice_activity,
)
from adlisten.errors import LengthMismatch, TooShort, UnsupportedFormat


def sine(freq, duration=1.0, sr=16000, amp=0.5):
    t = np.arange(int(duration * sr)) / sr
    return AudioBuffer(samples=amp * np.sin(2 * np.pi * freq * t), sample_rate=sr)


def speech_frame(level_db):
    return ProsodicFrame(voiced=False, f0_hz=0.0, intensity_db=level_db, stability=1.0)


class TestBuffersAndFraming:
    def test_duration(self):
        assert sine(100, duration=0.5).duration_s == 0.5

    def test_bad_sample_rate(self):
        with pytest.raises(UnsupportedFormat):
            AudioBuffer(samples=np.zeros(10), sample_rate=0)

    def test_frame_count_formula(self):
        frames = frame_signal(sine(100, duration=1.0), FrameSpec())
        assert len(frames) == 1 + (16000 - 400) // 160 == 98
        assert frames[0].shape == (400,)

    def test_frame_count_other_rates(self):
        for sr, dur in ((8000, 0.5), (4000, 0.6), (16000, 0.237)):
            spec = FrameSpec()
            w, h = spec.window_samples(sr), spec.hop_samples(sr)
            n = int(dur * sr)
            frames = frame_signal(sine(100, duration=dur, sr=sr), spec)
            assert len(frames) == 1 + (n - w) // h

    def test_too_short(self):
        with pytest.raises(TooShort):
            frame_signal(AudioBuffer(samples=np.zeros(100), sample_rate=16000), FrameSpec())

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            FrameSpec(window_s=0.01, hop_s=0.02)
        with pytest.raises(ValueError):
            FrameSpec(window_s=0.025, hop_s=0.0)

    def test_hop_floor_of_one_sample(self):
        assert FrameSpec(window_s=0.025, hop_s=1e-5).hop_samples(8000) == 1


class TestIntensity:
    def test_sine_oracle(self):
        # whole periods: RMS is amp/sqrt(2) exactly
        buf = sine(100, duration=0.1)
        assert intensity_db(buf.samples) == pytest.approx(
            20 * math.log10(0.5 / math.sqrt(2)), abs=1e-9
        )
        assert intensity_db(buf.samples) == pytest.approx(-9.030899869919436, abs=1e-9)

    def test_silence_floor(self):
        assert intensity_db(np.zeros(400)) == INTENSITY_FLOOR_DB == -120.0

    def test_vad_threshold_inclusive(self):
        frame = sine(100, duration=0.025).samples
        level = intensity_db(frame)
        assert voice_activity(frame, threshold_db=level)
        assert not voice_activity(frame, threshold_db=level + 1e-9)

    def test_silence_is_inactive(self):
        assert not voice_activity(np.zeros(400))
        assert voice_activity(sine(100, duration=0.025).samples)

    @given(st.integers(min_value=0, max_value=2**32 - 1))
    def test_bounded_signal_bounded_db(self, seed):
        rng = np.random.Generator(np.random.PCG64(seed))
        frame = rng.uniform(-1.0, 1.0, size=640)
        level = intensity_db(frame)
        assert INTENSITY_FLOOR_DB <= level <= 0.0
        assert voice_activity(frame, threshold_db=level)


class TestPitch:
    def test_single_raw_frame(self):
        voiced, f0 = estimate_f0(sine(100, duration=0.025).samples, 16000)
        assert voiced
        assert f0 == pytest.approx(100.0, abs=3.0)

    def test_median_within_tolerance(self):
        for freq in (100, 150, 220, 300):
            frames = extract_prosodic_frames(sine(freq))
            voiced = [f.f0_hz for f in frames if f.voiced]
            assert len(voiced) > 50
            assert np.median(voiced) == pytest.approx(freq, abs=2.0)

    def test_low_sample_rate_miniature(self):
        frames = extract_prosodic_frames(sine(220, duration=0.6, sr=4000, amp=0.4))
        voiced = [f.f0_hz for f in frames if f.voiced]
        assert voiced
        assert np.median(voiced) == pytest.approx(220.0, abs=5.0)

    def test_silence_unvoiced(self):
        assert estimate_f0(np.zeros(400), 16000) == (False, 0.0)

    def test_band_too_narrow_is_unvoiced(self):
        # 16 samples at sr 16000 cannot hold a 50-500 Hz period
        assert estimate_f0(np.ones(16) * 0.5, 16000) == (False, 0.0)

    def test_quiet_tone_fails_vad(self):
        voiced, f0 = estimate_f0(sine(100, duration=0.025, amp=1e-4).samples, 16000)
        assert not voiced and f0 == 0.0


class TestStability:
    def test_identical_frames(self):
        frame = frame_signal(sine(200, 0.1), FrameSpec())[2]
        assert spectral_stability(frame, frame) == 1.0

    def test_stationary_tone_is_stable(self):
        frames = extract_prosodic_frames(sine(220))
        assert min(f.stability for f in frames[1:]) >= 0.99

    def test_tone_change_is_unstable(self):
        a = frame_signal(sine(200, 0.1), FrameSpec())[2]
        b = frame_signal(sine(3000, 0.1), FrameSpec())[2]
        assert spectral_stability(a, b) < 0.5

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            spectral_stability(np.zeros(400), np.zeros(401))

    def test_first_frame_convention(self):
        frames = extract_prosodic_frames(sine(220, 0.1))
        assert frames[0].stability == 1.0


class TestMfcc:
    def test_dim_and_determinism(self):
        frame = frame_signal(sine(200, 0.1), FrameSpec())[0]
        c = mfcc(frame)
        assert c.shape == (N_MFCC,) == (13,)
        assert np.array_equal(c, mfcc(frame))

    def test_distinguishes_tones(self):
        a = mfcc(frame_signal(sine(200, 0.1), FrameSpec())[2])
        b = mfcc(frame_signal(sine(3000, 0.1), FrameSpec())[2])
        assert not np.allclose(a, b)


class TestVectorsAndMatrices:
    def test_feature_matrix_shape_and_ranges(self):
        m = frame_feature_matrix(sine(150, 0.3))
        assert m.shape == (1 + (4800 - 400) // 160, FRAME_FEATURE_DIM)
        assert FRAME_FEATURE_DIM == 17
        # voiced flag, scaled f0, scaled dB, stability all live in [0, 1]
        assert np.all(m[:, :4] >= 0.0) and np.all(m[:, :4] <= 1.0)

    def test_acoustic_vector_dim(self):
        vec, frames = extract_acoustic_vector(sine(150, 0.3))
        assert vec.dim == ACOUSTIC_STATS_DIM == 39
        assert np.all(np.isfinite(vec.values))
        assert len(frames) == 1 + (4800 - 400) // 160

    def test_silent_buffer_vector_is_finite(self):
        vec, frames = extract_acoustic_vector(
            AudioBuffer(samples=np.zeros(4800), sample_rate=16000)
        )
        assert np.all(np.isfinite(vec.values))
        assert all(not f.voiced for f in frames)

    def test_analyze_audio_consistency(self):
        buf = sine(150, 0.3)
        analysis = analyze_audio(buf)
        assert analysis.frames == extract_prosodic_frames(buf)
        assert np.array_equal(analysis.feature_matrix, frame_feature_matrix(buf))
        vec, _ = extract_acoustic_vector(buf)
        assert np.array_equal(analysis.stats.values, vec.values)

    def test_determinism(self):
        buf = sine(220, 0.4)
        a = analyze_audio(buf)
        b = analyze_audio(buf)
        assert np.array_equal(a.feature_matrix, b.feature_matrix)
        assert a.frames == b.frames

    def test_pool_frames(self):
        m = np.arange(200.0).reshape(100, 2)
        pooled = pool_frames(m, 10)
        assert pooled.shape == (10, 2)
        assert np.allclose(pooled.mean(axis=0), m.mean(axis=0))
        small = np.arange(8.0).reshape(4, 2)
        assert pool_frames(small, 10) is small

    def test_prosodic_frame_validation(self):
        with pytest.raises(ValueError):
            ProsodicFrame(voiced=True, f0_hz=20.0, intensity_db=-10.0, stability=1.0)
        with pytest.raises(ValueError):
            ProsodicFrame(voiced=False, f0_hz=100.0, intensity_db=-10.0, stability=1.0)


class TestWavIO:
    def test_round_trip_exact(self, tmp_path):
        rng = np.random.Generator(np.random.PCG64(3))
        ints = rng.integers(-32768, 32767, size=2000)
        buf = AudioBuffer(samples=ints / 32768.0, sample_rate=8000)
        path = str(tmp_path / "t.wav")
        save_wav(path, buf)
        loaded = load_wav(path)
        assert loaded.sample_rate == 8000
        assert np.array_equal(loaded.samples, buf.samples)

    def test_rejects_stereo(self, tmp_path):
        path = str(tmp_path / "stereo.wav")
        with wave.open(path, "wb") as wf:
            wf.setnchannels(2)
            wf.setsampwidth(2)
            wf.setframerate(8000)
            wf.writeframes(b"\x00\x00" * 200)
        with pytest.raises(UnsupportedFormat):
            load_wav(path)

    def test_rejects_8_bit(self, tmp_path):
        path = str(tmp_path / "w8.wav")
        with wave.open(path, "wb") as wf:
            wf.setnchannels(1)
            wf.setsampwidth(1)
            wf.setframerate(8000)
            wf.writeframes(b"\x00" * 100)
        with pytest.raises(UnsupportedFormat):
            load_wav(path)

    def test_rejects_garbage(self, tmp_path):
        path = tmp_path / "no.wav"
        path.write_bytes(b"definitely not RIFF data")
        with pytest.raises(UnsupportedFormat):
            load_wav(str(path))


class TestPauseDetection:
    def test_interior_pause(self):
        frames = (
            [speech_frame(-10.0)] * 50
            + [speech_frame(-120.0)] * 50
            + [speech_frame(-10.0)] * 50
        )
        pauses = detect_pauses(frames, FrameSpec())
        assert len(pauses) == 1
        assert pauses[0][0] == pytest.approx(0.5, abs=1e-9)
        assert pauses[0][1] == pytest.approx(1.0, abs=1e-9)

    def test_trailing_pause(self):
        frames = [speech_frame(-10.0)] * 50 + [speech_frame(-120.0)] * 30
        pauses = detect_pauses(frames, FrameSpec())
        assert len(pauses) == 1
        assert pauses[0][0] == pytest.approx(0.5, abs=1e-9)
        assert pauses[0][1] == pytest.approx(0.8, abs=1e-9)

    def test_short_gap_ignored(self):
        frames = (
            [speech_frame(-10.0)] * 50
            + [speech_frame(-120.0)] * 20
            + [speech_frame(-10.0)] * 30
        )
        assert detect_pauses(frames, FrameSpec()) == []

    def test_threshold_boundary(self):
        # exactly at the threshold counts as active (inclusive VAD)
        frames = [speech_frame(DEFAULT_VAD_DB)] * 80
        assert detect_pauses(frames, FrameSpec()) == []
        frames = [speech_frame(DEFAULT_VAD_DB - 1e-9)] * 80
        assert len(detect_pauses(frames, FrameSpec())) == 1

    def test_real_audio_gap(self):
        sr = 4000
        tone = sine(220, duration=0.4, sr=sr, amp=0.4).samples
        gap = np.zeros(int(0.4 * sr))
        buf = AudioBuffer(samples=np.concatenate([tone, gap, tone]), sample_rate=sr)
        frames = extract_prosodic_frames(buf)
        pauses = detect_pauses(frames, FrameSpec())
        assert len(pauses) == 1
        begin, end = pauses[0]
        assert begin == pytest.approx(0.4, abs=0.05)
        assert end - begin == pytest.approx(0.4, abs=0.06)
