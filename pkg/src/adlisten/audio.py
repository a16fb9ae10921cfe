"""DSP front end: prosodic frame features and acoustic vectors from PCM audio.

Per frame: voice activity, pitch (normalized-autocorrelation search in the
50-500 Hz band), intensity in dBFS, spectral stability (1 minus normalized
spectral flux), and 13 MFCCs. Per utterance: a fixed-dimension statistics
vector plus the prosodic frame sequence for reuse downstream.

All operations are pure and deterministic; identical buffers give
bit-identical outputs.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import LengthMismatch, TooShort, UnsupportedFormat

F0_MIN_HZ = 50.0
F0_MAX_HZ = 500.0
VOICING_PEAK_MIN = 0.3
DEFAULT_VAD_DB = -40.0
INTENSITY_FLOOR_DB = -120.0
N_MELS = 26
N_MFCC = 13
MEL_FMAX_HZ = 8000.0

# f0 / intensity / stability stats (mean, std, min, max) + voiced ratio
# + MFCC means and stds
ACOUSTIC_STATS_DIM = 3 * 4 + 1 + 2 * N_MFCC
FRAME_FEATURE_DIM = 4 + N_MFCC


@dataclass(frozen=True)
class AudioBuffer:
    """Mono PCM audio scaled to [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise UnsupportedFormat(f"bad sample rate {self.sample_rate}")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class FrameSpec:
    window_s: float = 0.025
    hop_s: float = 0.010

    def __post_init__(self):
        if not 0.0 < self.hop_s <= self.window_s:
            raise ValueError(f"need 0 < hop {self.hop_s} <= window {self.window_s}")

    def window_samples(self, sample_rate: int) -> int:
        return int(round(self.window_s * sample_rate))

    def hop_samples(self, sample_rate: int) -> int:
        return max(1, int(round(self.hop_s * sample_rate)))


@dataclass(frozen=True)
class ProsodicFrame:
    voiced: bool
    f0_hz: float
    intensity_db: float
    stability: float

    def __post_init__(self):
        if self.voiced and not F0_MIN_HZ <= self.f0_hz <= F0_MAX_HZ:
            raise ValueError(f"voiced f0 {self.f0_hz} outside the search band")
        if not self.voiced and self.f0_hz != 0.0:
            raise ValueError("unvoiced frames carry f0 = 0")


@dataclass(frozen=True)
class AcousticFeatureVector:
    values: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("acoustic vector contains NaN/Inf")

    @property
    def dim(self) -> int:
        return len(self.values)


def load_wav(path: str) -> AudioBuffer:
    """Read a RIFF PCM16 mono file; samples are divided by 32768."""
    try:
        with wave.open(path, "rb") as wf:
            n_channels = wf.getnchannels()
            width = wf.getsampwidth()
            rate = wf.getframerate()
            n = wf.getnframes()
            raw = wf.readframes(n)
    except wave.Error as exc:
        raise UnsupportedFormat(str(exc)) from exc
    if n_channels != 1:
        raise UnsupportedFormat(f"need mono, got {n_channels} channels")
    if width != 2:
        raise UnsupportedFormat(f"need 16-bit PCM, got {8 * width}-bit")
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return AudioBuffer(samples=samples, sample_rate=rate)


def save_wav(path: str, buf: AudioBuffer) -> None:
    """Write a buffer back as RIFF PCM16 mono (clipping to [-1, 1))."""
    pcm = np.clip(buf.samples, -1.0, 32767.0 / 32768.0)
    ints = np.round(pcm * 32768.0).astype("<i2")
    with wave.open(path, "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(buf.sample_rate)
        wf.writeframes(ints.tobytes())


def _frame_matrix(buf: AudioBuffer, spec: FrameSpec) -> np.ndarray:
    w = spec.window_samples(buf.sample_rate)
    h = spec.hop_samples(buf.sample_rate)
    n = len(buf.samples)
    if n < w:
        raise TooShort(f"{n} samples < one {w}-sample window")
    count = 1 + (n - w) // h
    idx = np.arange(w)[None, :] + h * np.arange(count)[:, None]
    return buf.samples[idx]


def frame_signal(buf: AudioBuffer, spec: FrameSpec) -> list[np.ndarray]:
    """Split into Hann-windowed frames; count = 1 + floor((N - W) / H)."""
    raw = _frame_matrix(buf, spec)
    return list(raw * np.hanning(raw.shape[1]))


def intensity_db(frame: np.ndarray) -> float:
    """20*log10(RMS) in dBFS, floored at -120."""
    return float(_intensity_db_many(np.asarray(frame, dtype=np.float64)[None, :])[0])


def _intensity_db_many(frames: np.ndarray) -> np.ndarray:
    rms = np.sqrt(np.mean(frames**2, axis=1))
    out = np.full(len(frames), INTENSITY_FLOOR_DB)
    nz = rms > 0.0
    out[nz] = np.maximum(INTENSITY_FLOOR_DB, 20.0 * np.log10(rms[nz]))
    return out


def voice_activity(frame: np.ndarray, threshold_db: float = DEFAULT_VAD_DB) -> bool:
    """True iff frame intensity reaches the threshold (inclusive)."""
    return intensity_db(frame) >= threshold_db


def estimate_f0(
    frame: np.ndarray,
    sample_rate: int = 16000,
    vad_threshold_db: float = DEFAULT_VAD_DB,
) -> tuple[bool, float]:
    """Pitch of one frame via normalized autocorrelation peak search.

    Pass the raw (untapered) frame: the peak is normalized by the
    energies of the two lag-offset segments, and tapering skews those
    energies at long lags. Voiced iff the normalized peak is >= 0.3 and
    the frame clears the VAD threshold; unvoiced frames report f0 = 0.
    """
    frames = np.asarray(frame, dtype=np.float64)[None, :]
    voiced, f0 = _estimate_f0_many(frames, sample_rate, vad_threshold_db)
    return bool(voiced[0]), float(f0[0])


def _estimate_f0_many(
    frames: np.ndarray, sample_rate: int, vad_threshold_db: float
) -> tuple[np.ndarray, np.ndarray]:
    n_frames, w = frames.shape
    lag_min = max(2, int(np.floor(sample_rate / F0_MAX_HZ)))
    lag_max = min(w - 2, int(np.ceil(sample_rate / F0_MIN_HZ)))
    if lag_max <= lag_min:
        return np.zeros(n_frames, dtype=bool), np.zeros(n_frames)

    n_fft = _next_pow2(2 * w)
    spec = np.fft.rfft(frames, n=n_fft, axis=1)
    autocorr = np.fft.irfft(spec * np.conj(spec), n=n_fft, axis=1)[:, : lag_max + 2]

    # per-lag segment energies for the normalized cross-correlation
    sq = frames**2
    prefix = np.concatenate(
        [np.zeros((n_frames, 1)), np.cumsum(sq, axis=1)], axis=1
    )
    total = prefix[:, -1:]
    lags = np.arange(lag_max + 2)
    e_head = prefix[:, w - lags.clip(max=w)]
    e_tail = total - prefix[:, lags.clip(max=w)]
    nccf = autocorr / np.sqrt(e_head * e_tail + 1e-12)

    band = nccf[:, lag_min : lag_max + 1]
    peak_val = band.max(axis=1)
    rows = np.arange(n_frames)
    # a near-equal peak at a submultiple of the argmax lag means the
    # search landed on a period multiple; the true period is the
    # smallest submultiple that still correlates
    lag0 = band.argmax(axis=1) + lag_min
    lag = lag0.copy()
    for k in (2, 3, 4):
        sub = np.maximum(lag_min, np.round(lag0 / k).astype(int))
        valid = (sub < lag) & (nccf[rows, sub] >= 0.98 * peak_val)
        lag = np.where(valid, sub, lag)

    # parabolic interpolation around the integer peak
    c0 = nccf[rows, lag - 1]
    c1 = nccf[rows, lag]
    c2 = nccf[rows, lag + 1]
    denom = c0 - 2.0 * c1 + c2
    flat = np.abs(denom) <= 1e-12
    delta = 0.5 * (c0 - c2) / np.where(flat, 1.0, denom)
    delta = np.clip(np.where(flat, 0.0, delta), -0.5, 0.5)
    f0 = sample_rate / (lag + delta)
    f0 = np.clip(f0, F0_MIN_HZ, F0_MAX_HZ)

    loud = _intensity_db_many(frames) >= vad_threshold_db
    voiced = (nccf[rows, lag] >= VOICING_PEAK_MIN) & loud
    return voiced, np.where(voiced, f0, 0.0)


def spectral_stability(prev_frame: np.ndarray, frame: np.ndarray) -> float:
    """1 - (L2 spectral flux / max segment norm), clamped to [0, 1]."""
    prev_frame = np.asarray(prev_frame, dtype=np.float64)
    frame = np.asarray(frame, dtype=np.float64)
    if prev_frame.shape != frame.shape:
        raise LengthMismatch(
            f"frame lengths differ: {prev_frame.shape} vs {frame.shape}"
        )
    mags = np.abs(np.fft.rfft(np.stack([prev_frame, frame]), n=_next_pow2(len(frame))))
    return float(_stability_from_mags(mags)[1])


def _stability_from_mags(mags: np.ndarray) -> np.ndarray:
    """Per-frame stability vs the previous frame; the first frame gets 1."""
    out = np.ones(len(mags))
    if len(mags) < 2:
        return out
    flux = np.linalg.norm(mags[1:] - mags[:-1], axis=1)
    norms = np.linalg.norm(mags, axis=1)
    denom = np.maximum(norms[1:], norms[:-1])
    ratio = np.where(denom > 0.0, flux / np.maximum(denom, 1e-300), 0.0)
    out[1:] = np.clip(1.0 - ratio, 0.0, 1.0)
    return out


def _next_pow2(n: int) -> int:
    p = 1
    while p < n:
        p *= 2
    return p


@lru_cache(maxsize=8)
def _mel_filterbank(sample_rate: int, n_fft: int) -> np.ndarray:
    """Triangular mel filters (N_MELS) from 0 Hz to min(8 kHz, Nyquist)."""
    fmax = min(MEL_FMAX_HZ, sample_rate / 2.0)
    mel = lambda f: 2595.0 * np.log10(1.0 + f / 700.0)
    mel_inv = lambda m: 700.0 * (10.0 ** (m / 2595.0) - 1.0)
    points = mel_inv(np.linspace(mel(0.0), mel(fmax), N_MELS + 2))
    bins = np.fft.rfftfreq(n_fft, d=1.0 / sample_rate)
    bank = np.zeros((N_MELS, len(bins)))
    for k in range(N_MELS):
        lo, mid, hi = points[k], points[k + 1], points[k + 2]
        up = (bins - lo) / max(mid - lo, 1e-12)
        down = (hi - bins) / max(hi - mid, 1e-12)
        bank[k] = np.clip(np.minimum(up, down), 0.0, None)
    return bank


@lru_cache(maxsize=4)
def _dct_ii_ortho(n_out: int, n_in: int) -> np.ndarray:
    k = np.arange(n_out)[:, None]
    n = np.arange(n_in)[None, :]
    mat = np.cos(np.pi * k * (2 * n + 1) / (2 * n_in))
    mat *= np.sqrt(2.0 / n_in)
    mat[0] /= np.sqrt(2.0)
    return mat


def mfcc(frame: np.ndarray, sample_rate: int = 16000, n_coeffs: int = N_MFCC) -> np.ndarray:
    """Cepstral coefficients: mel filterbank energies, log, DCT-II."""
    frames = np.asarray(frame, dtype=np.float64)[None, :]
    return _mfcc_many(frames, sample_rate)[0, :n_coeffs]


def _mfcc_many(frames: np.ndarray, sample_rate: int) -> np.ndarray:
    n_fft = _next_pow2(frames.shape[1])
    power = np.abs(np.fft.rfft(frames, n=n_fft, axis=1)) ** 2
    bank = _mel_filterbank(sample_rate, n_fft)
    energies = power @ bank.T
    logs = np.log(energies + 1e-10)
    return logs @ _dct_ii_ortho(N_MFCC, N_MELS).T


def _analyze_arrays(
    buf: AudioBuffer, spec: FrameSpec, vad_threshold_db: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """One pass over the buffer: (voiced, f0, intensity, stability, mfcc)."""
    raw = _frame_matrix(buf, spec)
    windowed = raw * np.hanning(raw.shape[1])
    # pitch and intensity on raw frames; tapering is for the spectra
    voiced, f0 = _estimate_f0_many(raw, buf.sample_rate, vad_threshold_db)
    level = _intensity_db_many(raw)
    n_fft = _next_pow2(raw.shape[1])
    power = np.abs(np.fft.rfft(windowed, n=n_fft, axis=1)) ** 2
    stab = _stability_from_mags(np.sqrt(power))
    bank = _mel_filterbank(buf.sample_rate, n_fft)
    ceps = np.log(power @ bank.T + 1e-10) @ _dct_ii_ortho(N_MFCC, N_MELS).T
    return voiced, f0, level, stab, ceps


def _frames_from_arrays(
    voiced: np.ndarray, f0: np.ndarray, level: np.ndarray, stab: np.ndarray
) -> list[ProsodicFrame]:
    return [
        ProsodicFrame(
            voiced=bool(voiced[i]),
            f0_hz=float(f0[i]),
            intensity_db=float(level[i]),
            stability=float(stab[i]),
        )
        for i in range(len(voiced))
    ]


def extract_prosodic_frames(
    buf: AudioBuffer,
    spec: FrameSpec = FrameSpec(),
    vad_threshold_db: float = DEFAULT_VAD_DB,
) -> list[ProsodicFrame]:
    """Frame-level prosody for a whole buffer (intensity on raw samples)."""
    voiced, f0, level, stab, _ = _analyze_arrays(buf, spec, vad_threshold_db)
    return _frames_from_arrays(voiced, f0, level, stab)


def _feature_matrix_from_arrays(
    voiced: np.ndarray,
    f0: np.ndarray,
    level: np.ndarray,
    stab: np.ndarray,
    ceps: np.ndarray,
) -> np.ndarray:
    cols = [
        voiced.astype(np.float64),
        f0 / F0_MAX_HZ,
        (level - INTENSITY_FLOOR_DB) / -INTENSITY_FLOOR_DB,
        stab,
    ]
    return np.column_stack(cols + [ceps])


def frame_feature_matrix(
    buf: AudioBuffer,
    spec: FrameSpec = FrameSpec(),
    vad_threshold_db: float = DEFAULT_VAD_DB,
) -> np.ndarray:
    """Per-frame input rows for the sequence classifier.

    Columns: voiced flag, f0 / 500, (dB + 120) / 120, stability, then 13
    MFCCs. The first four are scaled into [0, 1]; MFCCs are standardized
    later by the trained model's input scaler.
    """
    return _feature_matrix_from_arrays(
        *_analyze_arrays(buf, spec, vad_threshold_db)
    )


def pool_frames(matrix: np.ndarray, max_steps: int) -> np.ndarray:
    """Average consecutive frame rows down to at most max_steps rows."""
    n = len(matrix)
    if n <= max_steps:
        return matrix
    edges = np.linspace(0, n, max_steps + 1).astype(int)
    return np.stack(
        [matrix[a:b].mean(axis=0) for a, b in zip(edges[:-1], edges[1:]) if b > a]
    )


def _stats_vector(frames: list[ProsodicFrame], ceps: np.ndarray) -> np.ndarray:
    f0s = np.array([f.f0_hz for f in frames if f.voiced])
    levels = np.array([f.intensity_db for f in frames])
    stabs = np.array([f.stability for f in frames])
    stats: list[float] = []
    for arr in (f0s, levels, stabs):
        if len(arr) == 0:
            stats.extend([0.0, 0.0, 0.0, 0.0])
        else:
            stats.extend([arr.mean(), arr.std(), arr.min(), arr.max()])
    voiced_ratio = sum(f.voiced for f in frames) / len(frames)
    return np.concatenate([stats, [voiced_ratio], ceps.mean(axis=0), ceps.std(axis=0)])


def extract_acoustic_vector(
    buf: AudioBuffer,
    spec: FrameSpec = FrameSpec(),
    vad_threshold_db: float = DEFAULT_VAD_DB,
) -> tuple[AcousticFeatureVector, list[ProsodicFrame]]:
    """Utterance-level statistics vector plus the prosodic frame sequence.

    F0 statistics cover voiced frames only (all zero when none are
    voiced); intensity, stability, and MFCC statistics cover every frame.
    """
    voiced, f0, level, stab, ceps = _analyze_arrays(buf, spec, vad_threshold_db)
    frames = _frames_from_arrays(voiced, f0, level, stab)
    values = _stats_vector(frames, ceps)
    assert len(values) == ACOUSTIC_STATS_DIM
    return AcousticFeatureVector(values=values), frames


@dataclass(frozen=True)
class AudioAnalysis:
    """Everything the detection pipeline needs from one utterance's audio."""

    frames: list[ProsodicFrame]
    feature_matrix: np.ndarray
    stats: AcousticFeatureVector


def analyze_audio(
    buf: AudioBuffer,
    spec: FrameSpec = FrameSpec(),
    vad_threshold_db: float = DEFAULT_VAD_DB,
) -> AudioAnalysis:
    """Single-pass analysis shared by the audio and disfluency paths."""
    voiced, f0, level, stab, ceps = _analyze_arrays(buf, spec, vad_threshold_db)
    frames = _frames_from_arrays(voiced, f0, level, stab)
    return AudioAnalysis(
        frames=frames,
        feature_matrix=_feature_matrix_from_arrays(voiced, f0, level, stab, ceps),
        stats=AcousticFeatureVector(values=_stats_vector(frames, ceps)),
    )


def detect_pauses(
    frames: list[ProsodicFrame],
    spec: FrameSpec = FrameSpec(),
    vad_threshold_db: float = DEFAULT_VAD_DB,
    min_pause_s: float = 0.25,
) -> list[tuple[float, float]]:
    """VAD-inactive intervals of at least min_pause_s, in utterance time."""
    pauses = []
    run_start: Optional[int] = None
    hop = spec.hop_s
    for i, frame in enumerate(frames):
        inactive = frame.intensity_db < vad_threshold_db
        if inactive and run_start is None:
            run_start = i
        elif not inactive and run_start is not None:
            begin, end = run_start * hop, i * hop
            if end - begin >= min_pause_s:
                pauses.append((begin, end))
            run_start = None
    if run_start is not None:
        begin, end = run_start * hop, len(frames) * hop
        if end - begin >= min_pause_s:
            pauses.append((begin, end))
    return pauses
