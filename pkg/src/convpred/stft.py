"""Short-time Fourier analysis/synthesis and WAV input/output.

A square-root Hann window is used for both analysis and synthesis. The signal
is zero padded by ``window_len - hop`` samples at both ends so that every
original sample is covered by the full set of overlapping frames, and the
synthesis divides by the overlap-added window envelope. Together this makes
``synthesize(analyze(x))`` an identity on the original support.

Spectrograms are stored as complex arrays with layout ``[channel, frame,
frequency]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import ConfigError, DataError

__all__ = [
    "StftConfig",
    "TimeSignal",
    "Spectrogram",
    "analyze",
    "synthesize",
    "energy_gain",
    "two_sided_energy",
    "read_wav",
    "write_wav",
]


@dataclass(frozen=True)
class StftConfig:
    """Filterbank parameters. Defaults: 32 ms window, 8 ms hop at 8 kHz."""

    window_len_samples: int = 256
    hop_samples: int = 64
    fft_size: int = 256
    window_kind: str = "sqrt-hann"
    sample_rate_hz: int = 8000

    def __post_init__(self):
        w, h, n = self.window_len_samples, self.hop_samples, self.fft_size
        ok = (
            all(isinstance(v, (int, np.integer)) for v in (w, h, n, self.sample_rate_hz))
            and w > 0 and h > 0 and n > 0 and self.sample_rate_hz > 0
            and h <= w <= n
            and (n & (n - 1)) == 0
            and self.window_kind == "sqrt-hann"
        )
        if not ok:
            raise ConfigError(f"bad config: {self!r}")

    @classmethod
    def from_durations(cls, window_ms=32.0, hop_ms=8.0, sample_rate_hz=8000):
        w = int(round(window_ms * sample_rate_hz / 1000))
        h = int(round(hop_ms * sample_rate_hz / 1000))
        n = 1 << max(w - 1, 1).bit_length()
        return cls(w, h, n, "sqrt-hann", sample_rate_hz)

    @property
    def num_freqs(self) -> int:
        return self.fft_size // 2 + 1

    @property
    def pad(self) -> int:
        return self.window_len_samples - self.hop_samples

    def window(self) -> np.ndarray:
        n = np.arange(self.window_len_samples)
        # periodic Hann, so the squared window overlap-adds to a constant
        hann = 0.5 - 0.5 * np.cos(2 * np.pi * n / self.window_len_samples)
        return np.sqrt(hann)


@dataclass(frozen=True)
class TimeSignal:
    """Real multichannel waveform, ``data`` has shape ``[channel, sample]``."""

    data: np.ndarray
    sample_rate_hz: int = 8000

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim == 1:
            data = data[None]
        if data.ndim != 2:
            raise DataError(f"expected [channel, sample] array, got shape {data.shape}")
        if self.sample_rate_hz <= 0:
            raise DataError(f"sample rate must be positive, got {self.sample_rate_hz}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def num_channels(self) -> int:
        return self.data.shape[0]

    def __len__(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class Spectrogram:
    """Complex STFT with layout ``[channel, frame, frequency]``.

    ``length`` is the number of time samples of the analysed signal; when set,
    synthesis trims its output to that length.
    """

    data: np.ndarray
    config: StftConfig = field(default_factory=StftConfig)
    length: int | None = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        if data.ndim == 2:
            data = data[None]
        if data.ndim != 3 or data.shape[-1] != self.config.num_freqs:
            raise DataError(
                f"spectrogram shape {data.shape} incompatible with "
                f"{self.config.num_freqs} frequencies"
            )
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def shape(self):
        return self.data.shape

    def replace(self, data) -> "Spectrogram":
        return Spectrogram(data, self.config, self.length)


def _num_frames(length, config):
    return (config.pad + length - 1) // config.hop_samples + 1


def analyze(signal, config: StftConfig | None = None) -> Spectrogram:
    """Compute the one-sided STFT of a real signal.

    Parameters
    ----------
    signal : TimeSignal or array_like, shape ``[P, N]`` or ``[N]``
    config : StftConfig, optional
        Defaults to ``StftConfig()``; when ``signal`` is a TimeSignal its
        sample rate is carried into the default config.

    Returns
    -------
    Spectrogram
        ``[P, T, fft_size // 2 + 1]`` with ``T = (pad + N - 1) // hop + 1``.
    """
    if isinstance(signal, TimeSignal):
        if config is None:
            config = StftConfig(sample_rate_hz=signal.sample_rate_hz)
        x = signal.data
    else:
        x = np.asarray(signal, dtype=float)
        if x.ndim == 1:
            x = x[None]
    if config is None:
        config = StftConfig()
    if not isinstance(config, StftConfig):
        raise ConfigError("bad config")
    if x.size == 0 or x.shape[-1] == 0:
        raise DataError("empty input")
    if not np.all(np.isfinite(x)):
        raise DataError("non-finite input signal")

    n = x.shape[-1]
    w, h, pad = config.window_len_samples, config.hop_samples, config.pad
    n_frames = _num_frames(n, config)
    padded_len = (n_frames - 1) * h + w
    xp = np.zeros((x.shape[0], padded_len))
    xp[:, pad:pad + n] = x
    frames = np.lib.stride_tricks.sliding_window_view(xp, w, axis=-1)[:, ::h]
    spec = np.fft.rfft(frames * config.window(), n=config.fft_size, axis=-1)
    return Spectrogram(spec, config, n)


def _envelope(n_frames, config):
    w, h = config.window_len_samples, config.hop_samples
    env = np.zeros((n_frames - 1) * h + w)
    win2 = config.window() ** 2
    for t in range(n_frames):
        env[t * h:t * h + w] += win2
    return env


def synthesize(spec) -> TimeSignal:
    """Invert :func:`analyze` by weighted overlap-add.

    Accepts a :class:`Spectrogram` or a raw ``[P, T, F]`` array (default
    config, no length metadata). The output is real; the imaginary parts of
    the DC and Nyquist bins are discarded as in any inverse real FFT.
    """
    if not isinstance(spec, Spectrogram):
        spec = Spectrogram(spec)
    config = spec.config
    data = spec.data
    if not np.all(np.isfinite(data)):
        raise DataError("non-finite spectrogram")
    n_ch, n_frames, _ = data.shape
    if n_frames == 0:
        raise DataError("empty input")
    w, h, pad = config.window_len_samples, config.hop_samples, config.pad

    frames = np.fft.irfft(data, n=config.fft_size, axis=-1)[..., :w] * config.window()
    out = np.zeros((n_ch, (n_frames - 1) * h + w))
    for t in range(n_frames):
        out[:, t * h:t * h + w] += frames[:, t]
    env = _envelope(n_frames, config)
    # outer pad region has partial coverage; it is trimmed below
    out = out / np.where(env > 1e-12, env, 1.0)
    length = spec.length
    if length is None:
        length = out.shape[-1] - 2 * pad
    return TimeSignal(out[:, pad:pad + length], config.sample_rate_hz)


def energy_gain(config: StftConfig | None = None) -> float:
    """Ratio of two-sided spectrogram energy to time-domain energy.

    For a signal fully covered by frames,
    ``sum |X|^2 over the full DFT = energy_gain * sum x^2``; this is
    ``fft_size`` times the overlap-added squared analysis window.
    """
    config = config or StftConfig()
    overlap = config.window_len_samples // config.hop_samples + 1
    env = _envelope(2 * overlap, config)
    return float(config.fft_size * env[len(env) // 2])


def two_sided_energy(spec: Spectrogram) -> float:
    """Energy of the full DFT reconstructed from a one-sided spectrogram."""
    mag2 = np.abs(spec.data) ** 2
    n = spec.config.fft_size
    weights = np.full(spec.config.num_freqs, 2.0)
    weights[0] = 1.0
    if n % 2 == 0:
        weights[-1] = 1.0
    return float(np.sum(mag2 * weights))


def read_wav(path) -> TimeSignal:
    """Read a 16-bit PCM or 32-bit float WAV file into ``[channel, sample]``."""
    path = Path(path)
    try:
        rate, data = wavfile.read(path)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read WAV {path}: {exc}") from exc
    if data.dtype == np.int16:
        data = data.astype(float) / 32768.0
    elif data.dtype.kind == "f":
        data = data.astype(float)
    else:
        raise DataError(f"unsupported WAV sample format {data.dtype} in {path}")
    data = data.T if data.ndim == 2 else data[None]
    return TimeSignal(data, int(rate))


def write_wav(path, signal, sample_rate_hz=None, subtype="float32"):
    """Write ``signal`` as a WAV file.

    ``subtype`` is ``"float32"`` or ``"pcm16"``. PCM output is clipped to
    [-1, 1).
    """
    if isinstance(signal, TimeSignal):
        rate = sample_rate_hz or signal.sample_rate_hz
        data = signal.data
    else:
        rate = sample_rate_hz or 8000
        data = np.atleast_2d(np.asarray(signal, dtype=float))
    if subtype == "float32":
        out = data.T.astype(np.float32)
    elif subtype == "pcm16":
        out = np.clip(np.round(data.T * 32768.0), -32768, 32767).astype(np.int16)
    else:
        raise ConfigError(f"unknown WAV subtype {subtype!r}")
    if out.shape[1] == 1:
        out = out[:, 0]
    path = Path(path)
    try:
        wavfile.write(path, int(rate), out)
    except OSError as exc:
        raise DataError(f"cannot write WAV {path}: {exc}") from exc
