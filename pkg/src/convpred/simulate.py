"""Synthetic reverberant multi-speaker scenes and emulated target estimates.

Room impulse responses follow an exponentially decaying white-noise model:
a unit direct-path tap followed, after a short gap, by Gaussian taps whose
envelope drops 60 dB over ``t60`` seconds. Each channel gets its own tail and
a direct-path delay jittered by up to two samples, which is enough spatial
diversity for MVDR. The direct-path signal of a speaker is the source
convolved with the RIR truncated to its direct tap.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .errors import ConfigError, DataError
from .stft import Spectrogram, TimeSignal

__all__ = [
    "SceneSpec",
    "Scene",
    "EstimateQuality",
    "ORACLE",
    "gen_rir",
    "synth_source",
    "render_scene",
    "make_scene",
    "emulate_estimator",
]

EARLY_GAP = 8  # samples between the direct tap and the first reflection
CHANNEL_JITTER = 2  # max per-channel direct-path offset in samples


@dataclass(frozen=True)
class SceneSpec:
    num_speakers: int = 2
    num_channels: int = 1
    t60_seconds: float = 0.35
    noise_snr_db: float = 25.0
    sample_rate_hz: int = 8000
    duration_seconds: float = 4.0
    seed: int = 0
    # scales the reverberant tail; 0.1 keeps the direct tap the strongest and
    # gives direct-to-reverberant ratios of roughly -1.5 to -4.5 dB
    tail_gain: float = 0.1

    def __post_init__(self):
        if self.num_speakers < 1 or self.num_channels < 1:
            raise ConfigError("need at least one speaker and one channel")
        if not self.t60_seconds > 0:
            raise ConfigError("t60 must be positive")
        if self.sample_rate_hz <= 0 or not self.duration_seconds > 0:
            raise ConfigError("sample rate and duration must be positive")

    @property
    def num_samples(self) -> int:
        return int(round(self.duration_seconds * self.sample_rate_hz))


@dataclass(frozen=True)
class Scene:
    mixture: TimeSignal
    direct: list
    reverberant: list
    noise: TimeSignal
    rirs: np.ndarray  # [C, P, L]
    spec: SceneSpec = field(default_factory=SceneSpec)
    direct_delays: np.ndarray | None = None  # [C, P]


@dataclass(frozen=True)
class EstimateQuality:
    """Accuracy of an emulated direct-path estimate.

    ``est_snr_db`` is the power ratio of the target to the added
    perturbation; ``math.inf`` yields the exact target.
    """

    est_snr_db: float = math.inf
    perturbation_kind: str = "white"

    def __post_init__(self):
        if self.perturbation_kind not in ("white", "residual_reverb"):
            raise ConfigError(f"unknown perturbation kind {self.perturbation_kind!r}")
        if math.isnan(self.est_snr_db) or self.est_snr_db == -math.inf:
            raise ConfigError("est_snr_db must be finite or +inf")


ORACLE = EstimateQuality()


def gen_rir(seed, t60_seconds, direct_delay_samples, length, sample_rate_hz=8000,
            early_gap=EARLY_GAP, tail_gain=1.0):
    """Exponentially decaying noise RIR with a unit direct-path tap.

    ``h[direct_delay] = 1`` and, for ``n > direct_delay + early_gap``,
    ``h[n] = tail_gain * g[n] * exp(-3 ln(10) (n - direct_delay) / (t60 fs))``
    with standard-normal ``g`` drawn from ``seed``.
    """
    if not t60_seconds > 0:
        raise ConfigError("t60 must be positive")
    if direct_delay_samples < 0 or direct_delay_samples >= length:
        raise ConfigError("direct delay must lie inside the RIR")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal(length)
    n = np.arange(length)
    rel = n - direct_delay_samples
    decay = np.exp(-3.0 * np.log(10.0) * np.maximum(rel, 0) / (t60_seconds * sample_rate_hz))
    h = np.where(rel > early_gap, tail_gain * g * decay, 0.0)
    h[direct_delay_samples] = 1.0
    return h


def synth_source(rng, num_samples, sample_rate_hz=8000):
    """Speech-like test source: a gliding harmonic tone plus noise, gated by
    a syllable-rate envelope. Unit RMS."""
    t = np.arange(num_samples) / sample_rate_hz
    f0 = rng.uniform(90, 220) * (1 + 0.1 * np.sin(2 * np.pi * rng.uniform(0.5, 2) * t))
    phase = 2 * np.pi * np.cumsum(f0) / sample_rate_hz
    voiced = np.zeros(num_samples)
    n_harm = int(0.45 * sample_rate_hz / f0.max())
    amps = rng.uniform(0.2, 1.0, n_harm) / np.arange(1, n_harm + 1)
    for k, a in enumerate(amps, start=1):
        voiced += a * np.sin(k * phase + rng.uniform(0, 2 * np.pi))
    noise = rng.standard_normal(num_samples)
    # colour the noise with a one-pole lowpass
    noise = np.asarray(
        fftconvolve(noise, 0.6 ** np.arange(64))[:num_samples]
    )
    rate = rng.uniform(3, 5)
    env = np.maximum(0.0, np.sin(2 * np.pi * rate * t + rng.uniform(0, 2 * np.pi))) ** 2
    x = env * (voiced + 0.3 * noise / noise.std())
    return x / np.sqrt(np.mean(x ** 2))


def _rir_length(spec):
    return int(math.ceil(spec.t60_seconds * spec.sample_rate_hz)) + 64


def render_scene(spec: SceneSpec, sources) -> Scene:
    """Convolve sources with seeded RIRs and add white noise at the given SNR.

    ``sources`` is a list of mono arrays or single-channel TimeSignals of equal
    length. The noise level is set from the energy of the summed reverberant
    images over all channels.
    """
    srcs = [np.asarray(getattr(s, "data", s), dtype=float).reshape(-1) for s in sources]
    if not srcs or any(s.size == 0 for s in srcs):
        raise DataError("empty sources")
    if len(srcs) != spec.num_speakers:
        raise DataError(f"expected {spec.num_speakers} sources, got {len(srcs)}")
    n = srcs[0].size
    if any(s.size != n for s in srcs):
        raise DataError("sources must have equal lengths")

    ss = np.random.SeedSequence(spec.seed)
    rir_seq, delay_seq, noise_seq = ss.spawn(3)
    delay_rng = np.random.default_rng(delay_seq)
    length = _rir_length(spec)
    n_spk, n_ch = spec.num_speakers, spec.num_channels
    base = delay_rng.integers(CHANNEL_JITTER, 24, size=n_spk)
    jitter = delay_rng.integers(-CHANNEL_JITTER, CHANNEL_JITTER + 1, size=(n_spk, n_ch))
    delays = base[:, None] + jitter
    rir_seeds = rir_seq.spawn(n_spk * n_ch)

    rirs = np.zeros((n_spk, n_ch, length))
    direct, reverberant = [], []
    for c, src in enumerate(srcs):
        d = np.zeros((n_ch, n))
        x = np.zeros((n_ch, n))
        for p in range(n_ch):
            h = gen_rir(rir_seeds[c * n_ch + p], spec.t60_seconds, int(delays[c, p]),
                        length, spec.sample_rate_hz, tail_gain=spec.tail_gain)
            rirs[c, p] = h
            x[p] = fftconvolve(src, h)[:n]
            dd = int(delays[c, p])
            d[p, dd:] = src[:n - dd] * h[dd]
        direct.append(TimeSignal(d, spec.sample_rate_hz))
        reverberant.append(TimeSignal(x, spec.sample_rate_hz))

    speech = np.zeros((n_ch, n))
    for x in reverberant:
        speech = speech + x.data
    noise = np.random.default_rng(noise_seq).standard_normal((n_ch, n))
    scale = np.sqrt(np.sum(speech ** 2) / np.sum(noise ** 2) / 10 ** (spec.noise_snr_db / 10))
    noise = noise * scale
    mixture = speech + noise
    return Scene(
        TimeSignal(mixture, spec.sample_rate_hz),
        direct,
        reverberant,
        TimeSignal(noise, spec.sample_rate_hz),
        rirs,
        spec,
        delays,
    )


def make_scene(spec: SceneSpec) -> Scene:
    """Render a scene with synthetic sources drawn from ``spec.seed``."""
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 1]))
    sources = [synth_source(rng, spec.num_samples, spec.sample_rate_hz)
               for _ in range(spec.num_speakers)]
    return render_scene(spec, sources)


def emulate_estimator(direct, reverberant, quality: EstimateQuality = ORACLE, seed=0):
    """Stand-in for a DNN estimate of the direct-path spectrogram.

    ``white``: ``S + N`` with circular complex Gaussian ``N`` scaled so that
    ``||S||^2 / ||N||^2`` equals ``est_snr_db``.
    ``residual_reverb``: ``S + beta (X - S)`` with ``beta`` chosen for the same
    power ratio.
    """
    s_obj = direct
    s = np.asarray(getattr(direct, "data", direct), dtype=complex)
    x = np.asarray(getattr(reverberant, "data", reverberant), dtype=complex)
    if s.shape != x.shape:
        raise DataError(f"direct {s.shape} and reverberant {x.shape} differ in shape")
    if quality.est_snr_db == math.inf:
        out = s.copy()
    else:
        target = np.sum(np.abs(s) ** 2)
        if target == 0:
            raise DataError("cannot set estimate SNR against a zero target")
        wanted = target * 10 ** (-quality.est_snr_db / 10)
        if quality.perturbation_kind == "white":
            rng = np.random.default_rng(seed)
            pert = (rng.standard_normal(s.shape) + 1j * rng.standard_normal(s.shape)) / np.sqrt(2)
        else:
            pert = x - s
        energy = np.sum(np.abs(pert) ** 2)
        if energy == 0:
            raise DataError("perturbation has zero energy")
        out = s + pert * np.sqrt(wanted / energy)
    if isinstance(s_obj, Spectrogram):
        return s_obj.replace(out)
    return out
