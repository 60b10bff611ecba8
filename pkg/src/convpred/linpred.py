"""Per-frequency weighted linear prediction.

Every estimator here reduces to the same weighted least-squares problem, solved
independently in each frequency bin::

    g = argmin_g  sum_t |d(t) - g^H x(t)|^2 / w(t)  +  delta * ||g||^2

with ``d`` a target sequence, ``x(t)`` a stacked regressor vector and ``w`` a
positive weight. The estimators differ in what they regress on:

* WPE predicts the late reverberation of the mixture from its own past
  (all channels, lags ``delay .. delay + K - 1``) and subtracts it.
* FCP filters a direct-path estimate forward (lags ``0 .. K - 1``) to explain
  the mixture and subtracts everything but the lag-0 term.
* cFCP subtracts the reverberant excess of every speaker at once.
* msFCP re-estimates each speaker's filter after removing the other speakers'
  filtered estimates from the target.

Spectrograms are ``[T, F]`` for one channel and ``[P, T, F]`` for several.
Filters are ``[F, M]`` and applied as ``g^H x``.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from .errors import ConfigError, DataError, NumericalError

__all__ = [
    "DEFAULT_EPSILON",
    "DEFAULT_LOADING",
    "PredictionFilter",
    "DereverbResult",
    "weight_floor",
    "solve_weighted_ls",
    "lagged_regressors",
    "wpe_filter",
    "wpe_dereverb",
    "wpe_objective",
    "wpe_classic",
    "fcp_filter",
    "fcp_dereverb",
    "cfcp_dereverb",
    "msfcp_run",
]

DEFAULT_EPSILON = 1e-3
DEFAULT_LOADING = 1e-5


@dataclass(frozen=True)
class PredictionFilter:
    """Per-frequency tap vectors.

    ``taps[f]`` has ``M = K * channels`` entries ordered lag-major, i.e. entry
    ``k * channels + p`` multiplies channel ``p`` at lag ``delay + k``.
    """

    taps: np.ndarray
    K: int
    delay: int
    channels: int = 1

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=complex)
        if taps.ndim != 2 or taps.shape[1] != self.K * self.channels:
            raise DataError(
                f"taps shape {taps.shape} inconsistent with K={self.K}, "
                f"channels={self.channels}"
            )
        if self.delay < 0:
            raise ConfigError("delay must be non-negative")
        if not np.all(np.isfinite(taps)):
            raise NumericalError("non-finite filter taps")
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)

    @property
    def num_freqs(self) -> int:
        return self.taps.shape[0]

    _MAGIC = b"CPFL"
    _HEADER = struct.Struct("<4s5q")

    def to_bytes(self) -> bytes:
        """Header (magic, F, M, K, delay, channels as int64) then taps as
        little-endian interleaved real/imag doubles."""
        f, m = self.taps.shape
        head = self._HEADER.pack(self._MAGIC, f, m, self.K, self.delay, self.channels)
        return head + self.taps.astype("<c16").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "PredictionFilter":
        size = cls._HEADER.size
        if len(blob) < size:
            raise DataError("truncated filter header")
        magic, f, m, k, delay, channels = cls._HEADER.unpack(blob[:size])
        if magic != cls._MAGIC:
            raise DataError("not a prediction filter file")
        body = np.frombuffer(blob[size:], dtype="<c16")
        if body.size != f * m:
            raise DataError(f"expected {f * m} taps, found {body.size}")
        return cls(body.reshape(f, m).astype(complex), int(k), int(delay), int(channels))

    def save(self, path):
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "PredictionFilter":
        return cls.from_bytes(Path(path).read_bytes())


@dataclass(frozen=True)
class DereverbResult:
    output: np.ndarray
    filter: PredictionFilter | None
    algorithm: str
    speaker_index: int = 0


def _as_array(x):
    return np.asarray(getattr(x, "data", x))


def _as_channel(x, name):
    x = _as_array(x)
    if x.ndim == 3 and x.shape[0] == 1:
        x = x[0]
    if x.ndim != 2:
        raise DataError(f"{name} must be a single-channel [T, F] spectrogram, got {x.shape}")
    return x.astype(complex, copy=False)


def weight_floor(power, epsilon=DEFAULT_EPSILON):
    """Floor a power spectrogram at ``epsilon`` times its global maximum.

    >>> weight_floor(np.array([[4.0, 0.001]]), 0.001)
    array([[4.   , 0.004]])
    """
    power = np.asarray(power, dtype=float)
    if not epsilon > 0:
        raise ConfigError(f"epsilon must be positive, got {epsilon}")
    if np.any(power < 0) or not np.all(np.isfinite(power)):
        raise DataError("power must be finite and non-negative")
    peak = power.max(initial=0.0)
    if peak <= 0:
        raise DataError("silent spectrogram")
    return np.maximum(epsilon * peak, power)


def lagged_regressors(x, K, delay=0):
    """Stack delayed copies of ``x`` into regressor vectors.

    Parameters
    ----------
    x : array_like, ``[T, F]`` or ``[P, T, F]``
    K : int
        Number of lags.
    delay : int
        Smallest lag.

    Returns
    -------
    ndarray, ``[F, T, K * P]``
        ``out[f, t, k * P + p] = x[p, t - delay - k, f]``, zero for negative
        time indices.
    """
    x = _as_array(x)
    if x.ndim == 2:
        x = x[None]
    n_ch, n_frames, n_freqs = x.shape
    out = np.zeros((n_freqs, n_frames, K, n_ch), dtype=complex)
    xt = np.transpose(x, (2, 1, 0))  # [F, T, P]
    for k in range(K):
        lag = delay + k
        if lag < n_frames:
            out[:, lag:, k, :] = xt[:, :n_frames - lag, :]
    return out.reshape(n_freqs, n_frames, K * n_ch)


def _solve_batched(target, regressors, weights, loading):
    """Solve the weighted LS problem in every frequency.

    target ``[F, T]``, regressors ``[F, T, M]``, weights ``[F, T]``.
    """
    if loading < 0:
        raise ConfigError("loading must be non-negative")
    if np.any(weights <= 0):
        raise DataError("weights must be strictly positive")
    xw = regressors / weights[..., None]
    # R = sum_t x x^H / w,  p = sum_t x conj(d) / w
    xw_t = np.swapaxes(xw, 1, 2)
    cov = np.matmul(xw_t, regressors.conj())
    rhs = np.matmul(xw_t, target.conj()[..., None])[..., 0]
    n_freqs, m = rhs.shape
    trace = np.real(np.einsum("fmm->f", cov))
    taps = np.zeros((n_freqs, m), dtype=complex)
    eye = np.eye(m)
    for f in range(n_freqs):
        if loading > 0 and trace[f] == 0:
            # nothing to regress on in this bin
            continue
        mat = cov[f] + (loading * trace[f] / m) * eye
        try:
            factor = scipy.linalg.cho_factor(mat, lower=True)
        except np.linalg.LinAlgError:
            raise NumericalError(f"rank-deficient normal equations (frequency {f})") from None
        taps[f] = scipy.linalg.cho_solve(factor, rhs[f])
    if not np.all(np.isfinite(taps)):
        raise NumericalError("rank-deficient normal equations")
    return taps


def solve_weighted_ls(target, regressors, weights, loading=0.0):
    """Closed-form weighted least squares for a single frequency.

    Returns ``g = R^{-1} p`` with ``R = sum_t x(t) x(t)^H / w(t) + delta I``,
    ``p = sum_t x(t) conj(d(t)) / w(t)`` and ``delta = loading * trace(R) / M``.
    This minimises ``sum_t |d(t) - g^H x(t)|^2 / w(t) + delta ||g||^2``.

    Parameters
    ----------
    target : array_like, ``[T]``
    regressors : array_like, ``[T, M]``
    weights : array_like, ``[T]``, strictly positive
    loading : float
        Relative diagonal loading; 0 solves the plain normal equations.
    """
    target = np.asarray(target, dtype=complex)
    regressors = np.asarray(regressors, dtype=complex)
    weights = np.asarray(weights, dtype=float)
    if regressors.ndim == 1:
        regressors = regressors[:, None]
    if target.ndim != 1 or regressors.shape[0] != target.shape[0] or weights.shape != target.shape:
        raise DataError("target, regressors and weights must share the time axis")
    return _solve_batched(target[None], regressors[None], weights[None], loading)[0]


def _check_weights(weights, shape):
    weights = np.asarray(_as_array(weights), dtype=float)
    if weights.shape != shape:
        raise DataError(f"weights shape {weights.shape} does not match {shape}")
    return weights


def wpe_filter(mixture, psd_weights, K=37, delta=3, ref_channel=0, loading=DEFAULT_LOADING):
    """Closed-form WPE filter for a given PSD weighting (DNN-WPE form).

    Parameters
    ----------
    mixture : Spectrogram or array_like, ``[P, T, F]``
    psd_weights : array_like, ``[T, F]``
        Typically ``weight_floor(|S_hat_q|^2)`` for a target estimate.
    K : int
        Taps per channel.
    delta : int
        Prediction delay in frames, at least 1.
    ref_channel : int
        Channel whose current frame is predicted.
    """
    y = _as_array(mixture)
    if y.ndim == 2:
        y = y[None]
    if K < 1 or delta < 1:
        raise ConfigError(f"wpe needs K >= 1 and delta >= 1 (got K={K}, delta={delta})")
    if not 0 <= ref_channel < y.shape[0]:
        raise ConfigError(f"ref_channel {ref_channel} out of range")
    weights = _check_weights(psd_weights, y.shape[1:])
    reg = lagged_regressors(y, K, delta)
    taps = _solve_batched(y[ref_channel].T, reg, weights.T, loading)
    return PredictionFilter(taps, K, delta, y.shape[0])


def _apply(filt, regressors):
    # g^H x for every (f, t); returns [T, F]
    return np.einsum("fm,ftm->tf", filt.taps.conj(), regressors)


def wpe_dereverb(mixture, filt, ref_channel=0, speaker_index=0):
    """Subtract the predicted late reverberation: ``Y_q(t) - g^H Y~(t - delay)``."""
    y = _as_array(mixture)
    if y.ndim == 2:
        y = y[None]
    if not 0 <= ref_channel < y.shape[0]:
        raise ConfigError(f"ref_channel {ref_channel} out of range")
    if filt.delay < 1:
        raise ConfigError("WPE filters need delay >= 1")
    if filt.channels != y.shape[0] or filt.num_freqs != y.shape[2]:
        raise DataError("filter does not match mixture shape")
    reg = lagged_regressors(y, filt.K, filt.delay)
    out = y[ref_channel] - _apply(filt, reg)
    return DereverbResult(out, filt, "WPE", speaker_index)


def wpe_objective(output, psd):
    """Negative log-likelihood of the WPE model, up to constants.

    ``sum_{t,f} |S(t,f)|^2 / lambda(t,f) + log lambda(t,f)``.
    """
    psd = np.asarray(psd, dtype=float)
    return float(np.sum(np.abs(output) ** 2 / psd + np.log(psd)))


def wpe_classic(mixture, K=37, delta=3, iterations=3, ref_channel=0,
                epsilon=DEFAULT_EPSILON, loading=DEFAULT_LOADING, return_history=False):
    """Iterative WPE alternating PSD and filter estimation.

    The PSD starts as ``weight_floor(|Y_q|^2, epsilon)``. Each iteration solves
    the filter for the current PSD, dereverberates, and resets the PSD to
    ``|S|^2`` of the output floored at the same absolute level
    ``epsilon * max |Y_q|^2``. Keeping the floor fixed makes every PSD update
    the exact minimiser of :func:`wpe_objective` over the admissible set, so
    the objective cannot increase between iterations (up to the diagonal
    loading). With ``return_history`` the objective after every iteration is
    returned as well.
    """
    if iterations < 1:
        raise ConfigError("iterations must be >= 1")
    y = _as_array(mixture)
    if y.ndim == 2:
        y = y[None]
    if not 0 <= ref_channel < y.shape[0]:
        raise ConfigError(f"ref_channel {ref_channel} out of range")
    psd = weight_floor(np.abs(y[ref_channel]) ** 2, epsilon)
    floor = psd.min()
    history = []
    result = None
    for _ in range(iterations):
        filt = wpe_filter(y, psd, K, delta, ref_channel, loading)
        result = wpe_dereverb(y, filt, ref_channel)
        history.append(wpe_objective(result.output, psd))
        psd = np.maximum(floor, np.abs(result.output) ** 2)
    if return_history:
        return result, history
    return result


def fcp_filter(mixture_channel, estimate, K=40, weights=None,
               epsilon=DEFAULT_EPSILON, loading=DEFAULT_LOADING):
    """Forward filter mapping a direct-path estimate onto the mixture.

    Regressors are ``[S(t), S(t-1), ..., S(t-K+1)]`` of the estimate, the
    target is ``mixture_channel``. ``weights`` default to
    ``weight_floor(|mixture_channel|^2, epsilon)``.
    """
    y = _as_channel(mixture_channel, "mixture_channel")
    s = _as_channel(estimate, "estimate")
    if y.shape != s.shape:
        raise DataError(f"mixture {y.shape} and estimate {s.shape} differ in shape")
    if K < 1:
        raise ConfigError("K must be >= 1")
    if loading == 0 and not np.any(s):
        raise NumericalError("degenerate regressor: estimate is all zero")
    if weights is None:
        weights = weight_floor(np.abs(y) ** 2, epsilon)
    weights = _check_weights(weights, y.shape)
    reg = lagged_regressors(s, K, 0)
    taps = _solve_batched(y.T, reg, weights.T, loading)
    return PredictionFilter(taps, K, 0, 1)


def _reverb_excess(estimate, filt):
    """``g^H S~(t) - S(t)``: the filtered estimate without its lag-0 copy."""
    if filt.delay != 0 or filt.channels != 1:
        raise ConfigError("FCP filters have delay 0 and a single channel")
    if filt.num_freqs != estimate.shape[1]:
        raise DataError("filter does not match estimate shape")
    return _apply(filt, lagged_regressors(estimate, filt.K, 0)) - estimate


def fcp_dereverb(mixture_channel, estimate, filt, speaker_index=0):
    """Remove the estimated reverberation of one speaker from the mixture."""
    y = _as_channel(mixture_channel, "mixture_channel")
    s = _as_channel(estimate, "estimate")
    if y.shape != s.shape:
        raise DataError(f"mixture {y.shape} and estimate {s.shape} differ in shape")
    out = y - _reverb_excess(s, filt)
    return DereverbResult(out, filt, "FCP", speaker_index)


def cfcp_dereverb(mixture_channel, estimates, filters):
    """Remove the estimated reverberation of every speaker.

    The subtracted term sums over all speakers, so every returned result
    carries the same output spectrogram; result ``c`` keeps speaker ``c``'s
    filter and index for downstream pairing with estimate ``c``.
    """
    y = _as_channel(mixture_channel, "mixture_channel")
    if len(estimates) != len(filters) or not estimates:
        raise DataError(
            f"speaker count mismatch: {len(estimates)} estimates, {len(filters)} filters"
        )
    ests = [_as_channel(s, "estimate") for s in estimates]
    if any(s.shape != y.shape for s in ests):
        raise DataError("estimates must match the mixture shape")
    out = y.copy()
    for s, filt in zip(ests, filters):
        out -= _reverb_excess(s, filt)
    out.setflags(write=False)
    return [DereverbResult(out, filt, "cFCP", c) for c, filt in enumerate(filters)]


def msfcp_run(mixture_channel, estimates, K=40, epsilon=DEFAULT_EPSILON, steps=2,
              loading=DEFAULT_LOADING, weights=None):
    """Multi-step FCP.

    Step 1 is plain FCP per speaker. At step ``i > 1`` the target for speaker
    ``c`` is ``Z(c) = Y - sum_{c' != c} g(c'; i-1)^H S~(c')``, weighted by
    ``weight_floor(|Z(c)|^2)``, and the output is
    ``Z(c) - (g(c; i)^H S~(c) - S(c))``.

    ``weights`` overrides the step-1 weighting (uniform weights are handy for
    exact-recovery checks); later steps always use the floored ``|Z|^2``
    unless ``weights`` is given, in which case it is reused.
    """
    if steps < 1:
        raise ConfigError("steps must be >= 1")
    y = _as_channel(mixture_channel, "mixture_channel")
    ests = [_as_channel(s, "estimate") for s in estimates]
    if not ests or any(s.shape != y.shape for s in ests):
        raise DataError("estimates must be a non-empty list matching the mixture shape")
    n_spk = len(ests)
    regs = [lagged_regressors(s, K, 0) for s in ests]

    w1 = weight_floor(np.abs(y) ** 2, epsilon) if weights is None else weights
    filters = [fcp_filter(y, s, K, w1, epsilon, loading) for s in ests]
    preds = [_apply(g, r) for g, r in zip(filters, regs)]
    targets = [y] * n_spk
    for _ in range(1, steps):
        targets = [
            y - sum((preds[o] for o in range(n_spk) if o != c), np.zeros_like(y))
            for c in range(n_spk)
        ]
        filters = []
        for c in range(n_spk):
            w = weight_floor(np.abs(targets[c]) ** 2, epsilon) if weights is None else weights
            filters.append(fcp_filter(targets[c], ests[c], K, w, epsilon, loading))
        preds = [_apply(g, r) for g, r in zip(filters, regs)]

    algo = "FCP" if steps == 1 else "msFCP"
    return [
        DereverbResult(targets[c] - (preds[c] - ests[c]), filters[c], algo, c)
        for c in range(n_spk)
    ]
