"""MVDR beamforming driven by target estimates.

Covariances are plain sums of outer products over frames (no 1/T
normalisation; the MVDR solution is invariant to a common scale). The target
steering vector is the principal eigenvector of the target covariance,
computed by power iteration, and the beamformer is::

    w = Phi_n^{-1} d / (d^H Phi_n^{-1} d) * conj(d_q)

so that ``w^H d = d_q`` (real and non-negative after phase normalisation).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, NumericalError

__all__ = [
    "OK",
    "DEGENERATE",
    "ISOTROPIC",
    "DEREVERB_RESIDUAL",
    "MIXTURE_RESIDUAL",
    "CovarianceSet",
    "Beamformer",
    "spatial_covariance",
    "nontarget_signal",
    "covariance_set",
    "steering_vector",
    "mvdr_weights",
    "apply_beamformer",
]

# per-frequency diagnostic flags
OK, DEGENERATE, ISOTROPIC = 0, 1, 2

DEREVERB_RESIDUAL = "dereverb_residual"
MIXTURE_RESIDUAL = "mixture_residual"


@dataclass(frozen=True)
class CovarianceSet:
    target: np.ndarray
    nontarget: np.ndarray
    variant: str = DEREVERB_RESIDUAL


@dataclass(frozen=True)
class Beamformer:
    weights: np.ndarray  # [F, P]
    ref_channel: int
    steering: np.ndarray  # [F, P]
    flags: np.ndarray  # [F], OK / DEGENERATE / ISOTROPIC


def _as_multichannel(x, name):
    x = np.asarray(getattr(x, "data", x))
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3:
        raise DataError(f"{name} must be [P, T, F], got shape {x.shape}")
    return x


def spatial_covariance(signal):
    """``Phi(f) = sum_t s(t, f) s(t, f)^H`` for a ``[P, T, F]`` spectrogram."""
    s = _as_multichannel(signal, "signal")
    if s.shape[1] < 1:
        raise DataError("need at least one frame")
    return np.einsum("ptf,qtf->fpq", s, s.conj())


def nontarget_signal(dereverb, estimate, mixture=None, variant=DEREVERB_RESIDUAL):
    """Non-target component used for the noise covariance.

    ``dereverb_residual``: dereverberated signal minus the target estimate.
    ``mixture_residual``: mixture minus the target estimate.
    """
    est = _as_multichannel(estimate, "estimate")
    if variant == DEREVERB_RESIDUAL:
        base = _as_multichannel(dereverb, "dereverb")
    elif variant == MIXTURE_RESIDUAL:
        if mixture is None:
            raise ConfigError("mixture_residual variant needs the mixture")
        base = _as_multichannel(mixture, "mixture")
    else:
        raise ConfigError(f"unknown covariance variant {variant!r}")
    if base.shape != est.shape:
        raise DataError(f"shape mismatch: {base.shape} vs {est.shape}")
    return base - est


def covariance_set(estimate, dereverb=None, mixture=None, variant=DEREVERB_RESIDUAL):
    return CovarianceSet(
        spatial_covariance(estimate),
        spatial_covariance(nontarget_signal(dereverb, estimate, mixture, variant)),
        variant,
    )


def steering_vector(target_cov, ref_channel=0, max_iter=100, tol=1e-10, return_flags=False):
    """Principal eigenvector of each ``[P, P]`` covariance by power iteration.

    The result is unit norm with the reference component real and
    non-negative. Zero matrices give a zero vector flagged ``DEGENERATE``;
    matrices whose largest eigenvalue equals the mean eigenvalue (no
    preferred direction) are flagged ``ISOTROPIC``.
    """
    phi = np.asarray(target_cov, dtype=complex)
    if phi.ndim == 2:
        phi = phi[None]
    n_freqs, p, _ = phi.shape
    if not 0 <= ref_channel < p:
        raise ConfigError(f"ref_channel {ref_channel} out of range")
    trace = np.real(np.einsum("fpp->f", phi))
    flags = np.full(n_freqs, OK)
    flags[~(trace > 0)] = DEGENERATE

    # start from the strongest column, which cannot be orthogonal to the
    # principal direction unless that direction vanishes on this channel
    diag = np.real(np.einsum("fpp->fp", phi))
    start = np.argmax(diag, axis=1)
    v = phi[np.arange(n_freqs), :, start]
    norm = np.linalg.norm(v, axis=1)
    v = np.where(norm[:, None] > 0, v / np.where(norm > 0, norm, 1)[:, None], 0)
    active = flags == OK
    for _ in range(max_iter):
        if not active.any():
            break
        nxt = np.einsum("fpq,fq->fp", phi[active], v[active])
        nrm = np.linalg.norm(nxt, axis=1)
        nxt = nxt / np.where(nrm > 0, nrm, 1)[:, None]
        # compare up to a global phase
        overlap = np.abs(np.einsum("fp,fp->f", v[active].conj(), nxt))
        change = np.sqrt(np.maximum(0.0, 2.0 - 2.0 * overlap))
        v[active] = nxt
        idx = np.flatnonzero(active)
        active[idx[change < tol]] = False

    ref = v[:, ref_channel]
    phase = np.where(np.abs(ref) > 0, ref.conj() / np.where(np.abs(ref) > 0, np.abs(ref), 1), 1)
    v = v * phase[:, None]

    ok = flags == OK
    rayleigh = np.real(np.einsum("fp,fpq,fq->f", v.conj(), phi, v))
    iso = ok & (rayleigh <= (1 + 1e-9) * trace / p)
    flags[iso] = ISOTROPIC
    if return_flags:
        return v, flags
    return v


def mvdr_weights(steering, nontarget_cov, ref_channel=0, loading=1e-4, flags=None):
    """MVDR weights per frequency.

    ``nontarget_cov`` is loaded with ``loading * trace / P`` on the diagonal
    before inversion; an all-zero non-target covariance is replaced by the
    identity. Frequencies with a zero steering vector get zero weights and a
    ``DEGENERATE`` flag.
    """
    d = np.asarray(steering, dtype=complex)
    phi = np.asarray(nontarget_cov, dtype=complex)
    if d.ndim == 1:
        d = d[None]
    if phi.ndim == 2:
        phi = phi[None]
    n_freqs, p = d.shape
    if phi.shape != (n_freqs, p, p):
        raise DataError(f"covariance shape {phi.shape} does not match steering {d.shape}")
    if not 0 <= ref_channel < p:
        raise ConfigError(f"ref_channel {ref_channel} out of range")
    if loading < 0:
        raise ConfigError("loading must be non-negative")
    flags = np.full(n_freqs, OK) if flags is None else np.array(flags)
    flags[np.linalg.norm(d, axis=1) == 0] = DEGENERATE

    trace = np.real(np.einsum("fpp->f", phi))
    eye = np.eye(p)
    loaded = phi + (loading * trace / p)[:, None, None] * eye
    loaded[trace == 0] = eye
    try:
        num = np.linalg.solve(loaded, d[..., None])[..., 0]
    except np.linalg.LinAlgError:
        raise NumericalError("singular non-target covariance") from None
    denom = np.einsum("fp,fp->f", d.conj(), num)
    good = (flags != DEGENERATE) & (np.abs(denom) > 0)
    if not np.all(np.isfinite(num[good])):
        raise NumericalError("singular non-target covariance")
    w = np.zeros_like(d)
    w[good] = num[good] / denom[good, None] * d[good, ref_channel, None].conj()
    return Beamformer(w, ref_channel, d, flags)


def apply_beamformer(bf, signal):
    """``out(t, f) = w(f)^H s(t, f)``; returns ``[1, T, F]``."""
    s = _as_multichannel(signal, "signal")
    if s.shape[0] != bf.weights.shape[1] or s.shape[2] != bf.weights.shape[0]:
        raise DataError(
            f"beamformer {bf.weights.shape} does not match signal {s.shape}"
        )
    return np.einsum("fp,ptf->tf", bf.weights.conj(), s)[None]
