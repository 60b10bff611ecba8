"""SI-SDR and permutation resolution for multi-speaker outputs."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError

__all__ = [
    "SI_SDR_CAP_DB",
    "EvalReport",
    "si_sdr",
    "resolve_permutation",
    "format_record",
    "parse_record",
]

SI_SDR_CAP_DB = 80.0
MAX_SPEAKERS = 4


@dataclass(frozen=True)
class EvalReport:
    per_speaker_si_sdr_db: list
    mean_si_sdr_db: float
    permutation: list  # permutation[i] = estimate matched to reference i
    improvement_over_mixture_db: float = math.nan


def _mono(x, name):
    x = np.asarray(getattr(x, "data", x), dtype=float)
    if x.ndim == 2 and x.shape[0] == 1:
        x = x[0]
    if x.ndim != 1:
        raise DataError(f"{name} must be a mono signal, got shape {x.shape}")
    return x


def si_sdr(estimate, reference):
    """Scale-invariant SDR in dB, clipped to +-80 dB.

    ``alpha = <e, r> / ||r||^2`` and
    ``SI-SDR = 10 log10(||alpha r||^2 / ||e - alpha r||^2)``.

    >>> si_sdr([1.0, 1.0], [1.0, 0.0])
    0.0
    """
    e = _mono(estimate, "estimate")
    r = _mono(reference, "reference")
    if e.shape != r.shape:
        raise DataError(f"length mismatch: {e.size} vs {r.size}")
    ref_energy = np.dot(r, r)
    if ref_energy == 0:
        raise DataError("zero reference")
    alpha = np.dot(e, r) / ref_energy
    target = alpha * r
    resid = e - target
    num, den = np.dot(target, target), np.dot(resid, resid)
    if den <= 0:
        return SI_SDR_CAP_DB
    if num <= 0:
        return -SI_SDR_CAP_DB
    return float(np.clip(10 * np.log10(num / den), -SI_SDR_CAP_DB, SI_SDR_CAP_DB))


def resolve_permutation(estimates, references, mixture=None):
    """Pick the estimate-to-reference assignment with the highest mean SI-SDR.

    All ``C!`` assignments are scored (``C <= 4``). When ``mixture`` is
    given, the improvement is the mean SI-SDR minus the mean SI-SDR of the
    mixture against each reference.
    """
    if len(estimates) != len(references):
        raise DataError(f"count mismatch: {len(estimates)} estimates, {len(references)} references")
    n = len(references)
    if not 1 <= n <= MAX_SPEAKERS:
        raise DataError(f"supports 1..{MAX_SPEAKERS} speakers, got {n}")
    scores = np.array([[si_sdr(e, r) for e in estimates] for r in references])
    best, best_mean = None, -math.inf
    for perm in itertools.permutations(range(n)):
        mean = float(np.mean(scores[np.arange(n), perm]))
        if mean > best_mean:
            best, best_mean = perm, mean
    per = [float(scores[i, best[i]]) for i in range(n)]
    improvement = math.nan
    if mixture is not None:
        base = np.mean([si_sdr(mixture, r) for r in references])
        improvement = best_mean - float(base)
    return EvalReport(per, best_mean, list(best), improvement)


def _fmt(v):
    return repr(float(v))


def format_record(scene_id, chain, report: EvalReport) -> str:
    """One tab-separated ``key=value`` line per utterance."""
    fields = [
        f"scene={scene_id}",
        f"chain={chain}",
        "si_sdr_db=" + ",".join(_fmt(v) for v in report.per_speaker_si_sdr_db),
        f"mean_si_sdr_db={_fmt(report.mean_si_sdr_db)}",
        f"improvement_db={_fmt(report.improvement_over_mixture_db)}",
        "permutation=" + ",".join(str(i) for i in report.permutation),
    ]
    return "\t".join(fields)


def parse_record(line: str):
    """Inverse of :func:`format_record`; returns ``(scene_id, chain, report)``."""
    try:
        kv = dict(item.split("=", 1) for item in line.rstrip("\n").split("\t"))
        report = EvalReport(
            [float(v) for v in kv["si_sdr_db"].split(",")],
            float(kv["mean_si_sdr_db"]),
            [int(v) for v in kv["permutation"].split(",")],
            float(kv["improvement_db"]),
        )
        return kv["scene"], kv["chain"], report
    except (KeyError, ValueError) as exc:
        raise DataError(f"malformed report record: {line!r}") from exc
