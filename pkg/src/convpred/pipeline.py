"""Pipeline orchestration over simulated or user-provided scenes.

A pipeline is an ordered list of stages drawn from ``estimate``, ``wpe``,
``fcp``, ``cfcp``, ``msfcp``, ``mvdr`` and ``evaluate``. All stages except
``evaluate`` are repeated ``passes`` times; on later passes the ``estimate``
stage uses the quality configured for that pass, standing in for a refined
second-stage estimator.

Configuration files are flat ``key = value`` text. Keys before the first
``[stage]`` header are global, keys after a header belong to that stage.
``#`` starts a comment.
"""
from __future__ import annotations

import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import beamform, linpred
from .errors import ConfigError, ConvPredError, DataError
from .metrics import EvalReport, format_record, parse_record, resolve_permutation
from .simulate import EstimateQuality, SceneSpec, emulate_estimator, make_scene
from .stft import Spectrogram, StftConfig, analyze, read_wav, synthesize, write_wav

__all__ = [
    "Stage",
    "PipelineConfig",
    "SimulationConfig",
    "SceneRecord",
    "parse_config_text",
    "load_pipeline_config",
    "load_simulation_config",
    "write_manifest",
    "read_manifest",
    "run_scene",
    "cmd_simulate",
    "cmd_run",
    "cmd_eval",
]

DEREVERB_STAGES = ("wpe", "fcp", "cfcp", "msfcp")

STAGE_DEFAULTS = {
    "estimate": {"kind": "white", "snr_db": (math.inf,)},
    "wpe": {"K": 37, "delta": 3, "epsilon": linpred.DEFAULT_EPSILON,
            "loading": linpred.DEFAULT_LOADING, "psd": "estimate", "iterations": 3},
    "fcp": {"K": 40, "epsilon": linpred.DEFAULT_EPSILON, "loading": linpred.DEFAULT_LOADING},
    "cfcp": {"K": 40, "epsilon": linpred.DEFAULT_EPSILON, "loading": linpred.DEFAULT_LOADING},
    "msfcp": {"K": 40, "epsilon": linpred.DEFAULT_EPSILON, "loading": linpred.DEFAULT_LOADING,
              "steps": 2},
    "mvdr": {"variant": beamform.DEREVERB_RESIDUAL, "loading": 1e-4},
    "evaluate": {},
}

GLOBAL_DEFAULTS = {"passes": 1, "ref_channel": 0, "window_ms": 32.0, "hop_ms": 8.0,
                   "sample_rate": 8000}


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def parse_config_text(text):
    """Split config text into ``(globals, [(section, params), ...])``.

    Values stay strings; sections may repeat.
    """
    glob, sections = {}, []
    current = glob
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip().lower()
            if not name:
                raise ConfigError(f"line {lineno}: empty section name")
            current = {}
            sections.append((name, current))
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: missing key")
        current[key] = value
    return glob, sections


def _coerce(value, default, where):
    try:
        if isinstance(default, tuple):
            return tuple(float(v) for v in value.split(","))
        if isinstance(default, bool):
            return value.lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {value!r}") from None
    return value


def _fill(params, defaults, where):
    unknown = set(params) - set(defaults)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    out = dict(defaults)
    for key, value in params.items():
        out[key] = _coerce(value, defaults[key], f"{where}.{key}")
    return out


@dataclass(frozen=True)
class Stage:
    name: str
    params: dict = field(default_factory=dict)

    def label(self):
        if self.name == "mvdr":
            return f"mvdr[{self.params['variant']}]"
        if self.name == "estimate":
            snrs = "/".join(f"{v:g}" for v in self.params["snr_db"])
            return f"estimate[{self.params['kind']}:{snrs}]"
        return self.name


@dataclass(frozen=True)
class PipelineConfig:
    stages: tuple
    passes: int = 1
    ref_channel: int = 0
    stft: StftConfig = field(default_factory=StftConfig)

    def __post_init__(self):
        if self.passes < 1:
            raise ConfigError("passes must be >= 1")
        if self.ref_channel < 0:
            raise ConfigError("ref_channel must be >= 0")
        seen_dereverb = seen_estimate = False
        for st in self.stages:
            if st.name not in STAGE_DEFAULTS:
                raise ConfigError(f"unknown stage {st.name!r}")
            p = st.params
            needs_estimate = st.name in ("fcp", "cfcp", "msfcp", "mvdr") or (
                st.name == "wpe" and p["psd"] == "estimate"
            )
            if needs_estimate and not seen_estimate:
                raise ConfigError(f"stage {st.name} needs an earlier estimate stage")
            if st.name == "estimate":
                seen_estimate = True
                EstimateQuality(p["snr_db"][0], p["kind"])
            if st.name in DEREVERB_STAGES:
                seen_dereverb = True
                if p["K"] < 1:
                    raise ConfigError(f"stage {st.name}: K must be >= 1")
                if not p["epsilon"] > 0 or p["loading"] < 0:
                    raise ConfigError(f"stage {st.name}: epsilon > 0 and loading >= 0 required")
            if st.name == "wpe":
                if p["delta"] < 1:
                    raise ConfigError("stage wpe: delta must be >= 1")
                if p["psd"] not in ("estimate", "classic"):
                    raise ConfigError("stage wpe: psd must be 'estimate' or 'classic'")
            if st.name == "msfcp" and p["steps"] < 1:
                raise ConfigError("stage msfcp: steps must be >= 1")
            if st.name == "mvdr":
                if p["variant"] not in (beamform.DEREVERB_RESIDUAL, beamform.MIXTURE_RESIDUAL):
                    raise ConfigError(f"stage mvdr: unknown variant {p['variant']!r}")
                if p["variant"] == beamform.DEREVERB_RESIDUAL and not seen_dereverb:
                    raise ConfigError("stage mvdr: dereverb_residual needs an earlier dereverb stage")

    @property
    def chain(self):
        text = "+".join(s.label() for s in self.stages if s.name != "evaluate")
        if self.passes > 1:
            text = f"({text})x{self.passes}"
        return text or "unprocessed"

    @property
    def evaluates(self):
        return any(s.name == "evaluate" for s in self.stages)

    @classmethod
    def from_text(cls, text):
        glob, sections = parse_config_text(text)
        g = _fill(glob, GLOBAL_DEFAULTS, "global")
        stages = []
        for name, params in sections:
            if name not in STAGE_DEFAULTS:
                raise ConfigError(f"unknown stage [{name}]")
            stages.append(Stage(name, _fill(params, STAGE_DEFAULTS[name], name)))
        stft = StftConfig.from_durations(g["window_ms"], g["hop_ms"], g["sample_rate"])
        return cls(tuple(stages), g["passes"], g["ref_channel"], stft)

    @classmethod
    def build(cls, *stages, passes=1, ref_channel=0, stft=None):
        """Programmatic constructor: ``build(("estimate", {...}), "fcp", ...)``."""
        out = []
        for st in stages:
            name, params = (st, {}) if isinstance(st, str) else st
            unknown = set(params) - set(STAGE_DEFAULTS.get(name, {}))
            if name not in STAGE_DEFAULTS or unknown:
                raise ConfigError(f"bad stage {name!r} {sorted(unknown)}")
            merged = {**STAGE_DEFAULTS[name], **params}
            if name == "estimate" and not isinstance(merged["snr_db"], tuple):
                val = merged["snr_db"]
                merged["snr_db"] = tuple(val) if isinstance(val, (list, tuple)) else (float(val),)
            out.append(Stage(name, merged))
        return cls(tuple(out), passes, ref_channel, stft or StftConfig())


def load_pipeline_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return PipelineConfig.from_text(text)


@dataclass(frozen=True)
class SimulationConfig:
    num_speakers: int = 2
    num_channels: int = 1
    t60_min: float = 0.2
    t60_max: float = 0.5
    snr_min: float = 20.0
    snr_max: float = 30.0
    duration: float = 4.0
    sample_rate: int = 8000

    def scene_spec(self, base_seed, index):
        rng = np.random.default_rng(np.random.SeedSequence([base_seed, index, 7]))
        seed = int(np.random.SeedSequence([base_seed, index]).generate_state(1)[0])
        return SceneSpec(
            num_speakers=self.num_speakers,
            num_channels=self.num_channels,
            t60_seconds=float(rng.uniform(self.t60_min, self.t60_max)),
            noise_snr_db=float(rng.uniform(self.snr_min, self.snr_max)),
            sample_rate_hz=self.sample_rate,
            duration_seconds=self.duration,
            seed=seed,
        )


def load_simulation_config(path=None, **overrides):
    params = {}
    if path is not None:
        try:
            glob, sections = parse_config_text(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        params.update(glob)
        for name, sec in sections:
            if name != "scene":
                raise ConfigError(f"simulation config only accepts a [scene] block, got [{name}]")
            params.update(sec)
    defaults = SimulationConfig().__dict__
    values = _fill(params, defaults, "scene")
    values.update({k: v for k, v in overrides.items() if v is not None})
    cfg = SimulationConfig(**values)
    if not (0 < cfg.t60_min <= cfg.t60_max) or cfg.snr_min > cfg.snr_max:
        raise ConfigError("t60/snr ranges must be non-empty with t60_min > 0")
    return cfg


# ---------------------------------------------------------------------------
# manifests
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SceneRecord:
    scene_id: str
    seed: int
    t60: float
    snr_db: float
    num_speakers: int
    num_channels: int
    sample_rate: int
    mixture: Path
    direct: tuple = ()
    reverberant: tuple = ()
    noise: Path | None = None
    checksum: str = ""


def write_manifest(path, records):
    lines = ["# convpred scene manifest"]
    base = Path(path).parent
    for r in records:
        lines += [
            "[scene]",
            f"id={r.scene_id}",
            f"seed={r.seed}",
            f"t60={r.t60!r}",
            f"snr_db={r.snr_db!r}",
            f"num_speakers={r.num_speakers}",
            f"num_channels={r.num_channels}",
            f"sample_rate={r.sample_rate}",
            f"mixture={Path(r.mixture).relative_to(base).as_posix()}",
        ]
        lines += [f"direct_{c}={Path(p).relative_to(base).as_posix()}" for c, p in enumerate(r.direct)]
        lines += [f"reverberant_{c}={Path(p).relative_to(base).as_posix()}"
                  for c, p in enumerate(r.reverberant)]
        if r.noise is not None:
            lines.append(f"noise={Path(r.noise).relative_to(base).as_posix()}")
        lines.append(f"checksum={r.checksum}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    try:
        _, sections = parse_config_text(text)
    except ConfigError as exc:
        raise DataError(f"malformed manifest {path}: {exc}") from exc
    base = path.parent
    records = []
    for name, kv in sections:
        if name != "scene":
            raise DataError(f"manifest {path}: unexpected block [{name}]")
        try:
            n_spk = int(kv.get("num_speakers", 0))
            records.append(SceneRecord(
                scene_id=kv["id"],
                seed=int(kv.get("seed", 0)),
                t60=float(kv.get("t60", "nan")),
                snr_db=float(kv.get("snr_db", "nan")),
                num_speakers=n_spk,
                num_channels=int(kv.get("num_channels", 0)),
                sample_rate=int(kv.get("sample_rate", 8000)),
                mixture=base / kv["mixture"],
                direct=tuple(base / kv[f"direct_{c}"] for c in range(n_spk) if f"direct_{c}" in kv),
                reverberant=tuple(base / kv[f"reverberant_{c}"] for c in range(n_spk)
                                  if f"reverberant_{c}" in kv),
                noise=base / kv["noise"] if "noise" in kv else None,
                checksum=kv.get("checksum", ""),
            ))
        except (KeyError, ValueError) as exc:
            raise DataError(f"manifest {path}: bad scene entry ({exc})") from exc
    if not records:
        raise DataError(f"manifest {path} lists no scenes")
    return records


def _file_digest(paths):
    h = hashlib.sha256()
    for p in paths:
        h.update(Path(p).read_bytes())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------

@dataclass
class SceneData:
    """Spectra of one scene, all ``[P, T, F]``."""

    scene_id: str
    seed: int
    mixture: Spectrogram
    direct: list
    reverberant: list

    @classmethod
    def from_scene(cls, scene_id, scene, stft=None):
        stft = stft or StftConfig(sample_rate_hz=scene.spec.sample_rate_hz)
        return cls(
            scene_id,
            scene.spec.seed,
            analyze(scene.mixture, stft),
            [analyze(d, stft) for d in scene.direct],
            [analyze(x, stft) for x in scene.reverberant],
        )

    @classmethod
    def from_record(cls, rec: SceneRecord, stft):
        mix = read_wav(rec.mixture)
        if mix.sample_rate_hz != stft.sample_rate_hz:
            raise DataError(
                f"scene {rec.scene_id}: sample rate {mix.sample_rate_hz} Hz, "
                f"pipeline expects {stft.sample_rate_hz} Hz"
            )
        return cls(
            rec.scene_id,
            rec.seed,
            analyze(mix, stft),
            [analyze(read_wav(p), stft) for p in rec.direct],
            [analyze(read_wav(p), stft) for p in rec.reverberant],
        )


@dataclass
class _State:
    estimates: list | None = None  # per speaker [P, T, F]
    dereverb: list | None = None  # per speaker [P, T, F]
    outputs: list | None = None  # per speaker [T, F]


def _stage_estimate(params, data, state, ref, pass_idx):
    if not data.direct:
        raise DataError("no direct-path references available to emulate estimates")
    if data.reverberant and len(data.reverberant) != len(data.direct):
        raise DataError("direct and reverberant reference counts differ")
    snrs = params["snr_db"]
    quality = EstimateQuality(snrs[min(pass_idx, len(snrs) - 1)], params["kind"])
    ests = []
    for c, s in enumerate(data.direct):
        x = data.reverberant[c] if data.reverberant else s
        seed = int(np.random.SeedSequence([data.seed, c, pass_idx]).generate_state(1)[0])
        ests.append(np.asarray(emulate_estimator(s.data, x.data, quality, seed)))
    state.estimates = ests
    state.outputs = [e[ref] for e in ests]


def _need_estimates(state, stage):
    if state.estimates is None:
        raise ConfigError(f"stage {stage} needs an earlier estimate stage")
    return state.estimates


def _stage_wpe(params, data, state, ref, pass_idx):
    y = data.mixture.data
    n_ch = y.shape[0]
    k, delta, eps, load = params["K"], params["delta"], params["epsilon"], params["loading"]
    if params["psd"] == "classic":
        outs = [linpred.wpe_classic(y, k, delta, params["iterations"], q, eps, load).output
                for q in range(n_ch)]
        n_spk = len(state.estimates) if state.estimates is not None else max(len(data.direct), 1)
        state.dereverb = [np.stack(outs)] * n_spk
    else:
        ests = _need_estimates(state, "wpe")
        state.dereverb = []
        for est in ests:
            outs = []
            for q in range(n_ch):
                psd = linpred.weight_floor(np.abs(est[q]) ** 2, eps)
                filt = linpred.wpe_filter(y, psd, k, delta, q, load)
                outs.append(linpred.wpe_dereverb(y, filt, q).output)
            state.dereverb.append(np.stack(outs))
    state.outputs = [d[ref] for d in state.dereverb]


def _stage_fcp(params, data, state, ref, pass_idx):
    y = data.mixture.data
    ests = _need_estimates(state, "fcp")
    k, eps, load = params["K"], params["epsilon"], params["loading"]
    per_spk = [[] for _ in ests]
    for q in range(y.shape[0]):
        for c, est in enumerate(ests):
            filt = linpred.fcp_filter(y[q], est[q], k, None, eps, load)
            per_spk[c].append(linpred.fcp_dereverb(y[q], est[q], filt, c).output)
    state.dereverb = [np.stack(o) for o in per_spk]
    state.outputs = [d[ref] for d in state.dereverb]


def _stage_cfcp(params, data, state, ref, pass_idx):
    y = data.mixture.data
    ests = _need_estimates(state, "cfcp")
    k, eps, load = params["K"], params["epsilon"], params["loading"]
    per_spk = [[] for _ in ests]
    for q in range(y.shape[0]):
        filters = [linpred.fcp_filter(y[q], e[q], k, None, eps, load) for e in ests]
        results = linpred.cfcp_dereverb(y[q], [e[q] for e in ests], filters)
        for c, res in enumerate(results):
            per_spk[c].append(res.output)
    state.dereverb = [np.stack(o) for o in per_spk]
    state.outputs = [d[ref] for d in state.dereverb]


def _stage_msfcp(params, data, state, ref, pass_idx):
    y = data.mixture.data
    ests = _need_estimates(state, "msfcp")
    per_spk = [[] for _ in ests]
    for q in range(y.shape[0]):
        results = linpred.msfcp_run(y[q], [e[q] for e in ests], params["K"],
                                    params["epsilon"], params["steps"], params["loading"])
        for c, res in enumerate(results):
            per_spk[c].append(res.output)
    state.dereverb = [np.stack(o) for o in per_spk]
    state.outputs = [d[ref] for d in state.dereverb]


def _stage_mvdr(params, data, state, ref, pass_idx):
    y = data.mixture.data
    if y.shape[0] < 2:
        raise DataError("mvdr needs at least 2 channels")
    ests = _need_estimates(state, "mvdr")
    variant = params["variant"]
    outs = []
    for c, est in enumerate(ests):
        if variant == beamform.DEREVERB_RESIDUAL:
            if state.dereverb is None:
                raise ConfigError("mvdr dereverb_residual needs an earlier dereverb stage")
            source = state.dereverb[c]
        else:
            source = y
        cov = beamform.covariance_set(est, state.dereverb[c] if state.dereverb else None, y, variant)
        d, flags = beamform.steering_vector(cov.target, ref, return_flags=True)
        bf = beamform.mvdr_weights(d, cov.nontarget, ref, params["loading"], flags)
        outs.append(beamform.apply_beamformer(bf, source)[0])
    state.outputs = outs


_STAGES = {
    "estimate": _stage_estimate,
    "wpe": _stage_wpe,
    "fcp": _stage_fcp,
    "cfcp": _stage_cfcp,
    "msfcp": _stage_msfcp,
    "mvdr": _stage_mvdr,
}


def run_scene(config: PipelineConfig, data: SceneData):
    """Run every stage on one scene.

    Returns ``(outputs, report)``: per-speaker output spectrograms ``[T, F]``
    at the reference channel, and an :class:`EvalReport` when the pipeline has
    an ``evaluate`` stage (else ``None``).
    """
    ref = config.ref_channel
    if ref >= data.mixture.shape[0]:
        raise DataError(f"scene {data.scene_id}: ref_channel {ref} out of range")
    n_spk = max(len(data.direct), 1)
    state = _State(outputs=[data.mixture.data[ref]] * n_spk)
    for pass_idx in range(config.passes):
        for st in config.stages:
            if st.name == "evaluate":
                continue
            try:
                _STAGES[st.name](st.params, data, state, ref, pass_idx)
            except ConvPredError as exc:
                raise type(exc)(f"scene {data.scene_id}, stage {st.name}: {exc}") from exc
    report = None
    if config.evaluates:
        report = evaluate_outputs(state.outputs, data, ref)
    return state.outputs, report


def _to_time(spec_like, template: Spectrogram):
    return synthesize(template.replace(np.asarray(spec_like)[None])).data[0]


def evaluate_outputs(outputs, data: SceneData, ref=0):
    if not data.direct:
        raise DataError(f"scene {data.scene_id}: no references to evaluate against")
    refs = [_to_time(d.data[ref], data.mixture) for d in data.direct]
    ests = [_to_time(o, data.mixture) for o in outputs]
    mix = _to_time(data.mixture.data[ref], data.mixture)
    return resolve_permutation(ests, refs, mix)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(sim: SimulationConfig, count, out_dir, seed=0):
    """Render ``count`` scenes as WAV sets and write ``manifest.txt``.

    Returns the manifest path.
    """
    if count < 1:
        raise ConfigError("count must be >= 1")
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create {out_dir}: {exc}") from exc
    records = []
    for i in range(count):
        spec = sim.scene_spec(seed, i)
        scene = make_scene(spec)
        sid = f"scene{i:03d}"
        sdir = out_dir / sid
        sdir.mkdir(exist_ok=True)
        mix_p = sdir / "mixture.wav"
        write_wav(mix_p, scene.mixture)
        direct_p, reverb_p = [], []
        for c in range(spec.num_speakers):
            direct_p.append(sdir / f"direct_{c}.wav")
            reverb_p.append(sdir / f"reverberant_{c}.wav")
            write_wav(direct_p[-1], scene.direct[c])
            write_wav(reverb_p[-1], scene.reverberant[c])
        noise_p = sdir / "noise.wav"
        write_wav(noise_p, scene.noise)
        paths = [mix_p, *direct_p, *reverb_p, noise_p]
        records.append(SceneRecord(
            sid, spec.seed, spec.t60_seconds, spec.noise_snr_db, spec.num_speakers,
            spec.num_channels, spec.sample_rate_hz, mix_p, tuple(direct_p), tuple(reverb_p),
            noise_p, _file_digest(paths),
        ))
    manifest = out_dir / "manifest.txt"
    write_manifest(manifest, records)
    return manifest


def _run_one(args):
    config, rec, out_dir = args
    data = SceneData.from_record(rec, config.stft)
    outputs, report = run_scene(config, data)
    sdir = Path(out_dir) / rec.scene_id
    sdir.mkdir(parents=True, exist_ok=True)
    for c, out in enumerate(outputs):
        write_wav(sdir / f"speaker_{c}.wav", _to_time(out, data.mixture), config.stft.sample_rate_hz)
    return rec.scene_id, report


def _map_scenes(fn, jobs_args, jobs):
    if jobs <= 1 or len(jobs_args) <= 1:
        return [fn(a) for a in jobs_args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, jobs_args))


def _write_report(path, chain, results):
    lines = [format_record(sid, chain, rep) for sid, rep in sorted(results, key=lambda r: r[0])]
    Path(path).write_text("".join(line + "\n" for line in lines))


def cmd_run(config: PipelineConfig, manifest, out_dir, jobs=1):
    """Run ``config`` on every scene of ``manifest``; write enhanced WAVs.

    Writes ``run_info.txt`` and, for evaluating pipelines, ``report.txt``.
    Returns ``{scene_id: EvalReport or None}``.
    """
    records = read_manifest(manifest)
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create {out_dir}: {exc}") from exc
    results = _map_scenes(_run_one, [(config, r, out_dir) for r in records], jobs)
    (out_dir / "run_info.txt").write_text(f"chain={config.chain}\nmanifest={Path(manifest)}\n")
    if config.evaluates:
        _write_report(out_dir / "report.txt", config.chain, results)
    return dict(sorted(results, key=lambda r: r[0]))


def _eval_one(args):
    rec, run_dir, ref = args
    sdir = Path(run_dir) / rec.scene_id
    n_spk = rec.num_speakers
    ests = [read_wav(sdir / f"speaker_{c}.wav").data[0] for c in range(n_spk)]
    refs = [read_wav(p).data[ref] for p in rec.direct]
    mix = read_wav(rec.mixture).data[ref]
    return rec.scene_id, resolve_permutation(ests, refs, mix)


def cmd_eval(manifest, run_dir, jobs=1, ref_channel=0):
    """Score the WAVs written by :func:`cmd_run` against the manifest's
    direct-path references; writes ``eval_report.txt`` into ``run_dir``."""
    records = read_manifest(manifest)
    run_dir = Path(run_dir)
    chain = "unknown"
    info = run_dir / "run_info.txt"
    if info.exists():
        for line in info.read_text().splitlines():
            if line.startswith("chain="):
                chain = line.split("=", 1)[1]
    results = _map_scenes(_eval_one, [(r, run_dir, ref_channel) for r in records], jobs)
    _write_report(run_dir / "eval_report.txt", chain, results)
    return dict(sorted(results, key=lambda r: r[0]))


def read_report(path):
    """Parse a report file into ``{scene_id: (chain, EvalReport)}``."""
    out = {}
    for line in Path(path).read_text().splitlines():
        if line.strip():
            sid, chain, rep = parse_record(line)
            out[sid] = (chain, rep)
    return out


def summarize(reports):
    """Mean SI-SDR and mean improvement over a collection of EvalReports."""
    reps = [r for r in reports if isinstance(r, EvalReport)]
    if not reps:
        return math.nan, math.nan
    return (float(np.mean([r.mean_si_sdr_db for r in reps])),
            float(np.mean([r.improvement_over_mixture_db for r in reps])))
