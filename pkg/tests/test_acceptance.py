"""Acceptance suite: one test class per criterion, each at its stated
tolerance. Results are summarised per criterion by ``conftest.py``."""
import time

import numpy as np
import pytest

from convpred.beamform import (
    apply_beamformer,
    covariance_set,
    mvdr_weights,
    steering_vector,
)
from convpred.cli import main
from convpred.linpred import (
    cfcp_dereverb,
    fcp_dereverb,
    fcp_filter,
    lagged_regressors,
    msfcp_run,
    solve_weighted_ls,
    wpe_classic,
    wpe_dereverb,
    wpe_filter,
)
from convpred.metrics import SI_SDR_CAP_DB, si_sdr
from convpred.pipeline import (
    PipelineConfig,
    SimulationConfig,
    cmd_run,
    cmd_simulate,
)
from convpred.simulate import SceneSpec, make_scene
from convpred.stft import analyze, synthesize

from oracles import naive_wls
from subband import (
    as_spectrogram,
    cwhite,
    decaying_taps,
    disjoint_speakers,
    fir,
    orthogonal_interference,
    sparse_wpe_scene,
)

acceptance = pytest.mark.acceptance


def _rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def _random_psd(rng, p):
    a = cwhite(rng, p, p + 3)
    return a @ a.conj().T


@acceptance(1, "weighted LS matches naive normal-equation solve (1e-10, < 5 s)")
class TestWeightedLsOracle:
    def test_hundred_instances(self):
        rng = np.random.default_rng(20240101)
        start = time.perf_counter()
        worst = 0.0
        for _ in range(100):
            m = int(rng.integers(1, 17))
            n = int(rng.integers(m, 129))
            x = cwhite(rng, n, m)
            d = cwhite(rng, n)
            w = rng.uniform(0.01, 10.0, n)
            g = solve_weighted_ls(d, x, w)
            worst = max(worst, _rel(g, naive_wls(d, x, w)))
        elapsed = time.perf_counter() - start
        assert worst <= 1e-10
        assert elapsed < 5.0


@acceptance(2, "subband filter recovery for FCP and WPE")
class TestFilterRecovery:
    def test_fcp(self):
        rng = np.random.default_rng(2)
        s = cwhite(rng, 2000, 9)
        h = decaying_taps(rng, 8, 9)
        y = fir(s, h)
        filt = fcp_filter(y, s, K=40, weights=np.ones(y.shape), loading=0.0)
        truth = np.zeros((9, 40), dtype=complex)
        truth[:, :8] = h.T
        assert np.max(np.abs(filt.taps.conj() - truth)) <= 1e-5
        assert _rel(fcp_dereverb(y, s, filt).output, s) <= 1e-4

    def test_wpe_with_delay(self):
        rng = np.random.default_rng(3)
        y, s, h = sparse_wpe_scene(rng, 2000, 9, K=37, delta=3)
        filt = wpe_filter(y, np.ones(y.shape[1:]), K=37, delta=3, loading=0.0)
        truth = np.zeros((9, 37, 2), dtype=complex)
        truth[:, :8, 1] = h.T
        assert np.max(np.abs(filt.taps.conj() - truth.reshape(9, 74))) <= 1e-5
        assert _rel(wpe_dereverb(y, filt).output, s) <= 1e-4


@acceptance(3, "FCP filter unaffected by regressor-orthogonal interference (1e-6)")
class TestInterferenceRobustness:
    def test_orthogonal_interference(self):
        rng = np.random.default_rng(4)
        s = cwhite(rng, 1000, 9)
        x = fir(s, decaying_taps(rng, 10, 9)) + 0.1 * cwhite(rng, 1000, 9)
        n = orthogonal_interference(lagged_regressors(s, 40), rng, scale=3.0)
        w = np.ones(x.shape)
        clean = fcp_filter(x, s, K=40, weights=w)
        mixed = fcp_filter(x + n, s, K=40, weights=w)
        assert np.max(np.abs(mixed.taps - clean.taps)) <= 1e-6


@acceptance(4, "MVDR distortionless, scale invariant and optimal")
class TestMvdrProperties:
    def test_distortionless(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            p = int(rng.integers(2, 7))
            n_f = 8
            target = np.stack([_random_psd(rng, p) for _ in range(n_f)])
            noise = np.stack([_random_psd(rng, p) for _ in range(n_f)])
            ref = int(rng.integers(p))
            d = steering_vector(target, ref)
            bf = mvdr_weights(d, noise, ref)
            resp = np.einsum("fp,fp->f", bf.weights.conj(), d)
            want = d[:, ref].conj()
            assert np.all(np.abs(resp - want) <= 1e-8 * np.abs(d[:, ref]))

    def test_steering_scale_invariance(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            p = int(rng.integers(2, 7))
            d = cwhite(rng, 8, p)
            noise = np.stack([_random_psd(rng, p) for _ in range(8)])
            alpha = complex(*rng.uniform(-3, 3, 2))
            w1 = mvdr_weights(d, noise).weights
            w2 = mvdr_weights(alpha * d, noise).weights
            assert np.max(np.abs(w2 - w1)) <= 1e-12 * np.max(np.abs(w1))

    def test_random_search_optimality(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            target = _random_psd(rng, 2)[None]
            phi = _random_psd(rng, 2)
            d = steering_vector(target)[0]
            w = mvdr_weights(d[None], phi[None], loading=0.0).weights[0]
            best = np.real(np.vdot(w, phi @ w))
            z = cwhite(rng, 1000, 2) * rng.uniform(1e-3, 10, (1000, 1))
            u = z - np.outer(z @ d.conj(), d) / np.vdot(d, d)
            v = w + u
            assert np.allclose(v.conj() @ d, np.conj(d[0]), atol=1e-10)
            power = np.real(np.einsum("np,pq,nq->n", v.conj(), phi, v))
            assert np.all(power >= best - 1e-9 * best)


def _mean_si_sdr(results):
    return float(np.mean([r.mean_si_sdr_db for r in results.values()]))


@pytest.fixture(scope="module")
def corpus_1ch(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus1ch")
    start = time.perf_counter()
    manifest = cmd_simulate(SimulationConfig(num_channels=1), 20, out, seed=0)
    return manifest, time.perf_counter() - start


@pytest.fixture(scope="module")
def corpus_2ch(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus2ch")
    start = time.perf_counter()
    manifest = cmd_simulate(SimulationConfig(num_channels=2), 20, out, seed=0)
    return manifest, time.perf_counter() - start


EST_10DB = ("estimate", {"kind": "residual_reverb", "snr_db": 10.0})


@acceptance(5, "1ch ordering: FCP > unprocessed, msFCP >= FCP - 0.1 dB, 90% FCP gains (< 120 s)")
class TestEndToEndSingleChannel:
    def test_ordering(self, corpus_1ch, tmp_path):
        manifest, sim_time = corpus_1ch
        start = time.perf_counter()
        raw = cmd_run(PipelineConfig.build("evaluate"), manifest, tmp_path / "raw")
        fcp = cmd_run(PipelineConfig.build(EST_10DB, "fcp", "evaluate"), manifest, tmp_path / "fcp")
        ms = cmd_run(PipelineConfig.build(EST_10DB, "msfcp", "evaluate"), manifest, tmp_path / "ms")
        elapsed = sim_time + time.perf_counter() - start
        m_raw, m_fcp, m_ms = _mean_si_sdr(raw), _mean_si_sdr(fcp), _mean_si_sdr(ms)
        print(f"1ch mean SI-SDR: unprocessed {m_raw:.2f}, FCP {m_fcp:.2f}, msFCP {m_ms:.2f} dB, "
              f"{elapsed:.1f} s")
        assert m_fcp > m_raw
        assert m_ms >= m_fcp - 0.1
        gains = [fcp[s].mean_si_sdr_db > raw[s].mean_si_sdr_db for s in raw]
        assert np.mean(gains) >= 0.9
        assert elapsed < 120.0


@acceptance(6, "2ch ordering: msFCP_MVDR chain > MVDR on mixture > unprocessed (< 300 s)")
class TestEndToEndTwoChannel:
    def test_ordering(self, corpus_2ch, tmp_path):
        manifest, sim_time = corpus_2ch
        start = time.perf_counter()
        raw = cmd_run(PipelineConfig.build("evaluate"), manifest, tmp_path / "raw")
        mix_bf = cmd_run(
            PipelineConfig.build(EST_10DB, ("mvdr", {"variant": "mixture_residual"}), "evaluate"),
            manifest, tmp_path / "mvdr",
        )
        chain = cmd_run(
            PipelineConfig.build(EST_10DB, "msfcp", ("mvdr", {"variant": "dereverb_residual"}),
                                 "evaluate"),
            manifest, tmp_path / "msfcp_mvdr",
        )
        elapsed = sim_time + time.perf_counter() - start
        m_raw, m_bf, m_chain = _mean_si_sdr(raw), _mean_si_sdr(mix_bf), _mean_si_sdr(chain)
        print(f"2ch mean SI-SDR: unprocessed {m_raw:.2f}, MVDR {m_bf:.2f}, "
              f"msFCP_MVDR {m_chain:.2f} dB, {elapsed:.1f} s")
        assert m_chain > m_bf > m_raw
        assert elapsed < 300.0


def _time_domain(spec_data):
    return synthesize(as_spectrogram(spec_data)).data[0]


def _assert_capped(output, target):
    assert si_sdr(_time_domain(output), _time_domain(target)) == SI_SDR_CAP_DB


@pytest.fixture(scope="module")
def disjoint_scene():
    mix, direct, reverb = disjoint_speakers(np.random.default_rng(8), 400, 129, 40)
    return mix[0], [d[0] for d in direct], [x[0] for x in reverb]


@acceptance(7, "oracle estimates on exact subband scenes saturate the SI-SDR cap")
class TestOracleSaturation:
    N_FRAMES, K = 400, 40

    def test_fcp(self, disjoint_scene):
        y, s, x = disjoint_scene
        for c in range(2):
            filt = fcp_filter(y, s[c], self.K, loading=0.0)
            # FCP removes only its own speaker's reverberant excess
            _assert_capped(fcp_dereverb(y, s[c], filt).output, s[c] + x[1 - c])

    def test_cfcp(self, disjoint_scene):
        y, s, _ = disjoint_scene
        filters = [fcp_filter(y, e, self.K, loading=0.0) for e in s]
        for res in cfcp_dereverb(y, s, filters):
            _assert_capped(res.output, s[0] + s[1])

    def test_msfcp(self, disjoint_scene):
        y, s, _ = disjoint_scene
        for c, res in enumerate(msfcp_run(y, s, self.K, steps=2, loading=0.0)):
            _assert_capped(res.output, s[c])

    def test_wpe(self):
        y, s, _ = sparse_wpe_scene(np.random.default_rng(9), 800, 129, K=37, delta=3)
        psd = np.maximum(np.abs(s) ** 2, 1e-3 * np.max(np.abs(s) ** 2))
        filt = wpe_filter(y, psd, K=37, delta=3, loading=0.0)
        _assert_capped(wpe_dereverb(y, filt).output, s)

    def test_msfcp_mvdr(self):
        mix, direct, _ = disjoint_speakers(np.random.default_rng(10), self.N_FRAMES, 129, self.K,
                                           channels=2)
        per_ch = [msfcp_run(mix[q], [d[q] for d in direct], self.K, loading=0.0)
                  for q in range(2)]
        for c in range(2):
            der = np.stack([per_ch[q][c].output for q in range(2)])
            cov = covariance_set(direct[c], der)
            d, flags = steering_vector(cov.target, return_flags=True)
            bf = mvdr_weights(d, cov.nontarget, 0, flags=flags)
            _assert_capped(apply_beamformer(bf, der)[0], direct[c][0])


@acceptance(8, "STFT perfect reconstruction and SI-SDR scale invariance")
class TestReconstructionAndScale:
    def test_round_trip(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            n = int(rng.integers(256, 16001))
            x = rng.standard_normal(n) * rng.uniform(1e-3, 1e3)
            assert _rel(synthesize(analyze(x)).data[0], x) <= 1e-6

    def test_si_sdr_scale_invariance(self):
        rng = np.random.default_rng(12)
        for _ in range(50):
            r = rng.standard_normal(4000)
            e = r + rng.uniform(0.01, 10) * rng.standard_normal(4000)
            alpha = rng.uniform(1e-3, 1e3) * rng.choice([-1, 1])
            assert abs(si_sdr(alpha * e, r) - si_sdr(e, r)) <= 1e-9


@acceptance(9, "classic WPE objective non-increasing over 3 alternations on 20 scenes")
class TestClassicWpeMonotone:
    def test_twenty_scenes(self):
        for seed in range(20):
            spec = SceneSpec(num_speakers=1, num_channels=1, t60_seconds=0.2 + 0.3 * seed / 19,
                             duration_seconds=2.0, seed=seed)
            y = analyze(make_scene(spec).mixture).data
            _, hist = wpe_classic(y, iterations=3, return_history=True)
            assert len(hist) == 3
            assert all(b <= a for a, b in zip(hist, hist[1:])), (seed, hist)


@acceptance(10, "simulate + run + eval reports bit-identical across invocations")
class TestDeterminism:
    def test_two_invocations(self, tmp_path):
        cfg = tmp_path / "pipeline.txt"
        cfg.write_text(
            "[estimate]\nkind = white\nsnr_db = 10\n[msfcp]\n[mvdr]\n[evaluate]\n"
        )
        blobs = []
        for name in ("a", "b"):
            root = tmp_path / name
            assert main(["simulate", "--out", str(root / "corpus"), "--count", "3",
                         "--channels", "2", "--duration", "1.5", "--seed", "42"]) == 0
            manifest = str(root / "corpus" / "manifest.txt")
            assert main(["run", "--config", str(cfg), "--manifest", manifest,
                         "--out", str(root / "run")]) == 0
            assert main(["eval", "--manifest", manifest, "--out", str(root / "run")]) == 0
            blobs.append([
                (root / "run" / "report.txt").read_bytes(),
                (root / "run" / "eval_report.txt").read_bytes(),
                (root / "corpus" / "manifest.txt").read_bytes(),
            ])
        assert blobs[0] == blobs[1]
        assert blobs[0][0]
