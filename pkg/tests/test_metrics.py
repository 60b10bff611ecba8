import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from convpred.errors import DataError
from convpred.metrics import (
    SI_SDR_CAP_DB,
    EvalReport,
    format_record,
    parse_record,
    resolve_permutation,
    si_sdr,
)

from oracles import naive_si_sdr


class TestSiSdr:
    def test_worked_example(self):
        assert si_sdr([1.0, 1.0], [1.0, 0.0]) == 0.0

    def test_scaled_copy_hits_cap(self):
        r = np.random.default_rng(0).standard_normal(100)
        assert si_sdr(2.5 * r, r) == SI_SDR_CAP_DB
        assert si_sdr(r, r) == SI_SDR_CAP_DB

    def test_orthogonal_hits_floor(self):
        assert si_sdr([0.0, 1.0], [1.0, 0.0]) == -SI_SDR_CAP_DB

    def test_matches_naive(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            r = rng.standard_normal(300)
            e = r + rng.uniform(0.1, 3) * rng.standard_normal(300)
            assert si_sdr(e, r) == pytest.approx(naive_si_sdr(e, r), abs=1e-9)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1),
           st.floats(1e-3, 1e3) | st.floats(-1e3, -1e-3))
    def test_scale_invariance(self, seed, alpha):
        rng = np.random.default_rng(seed)
        r = rng.standard_normal(200)
        e = r + rng.standard_normal(200)
        assert abs(si_sdr(alpha * e, r) - si_sdr(e, r)) <= 1e-9

    def test_errors(self):
        with pytest.raises(DataError):
            si_sdr([1.0, 2.0], [0.0, 0.0])
        with pytest.raises(DataError):
            si_sdr([1.0, 2.0], [1.0])
        with pytest.raises(DataError):
            si_sdr(np.ones((2, 3)), np.ones((2, 3)))


class TestPermutation:
    def _refs(self, n, seed=2):
        rng = np.random.default_rng(seed)
        return [rng.standard_normal(400) for _ in range(n)]

    def test_identity(self):
        refs = self._refs(3)
        rep = resolve_permutation(refs, refs)
        assert rep.permutation == [0, 1, 2]
        assert rep.per_speaker_si_sdr_db == [SI_SDR_CAP_DB] * 3

    def test_swap(self):
        refs = self._refs(2)
        rep = resolve_permutation(refs[::-1], refs)
        assert rep.permutation == [1, 0]

    def test_brute_force_cross_check(self):
        rng = np.random.default_rng(3)
        for n in (2, 3, 4):
            refs = self._refs(n, seed=n)
            ests = [r + rng.uniform(0.5, 2) * rng.standard_normal(400) for r in refs]
            ests = [ests[i] for i in rng.permutation(n)]
            rep = resolve_permutation(ests, refs)
            best = max(
                itertools.permutations(range(n)),
                key=lambda p: sum(naive_si_sdr(ests[p[i]], refs[i]) for i in range(n)),
            )
            assert list(best) == rep.permutation
            assert sorted(rep.permutation) == list(range(n))

    def test_invariant_to_joint_reordering(self):
        rng = np.random.default_rng(4)
        refs = self._refs(3, seed=5)
        ests = [r + rng.standard_normal(400) for r in refs]
        order = [2, 0, 1]
        a = resolve_permutation(ests, refs)
        b = resolve_permutation([ests[i] for i in order], [refs[i] for i in order])
        assert b.mean_si_sdr_db == pytest.approx(a.mean_si_sdr_db, abs=1e-12)

    def test_improvement(self):
        refs = self._refs(2)
        mix = refs[0] + refs[1]
        rep = resolve_permutation(refs, refs, mix)
        base = np.mean([si_sdr(mix, r) for r in refs])
        assert rep.improvement_over_mixture_db == pytest.approx(SI_SDR_CAP_DB - base)

    def test_errors(self):
        refs = self._refs(5)
        with pytest.raises(DataError):
            resolve_permutation(refs[:2], refs[:3])
        with pytest.raises(DataError):
            resolve_permutation(refs, refs)


class TestRecord:
    def test_round_trip(self):
        rep = EvalReport([1.25, -3.5], -1.125, [1, 0], 4.0)
        line = format_record("scene007", "estimate[white:inf]+fcp", rep)
        assert "\n" not in line
        sid, chain, back = parse_record(line)
        assert (sid, chain) == ("scene007", "estimate[white:inf]+fcp")
        assert back == rep

    def test_nan_improvement(self):
        rep = EvalReport([1.0], 1.0, [0])
        _, _, back = parse_record(format_record("s", "c", rep))
        assert math.isnan(back.improvement_over_mixture_db)

    def test_malformed(self):
        with pytest.raises(DataError):
            parse_record("scene=x\tchain=y")
