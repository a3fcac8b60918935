from fractions import Fraction

import numpy as np
import pytest

from docmt.errors import InvalidLength, LengthExceedsModelMax
from docmt.positions import (OffsetSampler, coverage_profile, draw_unifpe_offset, empirical_profile,
                             flatness, offset_distribution, profiles_csv, sample_offset,
                             shape_offset_distribution, unifpe_exact, unifpe_offset_distribution)


def enumerate_unifpe(l, M):
    """Marginal by listing every (gap, block) pair with weight 1/m^2."""
    if M < 2 * l:
        return {0: Fraction(1)}
    m = M // l
    r = M - m * l
    out = {}
    for g in range(1, m + 1):
        for j in range(m):
            k = j * l + (r if j >= g else 0)
            out[k] = out.get(k, 0) + Fraction(1, m * m)
    return out


def within_3se(empirical, expected, n):
    se = np.sqrt(expected * (1 - expected) / n)
    # a position with expected 0 or 1 is deterministic and must match exactly
    return np.all(np.abs(empirical - expected) <= 3 * se + 1e-12)


class TestUnifpeDistribution:
    def test_l200_M512(self):
        assert unifpe_exact(200, 512) == {0: Fraction(1, 2), 200: Fraction(1, 4), 312: Fraction(1, 4)}
        assert unifpe_offset_distribution(200, 512).as_dict() == {0: 0.5, 200: 0.25, 312: 0.25}

    @pytest.mark.parametrize("l,M", [(300, 512), (512, 512), (1, 1)])
    def test_no_room(self, l, M):
        assert unifpe_offset_distribution(l, M).as_dict() == {0: 1.0}

    @pytest.mark.parametrize("l,M", [(0, 10), (11, 10)])
    def test_invalid(self, l, M):
        with pytest.raises(InvalidLength):
            unifpe_offset_distribution(l, M)

    def test_matches_enumeration(self):
        for M in (8, 17, 64, 100):
            for l in range(1, M + 1):
                exact = unifpe_exact(l, M)
                assert exact == enumerate_unifpe(l, M)
                assert sum(exact.values()) == 1
                assert all(0 <= k and k + l <= M for k in exact)

    def test_generative_sampler_agrees(self):
        rng = np.random.default_rng(0)
        n = 100_000
        draws = np.array([draw_unifpe_offset(200, 512, rng) for _ in range(n)])
        for k, p in unifpe_exact(200, 512).items():
            freq = np.mean(draws == k)
            assert abs(freq - float(p)) <= 3 * np.sqrt(float(p) * (1 - float(p)) / n)
        assert set(np.unique(draws)) == {0, 200, 312}


class TestShape:
    def test_small(self):
        d = shape_offset_distribution(2, 4).as_dict()
        assert d == pytest.approx({0: 1 / 3, 1: 1 / 3, 2: 1 / 3})

    def test_full_length(self):
        assert shape_offset_distribution(7, 7).as_dict() == {0: 1.0}

    def test_max_offset_cap(self):
        assert set(shape_offset_distribution(2, 100, max_offset=3).offsets) == {0, 1, 2, 3}
        assert max(shape_offset_distribution(90, 100, max_offset=30).offsets) == 10


class TestSampleOffset:
    def test_point_mass(self):
        rng = np.random.default_rng(1)
        assert {sample_offset(unifpe_offset_distribution(300, 512), rng) for _ in range(50)} == {0}

    def test_frequencies(self):
        dist = unifpe_offset_distribution(200, 512)
        n = 100_000
        draws = sample_offset(dist, np.random.default_rng(2), size=n)
        for k, p in dist.as_dict().items():
            assert abs(np.mean(draws == k) - p) <= 3 * np.sqrt(p * (1 - p) / n)

    def test_chi_square(self):
        dist = shape_offset_distribution(5, 15)
        n = 20_000
        draws = sample_offset(dist, np.random.default_rng(3), size=n)
        observed = np.array([np.sum(draws == k) for k in dist.offsets])
        expected = np.array(dist.probs) * n
        chi2 = float(np.sum((observed - expected) ** 2 / expected))
        # 10 degrees of freedom; 29.59 is the 0.999 quantile
        assert chi2 < 29.59

    def test_same_seed_same_sequence(self):
        a = OffsetSampler("unifpe", 512, seed=9)
        b = OffsetSampler("unifpe", 512, seed=9)
        assert [a(200) for _ in range(30)] == [b(200) for _ in range(30)]

    def test_positions_inside_model(self):
        s = OffsetSampler("shape", 64, seed=0)
        for l in (1, 10, 64):
            pos = s.positions(l)
            assert len(pos) == l and pos[0] >= 1 and pos[-1] <= 64


class TestCoverage:
    def test_baseline(self):
        assert coverage_profile([3, 5], "baseline", 8).tolist() == [1, 1, 1, .5, .5, 0, 0, 0]

    def test_unifpe_piecewise(self):
        p = coverage_profile([200], "unifpe", 512)
        np.testing.assert_allclose(p[0:200], 0.5)
        np.testing.assert_allclose(p[200:312], 0.25)
        np.testing.assert_allclose(p[312:400], 0.5)
        np.testing.assert_allclose(p[400:512], 0.25)

    def test_shape_trapezoid(self):
        p = coverage_profile([200], "shape", 512)
        assert p.max() == pytest.approx(200 / 313)
        assert p[0] == pytest.approx(1 / 313)
        assert np.all(np.diff(p[:200]) > 0)

    def test_shape_reduces_small_positions(self):
        lengths = [50, 100, 200, 400]
        assert np.all(coverage_profile(lengths, "shape", 512)[:50] < coverage_profile(lengths, "baseline", 512)[:50])

    def test_too_long(self):
        with pytest.raises(LengthExceedsModelMax):
            coverage_profile([10, 600], "unifpe", 512)

    @pytest.mark.parametrize("sampler", ["baseline", "shape", "unifpe"])
    def test_mass_and_range(self, sampler):
        rng = np.random.default_rng(4)
        lengths = rng.integers(1, 300, size=40).tolist()
        p = coverage_profile(lengths, sampler, 300)
        assert p.sum() == pytest.approx(np.mean(lengths), abs=1e-9)
        assert np.all((p >= 0) & (p <= 1))

    def test_full_coverage(self):
        for M in (16, 100, 512):
            for l in range(1, M // 2 + 1):
                assert np.all(coverage_profile([l], "unifpe", M) > 0)
        assert np.all(coverage_profile([100], "baseline", 512)[100:] == 0)

    @pytest.mark.parametrize("sampler", ["baseline", "shape", "unifpe"])
    def test_monte_carlo(self, sampler):
        lengths = [200, 90, 33]
        n = 100_000
        emp = empirical_profile(lengths, sampler, 512, n, np.random.default_rng(5))
        assert within_3se(emp, coverage_profile(lengths, sampler, 512), n)


class TestFlatness:
    def test_constant(self):
        assert flatness(np.full(10, 0.3)) == 0

    def test_zero_region(self):
        assert flatness([1, 1, 0, 0]) > 0

    def test_unifpe_flatter(self):
        assert flatness(coverage_profile([200], "unifpe", 512)) < flatness(coverage_profile([200], "baseline", 512))

    def test_window(self):
        assert flatness([5, 1, 1, 1], lo=2) == 0


def test_profiles_csv():
    text = profiles_csv([3, 5], 8)
    lines = text.splitlines()
    assert lines[0] == "index,baseline,shape,unifpe"
    assert len(lines) == 9
    assert lines[1].split(",")[:2] == ["1", "1.0"]


def test_offset_distribution_rejects_unknown():
    with pytest.raises(ValueError):
        offset_distribution("rope", 1, 2)
