import math
import random

import pytest

from channel.capacity import ChannelParams, dimension_budget, rate_lower_bound, source_bitrate
from channel.trace import ChannelTrace, budget_trace, read_trace, write_budget_csv


def _params(eta=2.0, period_T=1.0, ratio=4.0):
    return ChannelParams(eta=eta, period_T=period_T, source_var=ratio, quant_dist=1.0)


def _random_params(seed):
    r = random.Random(seed)
    d = r.uniform(0.1, 2.0)
    return ChannelParams(
        eta=r.uniform(0.5, 4.0),
        period_T=r.uniform(0.01, 2.0),
        source_var=d * r.uniform(1.1, 64.0),
        quant_dist=d,
    )


# ---------------------------------------------------------------------------
# Rate bound and bit accounting
# ---------------------------------------------------------------------------


class TestRateLowerBound:
    def test_four_to_one(self):
        assert rate_lower_bound(4.0, 1.0) == 1.0

    def test_sixteen_to_one(self):
        assert rate_lower_bound(16.0, 1.0) == 2.0

    def test_distortion_equals_variance(self):
        with pytest.raises(ValueError, match="rate bound non-positive"):
            rate_lower_bound(1.0, 1.0)

    def test_params_reject_same_condition(self):
        with pytest.raises(ValueError, match="rate bound non-positive"):
            ChannelParams(source_var=1.0, quant_dist=2.0)


class TestSourceBitrate:
    def test_zero_dims(self):
        assert source_bitrate(0, _params()) == 0.0

    def test_fifty_dims(self):
        assert source_bitrate(50, _params(eta=2.0, period_T=1.0, ratio=4.0)) == pytest.approx(100.0)

    def test_one_dim_half_period(self):
        assert source_bitrate(1, _params(eta=1.0, period_T=0.5, ratio=16.0)) == pytest.approx(4.0)

    def test_linear_in_dim(self):
        p = _random_params(3)
        assert source_bitrate(7, p) + source_bitrate(5, p) == pytest.approx(source_bitrate(12, p))

    def test_negative_dim(self):
        with pytest.raises(ValueError):
            source_bitrate(-1, _params())


class TestDimensionBudget:
    def test_exact(self):
        assert dimension_budget(100.0, _params()) == 50

    def test_zero_capacity(self):
        assert dimension_budget(0.0, _params()) == 0

    def test_floor(self):
        assert dimension_budget(99.0, _params()) == 49

    def test_negative_capacity(self):
        with pytest.raises(ValueError):
            dimension_budget(-1.0, _params())

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_hand_evaluation(self, seed):
        p = _random_params(seed)
        c = random.Random(100 + seed).uniform(0.0, 5000.0)
        expected = math.floor(2 * c * p.period_T / (p.eta * math.log2(p.source_var / p.quant_dist)))
        assert dimension_budget(c, p) == expected
        assert source_bitrate(expected, p) == pytest.approx(
            expected * p.eta * math.log2(p.source_var / p.quant_dist) / (2 * p.period_T), rel=1e-12
        )
        assert source_bitrate(dimension_budget(c, p), p) <= c * (1 + 1e-12)

    def test_capacity_on_boundary(self):
        p = ChannelParams(eta=1.0, period_T=0.1, source_var=3.0, quant_dist=1.0)
        assert dimension_budget(source_bitrate(13, p), p) == 13

    @pytest.mark.parametrize("seed", range(50))
    def test_bitrate_of_k_buys_k(self, seed):
        p = _random_params(seed)
        for k in random.Random(500 + seed).sample(range(1, 4000), 40):
            c = source_bitrate(k, p)
            assert dimension_budget(c, p) == k
            assert source_bitrate(dimension_budget(c, p), p) <= c

    def test_monotone(self):
        base = _params(eta=1.0, period_T=1.0, ratio=4.0)
        assert dimension_budget(30.0, base) <= dimension_budget(31.0, base)
        assert dimension_budget(30.0, _params(eta=1.0, period_T=2.0)) >= dimension_budget(30.0, base)
        assert dimension_budget(30.0, _params(eta=2.0, period_T=1.0)) <= dimension_budget(30.0, base)
        lossier = ChannelParams(eta=1.0, period_T=1.0, source_var=4.0, quant_dist=2.0)
        assert dimension_budget(30.0, lossier) >= dimension_budget(30.0, base)


# ---------------------------------------------------------------------------
# Traces
# ---------------------------------------------------------------------------


class TestTrace:
    def test_constant_trace(self):
        tr = ChannelTrace([(0.0, 40.0), (1.0, 40.0), (2.0, 40.0)])
        assert budget_trace(tr, _params()) == [20, 20, 20]

    def test_doubling(self):
        tr = ChannelTrace([(0.0, 40.0), (1.0, 80.0)])
        assert budget_trace(tr, _params()) == [20, 40]

    def test_empty(self):
        assert budget_trace(ChannelTrace([]), _params()) == []

    def test_times_must_increase(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            ChannelTrace([(1.0, 10.0), (1.0, 20.0)])

    def test_negative_capacity(self):
        with pytest.raises(ValueError, match="capacity"):
            ChannelTrace([(0.0, -5.0)])

    def test_csv_files(self, tmp_path):
        src = tmp_path / "cap.csv"
        src.write_text("time_s,capacity_bps\n0,100\n0.5,99\n1.0,0\n", encoding="utf-8")
        tr = read_trace(str(src))
        assert tr.times == [0.0, 0.5, 1.0]
        out = tmp_path / "out" / "budget.csv"
        write_budget_csv(str(out), tr, budget_trace(tr, _params()))
        lines = out.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "time_s,capacity_bps,budget"
        assert [line.split(",")[-1] for line in lines[1:]] == ["50", "49", "0"]

    def test_csv_missing_column(self, tmp_path):
        src = tmp_path / "bad.csv"
        src.write_text("t,c\n0,1\n", encoding="utf-8")
        with pytest.raises(ValueError, match="missing columns"):
            read_trace(str(src))

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_trace(str(tmp_path / "none.csv"))
