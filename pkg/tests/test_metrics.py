"""Reconstruction metrics against direct-formula oracles."""

import numpy as np
import pytest

from artieval.core import FrameSequence
from artieval.metrics import combined_loss, pcc, rmse, score_pairs

from evalhelpers import pcc_oracle, rmse_oracle, seq_of


def random_pair(rng, t=None, d=None, names=None):
    t = t or int(rng.integers(5, 60))
    d = d or int(rng.integers(1, 6))
    if names is None:
        names = tuple(f"c{i}" for i in range(d))
    p = seq_of(rng.standard_normal((t, d)), names=names)
    r = seq_of(rng.standard_normal((t, d)), names=names)
    return p, r


class TestRmse:
    def test_identity_zero(self):
        seq = seq_of(np.random.default_rng(0).standard_normal((20, 3)))
        res = rmse(seq, seq)
        assert res.aggregate == 0.0
        assert all(v == 0.0 for v in res.per_channel.values())

    def test_constant_offset(self):
        r = seq_of(np.arange(10.0))
        p = seq_of(np.arange(10.0) + 2.0)
        res = rmse(p, r)
        assert res.per_channel["c0"] == pytest.approx(2.0, abs=1e-12)

    def test_oracle_50x4(self):
        rng = np.random.default_rng(1)
        p, r = random_pair(rng, t=50, d=4)
        res = rmse(p, r)
        for i, name in enumerate(p.channel_names):
            want = rmse_oracle(p.frames[:, i], r.frames[:, i])
            assert res.per_channel[name] == pytest.approx(want, abs=1e-9)

    def test_symmetric(self):
        rng = np.random.default_rng(2)
        p, r = random_pair(rng)
        assert rmse(p, r).aggregate == rmse(r, p).aggregate

    def test_constriction_channels_excluded(self):
        names = ("TTx", "TTC", "TBC")
        p = seq_of(np.random.default_rng(3).standard_normal((15, 3)), names=names)
        r = seq_of(np.random.default_rng(4).standard_normal((15, 3)), names=names)
        res = rmse(p, r)
        assert set(res.per_channel) == {"TTx"}
        assert res.aggregate == res.per_channel["TTx"]

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            rmse(seq_of(np.zeros((3, 1))), seq_of(np.zeros((4, 1))))

    def test_name_mismatch(self):
        with pytest.raises(ValueError):
            rmse(seq_of(np.zeros((3, 1)), names=("a",)),
                 seq_of(np.zeros((3, 1)), names=("b",)))


class TestPcc:
    def test_identity_one(self):
        seq = seq_of(np.random.default_rng(5).standard_normal((20, 2)))
        res = pcc(seq, seq)
        assert res.aggregate == pytest.approx(1.0, abs=1e-12)

    def test_negation_minus_one(self):
        seq = seq_of(np.random.default_rng(6).standard_normal(20))
        res = pcc(seq_of(-seq.frames[:, 0]), seq)
        assert res.per_channel["c0"] == pytest.approx(-1.0, abs=1e-12)

    def test_affine_invariance(self):
        rng = np.random.default_rng(7)
        r = seq_of(rng.standard_normal(30))
        p = seq_of(2.5 * r.frames[:, 0] + 7.0)
        assert pcc(p, r).per_channel["c0"] == pytest.approx(1.0, abs=1e-12)

    def test_oracle(self):
        rng = np.random.default_rng(8)
        p, r = random_pair(rng, t=40, d=3)
        res = pcc(p, r)
        for i, name in enumerate(p.channel_names):
            want = pcc_oracle(p.frames[:, i], r.frames[:, i])
            assert res.per_channel[name] == pytest.approx(want, abs=1e-9)

    def test_constriction_channels_included(self):
        names = ("TTx", "TTC")
        rng = np.random.default_rng(9)
        p, r = random_pair(rng, t=25, d=2, names=names)
        assert set(pcc(p, r).per_channel) == {"TTx", "TTC"}

    def test_zero_variance_flagged_as_zero(self):
        r = seq_of(np.ones(10))
        p = seq_of(np.random.default_rng(10).standard_normal(10))
        res = pcc(p, r)
        assert res.per_channel["c0"] == 0.0
        assert "c0" in res.flagged

    def test_clamped_to_unit_interval(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            p, r = random_pair(rng)
            res = pcc(p, r)
            for v in res.per_channel.values():
                assert -1.0 <= v <= 1.0


class TestCombinedLoss:
    def test_perfect_prediction(self):
        seq = seq_of(np.random.default_rng(12).standard_normal(20))
        assert combined_loss(seq, seq, beta=1000.0) == pytest.approx(-1000.0, abs=1e-9)

    def test_beta_zero_is_rmse(self):
        rng = np.random.default_rng(13)
        p, r = random_pair(rng)
        assert combined_loss(p, r, beta=0.0) == rmse(p, r).aggregate

    def test_composed_oracle(self):
        rng = np.random.default_rng(14)
        p, r = random_pair(rng, t=30, d=3)
        # aggregate oracle: RMSE skips TTC/TBC names (none here), PCC keeps all
        want_rmse = np.mean(
            [rmse_oracle(p.frames[:, i], r.frames[:, i]) for i in range(3)]
        )
        want_pcc = np.mean(
            [pcc_oracle(p.frames[:, i], r.frames[:, i]) for i in range(3)]
        )
        got = combined_loss(p, r, beta=1000.0)
        assert got == pytest.approx(want_rmse - 1000.0 * want_pcc, abs=1e-9)

    def test_monotone_in_pcc(self):
        # same RMSE, lower correlation -> higher loss
        t = np.arange(40.0)
        r = seq_of(np.sin(t / 5.0))
        aligned = seq_of(np.sin(t / 5.0) + 0.5)
        inverted = seq_of(-np.sin(t / 5.0) + 0.5)
        assert combined_loss(aligned, r) < combined_loss(inverted, r)


class TestMasking:
    def test_masked_channel_fully_ignored(self):
        rng = np.random.default_rng(15)
        names = ("a", "b")
        p, r = random_pair(rng, t=20, d=2, names=names)
        mask = (True, False)
        base_r = rmse(p, r, mask=mask)
        base_p = pcc(p, r, mask=mask)
        base_c = combined_loss(p, r, mask=mask)
        scrambled = seq_of(
            np.column_stack([p.frames[:, 0], rng.standard_normal(20) * 100]),
            names=names,
        )
        assert rmse(scrambled, r, mask=mask).per_channel == base_r.per_channel
        assert rmse(scrambled, r, mask=mask).aggregate == base_r.aggregate
        assert pcc(scrambled, r, mask=mask).aggregate == base_p.aggregate
        assert combined_loss(scrambled, r, mask=mask) == base_c

    def test_all_masked_gives_empty_aggregate(self):
        rng = np.random.default_rng(16)
        p, r = random_pair(rng, t=10, d=2)
        res = rmse(p, r, mask=(False, False))
        assert res.per_channel == {}
        assert res.aggregate == 0.0


class TestScorePairs:
    def test_frame_pooled_equals_concatenation(self):
        rng = np.random.default_rng(17)
        names = ("TTx", "TTy")
        pairs = []
        all_p, all_r = [], []
        for _ in range(3):
            p, r = random_pair(rng, t=int(rng.integers(5, 15)), d=2, names=names)
            pairs.append((p, r, (True, True)))
            all_p.append(p.frames)
            all_r.append(r.frames)
        report = score_pairs(pairs)
        pooled_p = seq_of(np.vstack(all_p), names=names)
        pooled_r = seq_of(np.vstack(all_r), names=names)
        want = rmse(pooled_p, pooled_r)
        assert report.rmse_norm.per_channel == want.per_channel
        assert report.pcc.per_channel == pcc(pooled_p, pooled_r).per_channel
        assert report.n_utterances == 3
        assert report.n_frames == pooled_p.num_frames

    def test_per_utterance_mode_averages(self):
        rng = np.random.default_rng(18)
        names = ("TTx",)
        pairs = []
        vals = []
        for _ in range(4):
            p, r = random_pair(rng, t=10, d=1, names=names)
            pairs.append((p, r, (True,)))
            vals.append(rmse(p, r).per_channel["TTx"])
        report = score_pairs(pairs, per_utterance=True)
        assert report.rmse_norm.per_channel["TTx"] == pytest.approx(
            np.mean(vals), abs=1e-12
        )
        assert report.pooling == "per-utterance"

    def test_report_dict_shape(self):
        rng = np.random.default_rng(19)
        p, r = random_pair(rng, t=10, d=1, names=("TTx",))
        d = score_pairs([(p, r, (True,))]).to_dict()
        for key in ("rmse_norm", "pcc", "channels", "n_frames", "n_utterances",
                    "pooling", "mask", "flags"):
            assert key in d
        assert d["rmse_norm"]["aggregate"] >= 0.0
