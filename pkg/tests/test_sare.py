import copy

import numpy as np
import pytest

from recapaug.errors import ConfigError, NumericError, RangeError, UndefinedLossError
from recapaug.rng import derive_rng
from recapaug.sare import (
    MegaBatch,
    RiskVector,
    ToyModel,
    TrainConfig,
    build_megabatch,
    make_toy_scenario,
    sare_grad,
    sare_loss,
    spoof_risks,
    supcon_loss,
    supcon_loss_and_grad,
    total_loss,
    toy_augmentor,
    toy_loss_and_grads,
    train_toy,
    write_trace,
)


def rv(*risks):
    return RiskVector(np.array(risks), list(range(len(risks))))


class TestSareLoss:
    def test_equal_risks_zero(self):
        assert sare_loss(rv(0.5, 0.5, 0.5)) == 0.0

    def test_symmetric_two_point(self):
        assert sare_loss(rv(0.0, 1.0)) == pytest.approx(0.25)

    def test_single_domain_zero(self):
        assert sare_loss(rv(0.42)) == 0.0

    def test_matches_scalar_oracle(self):
        risks = [0.1, 0.4, 0.7, 1.0]
        mean = sum(risks) / 4
        expected = sum((x - mean) ** 2 for x in risks) / 4
        assert sare_loss(rv(*risks)) == pytest.approx(expected, rel=1e-12)

    def test_permutation_invariant(self):
        assert sare_loss(rv(0.1, 0.9, 0.3)) == pytest.approx(sare_loss(rv(0.9, 0.3, 0.1)))

    def test_quadratic_scaling(self):
        base = rv(0.1, 0.5, 0.2)
        for c in (0.0, 0.5, 2.0):
            scaled = RiskVector(base.risks * c, base.domain_ids)
            assert sare_loss(scaled) == pytest.approx(c * c * sare_loss(base), rel=1e-12)

    def test_zero_iff_equal(self):
        assert sare_loss(rv(0.3, 0.3)) == 0.0
        assert sare_loss(rv(0.3, 0.300001)) > 0.0

    def test_empty_rejected(self):
        with pytest.raises(RangeError):
            RiskVector(np.array([]), [])


class TestSareGrad:
    def test_equal_risks_zero_grad(self):
        assert np.allclose(sare_grad(rv(0.4, 0.4, 0.4)), 0.0)

    def test_two_point_antisymmetric(self):
        assert np.allclose(sare_grad(rv(0.0, 1.0)), [-0.5, 0.5])

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        h = 1e-5
        for _ in range(100):
            risks = rng.random(6)
            grad = sare_grad(rv(*risks))
            for i in range(6):
                up = risks.copy()
                up[i] += h
                dn = risks.copy()
                dn[i] -= h
                fd = (sare_loss(rv(*up)) - sare_loss(rv(*dn))) / (2 * h)
                assert grad[i] == pytest.approx(fd, rel=1e-4, abs=1e-9)


class TestSupCon:
    def test_two_identical_reals_no_spoof_is_zero(self):
        z = np.array([[1.0, 0.0], [1.0, 0.0]])
        loss = supcon_loss(z, np.array([True, True]))
        assert loss == pytest.approx(0.0, abs=1e-12)

    def test_orthogonal_reals_beat_permuted_labels(self):
        z = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])
        aligned = supcon_loss(z, np.array([True, True, False, False]))
        permuted = supcon_loss(z, np.array([True, False, True, False]))
        assert aligned < permuted

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        z = rng.normal(size=(8, 5))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        is_real = np.array([True, True, True, False, False, True, False, False])
        _, grad = supcon_loss_and_grad(z, is_real, tau=0.07)
        h = 1e-6
        for idx in [(0, 0), (2, 3), (4, 1), (7, 4), (5, 2)]:
            up = z.copy()
            up[idx] += h
            dn = z.copy()
            dn[idx] -= h
            fd = (supcon_loss(up, is_real) - supcon_loss(dn, is_real)) / (2 * h)
            assert grad[idx] == pytest.approx(fd, rel=1e-4, abs=1e-8)

    def test_fewer_than_two_reals_rejected(self):
        z = np.eye(3)
        with pytest.raises(UndefinedLossError):
            supcon_loss(z, np.array([True, False, False]))

    def test_bad_temperature_rejected(self):
        z = np.eye(2)
        with pytest.raises(RangeError):
            supcon_loss(z, np.array([True, True]), tau=0.0)


class TestTotalLoss:
    def test_ablation_reduces_to_bce(self):
        report = total_loss(0.7, 0.5, 0.3, alpha=0.0, beta=0.0)
        assert report.total == 0.7

    def test_defaults(self):
        report = total_loss(1.0, 0.0, 0.0)
        assert report.alpha == 0.02 and report.beta == 10.0

    def test_worked_example(self):
        report = total_loss(1.0, 0.5, 0.1, alpha=0.02, beta=10.0)
        assert report.total == pytest.approx(2.01, rel=1e-12)

    def test_linearity_in_each_term(self):
        base = total_loss(1.0, 2.0, 3.0, 0.5, 2.0).total
        assert total_loss(2.0, 2.0, 3.0, 0.5, 2.0).total - base == pytest.approx(1.0)
        assert total_loss(1.0, 4.0, 3.0, 0.5, 2.0).total - base == pytest.approx(1.0)
        assert total_loss(1.0, 2.0, 4.0, 0.5, 2.0).total - base == pytest.approx(2.0)

    def test_non_finite_rejected(self):
        with pytest.raises(NumericError):
            total_loss(float("nan"), 0.0, 0.0)


class TestMegaBatch:
    def _domain_batches(self, count, size=10):
        rng = np.random.default_rng(1)
        out = []
        for d in range(1, count + 1):
            feats = rng.normal(size=(size, 2))
            flags = rng.random(size) < 0.5
            flags[0] = True  # ensure a spoof everywhere
            out.append((feats, flags, d))
        return out

    def test_three_domains_make_six_slices(self):
        mega = build_megabatch(self._domain_batches(3), toy_augmentor, batch_budget=120)
        assert mega.m == 6
        assert len(mega.slices) == 6

    def test_single_domain_makes_two(self):
        mega = build_megabatch(self._domain_batches(1), toy_augmentor)
        assert mega.m == 2 and len(mega.slices) == 2

    def test_slices_round_trip_sources(self):
        batches = self._domain_batches(3)
        mega = build_megabatch(batches, toy_augmentor)
        for i, (feats, flags, domain_id) in enumerate(batches):
            did, got_feats, got_flags = mega.domain_batch(i)
            assert did == domain_id
            assert np.array_equal(got_feats, feats)
            assert np.array_equal(got_flags, flags)

    def test_budget_violation_names_budget_and_m(self):
        with pytest.raises(ConfigError, match=r"S\^B=32.*m=6"):
            build_megabatch(self._domain_batches(3, size=10), toy_augmentor, batch_budget=32)

    def test_bad_slices_rejected(self):
        with pytest.raises(ConfigError):
            MegaBatch(
                features=np.zeros((4, 2)),
                is_spoof=np.zeros(4, bool),
                slices=[(1, 0, 2), (2, 3, 4)],
                m=2,
            )


class TestSpoofRisks:
    def test_single_slice_mean(self):
        mega = MegaBatch(
            features=np.zeros((2, 1)),
            is_spoof=np.array([True, True]),
            slices=[(5, 0, 2)],
            m=1,
        )
        risks = spoof_risks(mega, np.array([0.2, 0.4]))
        assert risks.risks == pytest.approx([0.3])
        assert risks.domain_ids == [5]

    def test_bonafide_only_slice_excluded(self):
        mega = MegaBatch(
            features=np.zeros((4, 1)),
            is_spoof=np.array([True, True, False, False]),
            slices=[(1, 0, 2), (2, 2, 4)],
            m=2,
        )
        risks = spoof_risks(mega, np.array([0.2, 0.4, 9.0, 9.0]))
        assert risks.m == 1 and risks.domain_ids == [1]

    def test_grouping_matches_oracle(self):
        rng = np.random.default_rng(2)
        losses = rng.random(9)
        flags = np.array([1, 0, 1, 1, 1, 0, 0, 1, 1], dtype=bool)
        mega = MegaBatch(
            features=np.zeros((9, 1)),
            is_spoof=flags,
            slices=[(1, 0, 3), (2, 3, 6), (3, 6, 9)],
            m=3,
        )
        risks = spoof_risks(mega, losses)
        expected = [
            losses[[0, 2]].mean(),
            losses[[3, 4]].mean(),
            losses[[7, 8]].mean(),
        ]
        assert np.allclose(risks.risks, expected)

    def test_no_spoof_anywhere_rejected(self):
        mega = MegaBatch(
            features=np.zeros((2, 1)),
            is_spoof=np.array([False, False]),
            slices=[(1, 0, 2)],
            m=1,
        )
        with pytest.raises(UndefinedLossError):
            spoof_risks(mega, np.array([0.1, 0.2]))


class TestToyTrainer:
    def test_risk_gap_shrinks_with_beta(self):
        trace0, _ = train_toy(TrainConfig(alpha=0.0, beta=0.0))
        trace1, _ = train_toy(TrainConfig(alpha=0.0, beta=10.0))
        r0 = np.array(trace0[-1]["risks"])
        r1 = np.array(trace1[-1]["risks"])
        gap0 = r0.max() - r0.min()
        gap1 = r1.max() - r1.min()
        assert gap1 <= 0.5 * gap0

    def test_supcon_does_not_blow_up_bce(self):
        plain, _ = train_toy(TrainConfig(alpha=0.0, beta=10.0))
        with_con, _ = train_toy(TrainConfig(alpha=0.02, beta=10.0))
        assert with_con[-1]["bce"] <= 1.1 * plain[-1]["bce"]

    def test_epoch0_gradients_match_finite_differences(self):
        config = TrainConfig(alpha=0.02, beta=10.0)
        scenario = make_toy_scenario(config.seed)
        mega = build_megabatch(scenario, toy_augmentor, batch_budget=config.batch_budget)
        model = ToyModel.init(derive_rng(config.seed, "init"), 2, config.hidden)
        _, _, grads = toy_loss_and_grads(model, mega, config)

        def loss_of(m):
            return toy_loss_and_grads(m, mega, config)[0].total

        h = 1e-5
        rng = np.random.default_rng(9)
        for name in ("w1", "b1", "w2"):
            arr = getattr(model, name)
            flat_indices = rng.choice(arr.size, size=min(6, arr.size), replace=False)
            for flat in flat_indices:
                idx = np.unravel_index(flat, arr.shape)
                up = copy.deepcopy(model)
                getattr(up, name)[idx] += h
                dn = copy.deepcopy(model)
                getattr(dn, name)[idx] -= h
                fd = (loss_of(up) - loss_of(dn)) / (2 * h)
                assert grads[name][idx] == pytest.approx(fd, rel=1e-4, abs=1e-8)
        up = copy.deepcopy(model)
        up.b2 += h
        dn = copy.deepcopy(model)
        dn.b2 -= h
        fd = (loss_of(up) - loss_of(dn)) / (2 * h)
        assert grads["b2"] == pytest.approx(fd, rel=1e-4, abs=1e-8)

    def test_plain_bce_ablation_matches_reference_loop(self):
        config = TrainConfig(alpha=0.0, beta=0.0, epochs=50)
        trace, _ = train_toy(config)

        # independent BCE-only loop with the same init and data
        scenario = make_toy_scenario(config.seed)
        mega = build_megabatch(scenario, toy_augmentor, batch_budget=config.batch_budget)
        model = ToyModel.init(derive_rng(config.seed, "init"), 2, config.hidden)
        x, y = mega.features, mega.is_spoof.astype(float)
        ref = []
        for _ in range(config.epochs):
            pre = x @ model.w1.T + model.b1
            emb = np.tanh(pre)
            logits = emb @ model.w2 + model.b2
            ref.append(float(np.mean(np.logaddexp(0.0, logits) - y * logits)))
            probs = 1.0 / (1.0 + np.exp(-logits))
            d_logits = (probs - y) / len(y)
            d_emb = np.outer(d_logits, model.w2)
            d_pre = d_emb * (1.0 - emb**2)
            model.w1 -= config.lr * (d_pre.T @ x)
            model.b1 -= config.lr * d_pre.sum(axis=0)
            model.w2 -= config.lr * (emb.T @ d_logits)
            model.b2 -= config.lr * float(d_logits.sum())
        assert np.allclose([r["bce"] for r in trace], ref, rtol=1e-10)
        assert np.allclose([r["total"] for r in trace], ref, rtol=1e-10)

    def test_trace_is_deterministic(self):
        a, _ = train_toy(TrainConfig(epochs=20))
        b, _ = train_toy(TrainConfig(epochs=20))
        assert a == b

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_raises_numeric_error(self):
        bad = make_toy_scenario(0)
        feats, flags, domain_id = bad[0]
        feats = feats.copy()
        feats[0, 0] = np.inf
        bad[0] = (feats, flags, domain_id)
        with pytest.raises(NumericError, match="epoch"):
            train_toy(TrainConfig(alpha=0.0, beta=0.0, epochs=5), scenario=bad)

    def test_trace_jsonl_output(self, tmp_path):
        import json

        trace, _ = train_toy(TrainConfig(epochs=5))
        path = tmp_path / "trace.jsonl"
        write_trace(trace, path)
        lines = path.read_text().strip().split("\n")
        assert len(lines) == 5
        rec = json.loads(lines[0])
        assert set(rec) >= {"epoch", "bce", "con", "sare", "total", "risks"}
        assert len(rec["risks"]) == 4
