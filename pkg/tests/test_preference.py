"""
Preference Module Tests - 후보 풀 / 샘플링 전략 / DPO · CE 손실 테스트
"""
import math
from collections import Counter

import numpy as np
import pytest

from src.domain.errors import ConfigError, ContractViolationError
from src.domain.models import PreferencePair, SamplingStrategy
from src.numerics import Tensor, check_gradients
from src.preference import (
    ArgmaxSampler,
    RandomSampler,
    TopKSampler,
    batch_ce_loss,
    batch_dpo_loss,
    build_candidate_pool,
    ce_loss,
    dpo_loss,
    get_sampler,
    make_pairs,
    sample_negative,
)

# 자유도 49, p = 0.001 임계값
CHI2_CRITICAL_49 = 85.35


def _oracle_pool(scores, winner, k, exclude=()):
    """전체 정렬 오라클 (점수 내림차순, 동점 시 낮은 id)"""
    candidates = [i for i in range(len(scores)) if i != winner and i not in set(exclude)]
    return sorted(candidates, key=lambda i: (-scores[i], i))[:k]


def _pair(winner=0, loser=1):
    return PreferencePair(user_id=0, winner=winner, loser=loser, strategy=SamplingStrategy.TOPK)


# ============ Candidate Pool Tests ============

class TestCandidatePool:
    def test_matches_full_sort_oracle(self):
        """1,000개 무작위 점수 벡터에서 전체 정렬 오라클과 일치"""
        rng = np.random.default_rng(7)
        for _ in range(1000):
            n = int(rng.integers(2, 40))
            scores = rng.standard_normal(n)
            if rng.random() < 0.3:
                scores = np.round(scores, 1)
            winner = int(rng.integers(n))
            k = int(rng.integers(1, n + 3))
            pool = build_candidate_pool(scores, winner, k)
            assert pool.items.tolist() == _oracle_pool(scores, winner, k)

    def test_ties_break_by_lower_id(self):
        pool = build_candidate_pool(np.array([1.0, 1.0, 1.0, 1.0, 0.0]), winner=0, k=2)
        assert pool.items.tolist() == [1, 2]

    def test_winner_never_in_pool(self):
        scores = np.array([9.0, 1.0, 2.0, 3.0])
        pool = build_candidate_pool(scores, winner=0, k=3)
        assert 0 not in pool.items.tolist()
        assert pool.items.tolist() == [3, 2, 1]

    def test_k_larger_than_catalog_clamps(self):
        """K > |I|-1 → 풀 크기 |I|-1"""
        pool = build_candidate_pool(np.arange(6, dtype=float), winner=2, k=50)
        assert len(pool) == 5

    def test_pool_logits_follow_items(self):
        scores = np.array([0.5, 2.0, -1.0, 3.0])
        pool = build_candidate_pool(scores, winner=3, k=2)
        assert pool.logits.tolist() == [2.0, 0.5]

    def test_history_exclusion(self):
        scores = np.array([0.0, 5.0, 4.0, 3.0, 2.0])
        pool = build_candidate_pool(scores, winner=0, k=2, exclude=[1])
        assert pool.items.tolist() == [2, 3]

    def test_invalid_k(self):
        with pytest.raises(ConfigError):
            build_candidate_pool(np.zeros(5), winner=0, k=0)

    def test_winner_out_of_range(self):
        with pytest.raises(ContractViolationError):
            build_candidate_pool(np.zeros(5), winner=5, k=2)

    def test_single_item_catalog(self):
        with pytest.raises(ContractViolationError):
            build_candidate_pool(np.zeros(1), winner=0, k=1)

    def test_everything_excluded(self):
        with pytest.raises(ContractViolationError):
            build_candidate_pool(np.zeros(3), winner=0, k=2, exclude=[1, 2])


# ============ Sampler Tests ============

class TestSamplers:
    def test_sample_negative_by_strategy_name(self):
        scores = np.array([0.1, 0.9, 0.5, 0.7, 0.2])
        assert sample_negative(scores, 1, "argmax", np.random.default_rng(0)) == 3
        drawn = sample_negative(scores, 1, "topk", np.random.default_rng(4), k=2)
        assert drawn in {2, 3}
        assert drawn == TopKSampler(2).sample(scores, 1, np.random.default_rng(4))
        assert sample_negative(scores, 1, "random", np.random.default_rng(0)) != 1
        assert sample_negative(scores, 1, "random", np.random.default_rng(0), exclude=[0, 2, 3]) == 4
        with pytest.raises(ConfigError):
            sample_negative(scores, 1, "hardest", np.random.default_rng(0))
    def test_topk_uniform_over_pool(self):
        """K=50 풀에서 100,000회 추출 시 chi-square (49 dof) p > 0.001"""
        scores = np.random.default_rng(1).standard_normal(80)
        winner = 3
        pool = set(build_candidate_pool(scores, winner, 50).items.tolist())
        sampler = TopKSampler(50)
        rng = np.random.default_rng(2024)
        counts = Counter(sampler.sample(scores, winner, rng) for _ in range(100_000))
        assert set(counts) == pool
        expected = 100_000 / 50
        chi2 = sum((counts[i] - expected) ** 2 / expected for i in pool)
        assert chi2 < CHI2_CRITICAL_49

    def test_topk_k1_equals_argmax(self):
        """topk(K=1) 결과는 1,000개 점수 벡터에서 argmax 와 같다"""
        rng = np.random.default_rng(5)
        topk, argmax = TopKSampler(1), ArgmaxSampler()
        for _ in range(1000):
            n = int(rng.integers(2, 30))
            scores = rng.standard_normal(n)
            winner = int(rng.integers(n))
            assert topk.sample(scores, winner, rng) == argmax.sample(scores, winner, rng)

    def test_top_item_collision_rate(self):
        """최상위 비타깃 아이템 선택 확률: topk 는 1/K, argmax 는 1"""
        scores = np.linspace(0.0, 1.0, 30)
        top_item, winner = 29, 0
        rng = np.random.default_rng(11)
        draws = 10_000
        topk_hits = sum(TopKSampler(5).sample(scores, winner, rng) == top_item for _ in range(draws))
        argmax_hits = sum(ArgmaxSampler().sample(scores, winner, rng) == top_item for _ in range(draws))
        assert abs(topk_hits / draws - 0.2) < 0.2 * 0.2
        assert argmax_hits == draws

    def test_topk_full_catalog_is_uniform(self):
        """K = |I| − 1 이면 모든 비타깃 아이템에 균등"""
        scores = np.random.default_rng(4).standard_normal(11)
        rng = np.random.default_rng(8)
        counts = Counter(TopKSampler(10).sample(scores, 6, rng) for _ in range(20_000))
        assert set(counts) == set(range(11)) - {6}
        assert all(abs(c - 2000) < 250 for c in counts.values())

    def test_argmax_skips_winner(self):
        scores = np.array([1.0, 9.0, 3.0])
        assert ArgmaxSampler().sample(scores, winner=1, rng=np.random.default_rng(0)) == 2

    def test_argmax_does_not_consume_rng(self):
        rng = np.random.default_rng(0)
        before = rng.bit_generator.state
        ArgmaxSampler().sample(np.arange(5, dtype=float), winner=0, rng=rng)
        assert rng.bit_generator.state == before

    def test_random_uniform_over_non_targets(self):
        rng = np.random.default_rng(9)
        sampler = RandomSampler()
        scores = np.zeros(5)
        counts = Counter(sampler.sample(scores, 2, rng) for _ in range(20_000))
        assert 2 not in counts
        for item in (0, 1, 3, 4):
            assert abs(counts[item] - 5000) < 300

    def test_random_with_exclusion(self):
        rng = np.random.default_rng(0)
        drawn = {RandomSampler().sample(np.zeros(5), 0, rng, exclude=[1, 2]) for _ in range(200)}
        assert drawn == {3, 4}

    def test_get_sampler(self):
        assert isinstance(get_sampler("random"), RandomSampler)
        assert isinstance(get_sampler("argmax"), ArgmaxSampler)
        sampler = get_sampler(SamplingStrategy.TOPK, k=7)
        assert isinstance(sampler, TopKSampler)
        assert sampler.k == 7

    def test_get_sampler_unknown(self):
        with pytest.raises(ConfigError):
            get_sampler("hardest")

    def test_topk_invalid_k(self):
        with pytest.raises(ConfigError):
            TopKSampler(0)


# ============ make_pairs Tests ============

class TestMakePairs:
    def test_false_negative_flag(self):
        """패자가 심어진 거짓 음성이면 플래그 True"""
        scores = np.array([[0.0, 5.0, 1.0, 2.0], [0.0, 1.0, 2.0, 9.0]])
        pairs = make_pairs(
            scores,
            user_ids=[10, 11],
            winners=[0, 0],
            sampler=ArgmaxSampler(),
            rng=np.random.default_rng(0),
            false_negatives={10: frozenset({1}), 11: frozenset({2})},
        )
        assert [(p.winner, p.loser) for p in pairs] == [(0, 1), (0, 3)]
        assert [p.is_false_negative for p in pairs] == [True, False]
        assert all(p.padding_id == 4 for p in pairs)

    def test_history_exclusion(self):
        scores = np.array([[0.0, 5.0, 4.0, 1.0]])
        pairs = make_pairs(scores, [0], [0], ArgmaxSampler(), np.random.default_rng(0), histories=[[1]])
        assert pairs[0].loser == 2

    def test_no_labels_no_flag(self):
        pairs = make_pairs(np.array([[0.0, 1.0]]), [0], [0], RandomSampler(), np.random.default_rng(0))
        assert pairs[0].is_false_negative is None
        assert pairs[0].strategy == SamplingStrategy.RANDOM


# ============ DPO Loss Tests ============

class TestDPOLoss:
    def test_zero_margin_is_ln2(self):
        policy = np.array([1.0, 2.0, 3.0])
        value = dpo_loss(policy, policy.copy(), _pair(0, 1)).value
        assert abs(value - math.log(2.0)) < 1e-9

    def test_unit_margin(self):
        """margin 1, β=1 → −log σ(1) ≈ 0.313262"""
        policy = np.array([1.0, 0.0, 0.0])
        reference = np.zeros(3)
        value = dpo_loss(policy, reference, _pair(0, 1), beta=1.0).value
        assert abs(value - 0.313262) < 1e-6

    def test_global_shift_invariance(self):
        rng = np.random.default_rng(3)
        policy, reference = rng.standard_normal(10), rng.standard_normal(10)
        pair = _pair(2, 7)
        base = dpo_loss(policy, reference, pair, beta=0.7).value
        assert abs(dpo_loss(policy + 13.5, reference, pair, beta=0.7).value - base) < 1e-9
        assert abs(dpo_loss(policy, reference - 4.25, pair, beta=0.7).value - base) < 1e-9

    def test_beta_monotonic(self):
        """양의 margin 은 β 증가 시 손실 감소, 음의 margin 은 증가"""
        pair = _pair(0, 1)
        for margin in np.linspace(-5.0, 5.0, 100):
            policy = np.array([margin, 0.0])
            reference = np.zeros(2)
            values = [dpo_loss(policy, reference, pair, beta=b).value for b in (0.1, 0.5, 1.0, 2.0)]
            if margin > 1e-12:
                assert values == sorted(values, reverse=True)
            elif margin < -1e-12:
                assert values == sorted(values)

    def test_gradient_only_at_pair(self):
        rng = np.random.default_rng(4)
        grad = dpo_loss(rng.standard_normal(6), rng.standard_normal(6), _pair(1, 4)).grad
        nonzero = set(np.flatnonzero(grad).tolist())
        assert nonzero == {1, 4}
        assert abs(grad.sum()) < 1e-12
        assert grad[1] < 0 < grad[4]

    def test_invalid_beta(self):
        with pytest.raises(ConfigError):
            dpo_loss(np.zeros(3), np.zeros(3), _pair(), beta=0.0)

    def test_identical_items_rejected(self):
        with pytest.raises(ContractViolationError):
            _pair(2, 2)

    def test_unscorable_item(self):
        with pytest.raises(ContractViolationError):
            dpo_loss(np.zeros(3), np.zeros(3), _pair(0, 3))


# ============ CE Loss Tests ============

class TestCELoss:
    def test_uniform_logits(self):
        """균등 로짓 10개 → ln 10"""
        assert abs(ce_loss(np.zeros(10), 3).value - math.log(10.0)) < 1e-12

    def test_gradient_is_softmax_minus_onehot(self):
        logits = np.array([1.0, 2.0, 0.5])
        grad = ce_loss(logits, 1).grad
        probs = np.exp(logits) / np.exp(logits).sum()
        expected = probs - np.array([0.0, 1.0, 0.0])
        assert np.allclose(grad, expected, atol=1e-12)

    def test_target_out_of_range(self):
        with pytest.raises(ContractViolationError):
            ce_loss(np.zeros(4), 4)


# ============ Batched Loss Tests ============

class TestBatchLosses:
    def test_batch_ce_matches_mean(self):
        rng = np.random.default_rng(11)
        logits = rng.standard_normal((4, 6))
        targets = np.array([0, 5, 2, 2])
        expected = np.mean([ce_loss(logits[r], targets[r]).value for r in range(4)])
        assert abs(batch_ce_loss(Tensor(logits), targets).item() - expected) < 1e-12

    def test_batch_dpo_matches_mean(self):
        rng = np.random.default_rng(12)
        logits, reference = rng.standard_normal((3, 5)), rng.standard_normal((3, 5))
        winners, losers = np.array([0, 1, 2]), np.array([4, 3, 0])
        expected = np.mean([
            dpo_loss(logits[r], reference[r], _pair(int(winners[r]), int(losers[r])), beta=0.5).value
            for r in range(3)
        ])
        value = batch_dpo_loss(Tensor(logits), reference, winners, losers, 0.5).item()
        assert abs(value - expected) < 1e-12

    def test_batch_dpo_gradients(self):
        rng = np.random.default_rng(13)
        logits = Tensor(rng.standard_normal((3, 6)), requires_grad=True, name="logits")
        reference = rng.standard_normal((3, 6))
        winners, losers = np.array([1, 2, 3]), np.array([0, 5, 4])
        report = check_gradients(lambda: batch_dpo_loss(logits, reference, winners, losers, 1.5), [logits])
        assert report.passed, report.get_summary()

    def test_batch_dpo_rejects_identical(self):
        with pytest.raises(ContractViolationError):
            batch_dpo_loss(Tensor(np.zeros((1, 3))), np.zeros((1, 3)), np.array([1]), np.array([1]), 1.0)
