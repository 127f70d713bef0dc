"""
Data Module Tests - 로드 / k-core / 분할 / 특성 / 합성 데이터 / 배치 테스트
"""
from collections import Counter

import numpy as np
import pytest

from src.data import (
    FEATURE_MAGIC,
    SyntheticConfig,
    batch_iterator,
    build_sequences,
    dataset_statistics,
    generate_synthetic,
    kcore_filter,
    leave_one_out_split,
    load_interactions,
    load_modal_features,
    load_prepared_dataset,
    read_split_manifest,
    save_synthetic,
    write_modal_features,
    write_split_manifest,
)
from src.domain.errors import (
    ConfigError,
    DataFormatError,
    DatasetEliminatedError,
    DimensionError,
)
from src.domain.models import InteractionSequence


def _write(tmp_path, text, name="interactions.tsv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def _brute_force_kcore(records, k):
    """단순 반복 fixpoint 오라클"""
    records = list(records)
    while True:
        users = Counter(r[0] for r in records)
        items = Counter(r[1] for r in records)
        kept = [r for r in records if users[r[0]] >= k and items[r[1]] >= k]
        if len(kept) == len(records):
            return kept
        records = kept


# ============ load_interactions Tests ============

class TestLoadInteractions:
    def test_three_lines(self, tmp_path):
        """3줄 파일 → 3 records"""
        path = _write(tmp_path, "u1\ti1\t10\nu1\ti2\t20\nu2\ti1\t30\n")
        raw = load_interactions(path)
        assert len(raw) == 3
        assert raw.user_ids == {"u1": 0, "u2": 1}
        assert raw.item_ids == {"i1": 0, "i2": 1}

    def test_comments_ignored(self, tmp_path):
        path = _write(tmp_path, "# header\nu1\ti1\t10\n#u9\ti9\t1\n")
        assert len(load_interactions(path)) == 1

    def test_duplicate_dropped(self, tmp_path, caplog):
        """중복 triple 제거, 경고 카운트 1"""
        path = _write(tmp_path, "u1\ti1\t10\nu1\ti1\t10\nu1\ti2\t20\n")
        raw = load_interactions(path)
        assert len(raw) == 2
        assert raw.duplicates_dropped == 1

    def test_malformed_line_reports_line_number(self, tmp_path):
        path = _write(tmp_path, "u1\ti1\t10\nu1 i2 20\n")
        with pytest.raises(DataFormatError) as exc:
            load_interactions(path)
        assert exc.value.line_no == 2

    def test_bad_timestamp(self, tmp_path):
        path = _write(tmp_path, "u1\ti1\tyesterday\n")
        with pytest.raises(DataFormatError) as exc:
            load_interactions(path)
        assert exc.value.line_no == 1

    def test_negative_timestamp(self, tmp_path):
        path = _write(tmp_path, "u1\ti1\t-5\n")
        with pytest.raises(DataFormatError):
            load_interactions(path)

    def test_empty_file(self, tmp_path):
        path = _write(tmp_path, "# only a comment\n")
        with pytest.raises(DataFormatError):
            load_interactions(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_interactions(tmp_path / "nope.tsv")


# ============ kcore_filter Tests ============

class TestKcoreFilter:
    def test_k1_identity(self, tmp_path):
        path = _write(tmp_path, "a\tx\t1\nb\ty\t2\nc\tz\t3\n")
        raw = load_interactions(path)
        filtered = kcore_filter(raw, 1)
        assert filtered.frame.equals(raw.frame)
        assert filtered.item_ids == raw.item_ids

    def test_cascade_reaches_fixpoint(self, tmp_path):
        """사용자 제거가 아이템을 k 미만으로 떨어뜨리면 둘 다 제거"""
        lines = [
            ("a", "x", 1), ("a", "y", 2),
            ("b", "x", 3), ("b", "y", 4),
            ("c", "y", 5), ("c", "z", 6),
            ("d", "z", 7),
        ]
        path = _write(tmp_path, "".join(f"{u}\t{i}\t{t}\n" for u, i, t in lines))
        filtered = kcore_filter(load_interactions(path), 2)
        survivors = list(filtered.frame.itertuples(index=False, name=None))
        assert survivors == _brute_force_kcore(lines, 2)
        assert set(filtered.frame["user_key"]) == {"a", "b"}
        assert set(filtered.frame["item_key"]) == {"x", "y"}

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_brute_force_oracle(self, tmp_path, seed):
        rng = np.random.default_rng(seed)
        lines = sorted({
            (f"u{rng.integers(5)}", f"i{rng.integers(5)}", int(t)) for t in range(20)
        }, key=lambda r: r[2])
        path = _write(tmp_path, "".join(f"{u}\t{i}\t{t}\n" for u, i, t in lines))
        expected = _brute_force_kcore(lines, 2)
        raw = load_interactions(path)
        if not expected:
            with pytest.raises(DatasetEliminatedError):
                kcore_filter(raw, 2)
            return
        filtered = kcore_filter(raw, 2)
        assert list(filtered.frame.itertuples(index=False, name=None)) == expected
        again = kcore_filter(filtered, 2)
        assert again.frame.equals(filtered.frame)

    def test_eliminated(self, tmp_path):
        path = _write(tmp_path, "a\tx\t1\nb\ty\t2\n")
        with pytest.raises(DatasetEliminatedError):
            kcore_filter(load_interactions(path), 2)

    def test_invalid_k(self, tmp_path):
        path = _write(tmp_path, "a\tx\t1\n")
        with pytest.raises(ConfigError):
            kcore_filter(load_interactions(path), 0)

    def test_ids_redensified(self, tmp_path):
        path = _write(tmp_path, "z\tq\t1\na\tx\t2\na\ty\t3\nb\tx\t4\nb\ty\t5\n")
        filtered = kcore_filter(load_interactions(path), 2)
        assert filtered.user_ids == {"a": 0, "b": 1}
        assert filtered.item_ids == {"x": 0, "y": 1}


# ============ Sequences / Split Tests ============

class TestSequencesAndSplit:
    def test_sequences_sorted_by_time(self, tmp_path):
        path = _write(tmp_path, "u\tb\t20\nu\ta\t10\nu\tc\t20\n")
        sequences, n_items = build_sequences(load_interactions(path))
        assert n_items == 3
        assert sequences[0].timestamps == (10, 20, 20)
        # b(0) 와 c(2) 는 동일 시각이라 입력 순서 유지
        assert sequences[0].items == (1, 0, 2)

    def test_length_three(self):
        """[a,b,c] → train [a], valid b, test c"""
        seq = InteractionSequence(0, (4, 5, 6), (1, 2, 3))
        split = leave_one_out_split([seq], n_items=10)
        user = split.users[0]
        assert user.train_items == (4,)
        assert user.valid_target == 5
        assert user.test_target == 6
        assert user.context("test")[0] == (4, 5)

    def test_short_sequence_dropped(self):
        seqs = [InteractionSequence(0, (1, 2), (1, 2)), InteractionSequence(1, (1, 2, 3), (1, 2, 3))]
        split = leave_one_out_split(seqs, n_items=5)
        assert [u.user_id for u in split.users] == [1]

    def test_all_short_eliminated(self):
        with pytest.raises(DatasetEliminatedError):
            leave_one_out_split([InteractionSequence(0, (1,), (1,))], n_items=5)

    def test_partition_property(self):
        """100명 무작위 사용자: 위치 분할 및 테스트 타깃 누수 없음"""
        rng = np.random.default_rng(0)
        seqs = []
        for u in range(100):
            n = int(rng.integers(3, 30))
            items = tuple(int(i) for i in rng.choice(200, size=n, replace=False))
            seqs.append(InteractionSequence(u, items, tuple(range(n))))
        split = leave_one_out_split(seqs, n_items=200, max_seq_len=10)
        for seq, user in zip(seqs, split.users):
            assert user.full_items == seq.items
            assert user.test_target not in user.context("test")[0]
            assert user.valid_target not in user.context("valid")[0]

    def test_training_examples_truncated(self):
        seq = InteractionSequence(0, tuple(range(12)), tuple(range(12)))
        split = leave_one_out_split([seq], n_items=20, max_seq_len=4)
        examples = split.training_examples()
        assert len(examples) == 9
        assert all(len(e.items) <= 4 for e in examples)
        assert examples[-1].items == (5, 6, 7, 8)
        assert examples[-1].target == 9

    def test_statistics(self):
        seqs = [InteractionSequence(0, (0, 1, 2), (1, 2, 3)), InteractionSequence(1, (1, 2, 3, 0), (1, 2, 3, 4))]
        stats = dataset_statistics(seqs, n_items=4)
        assert stats.n_actions == 7
        assert stats.avg_length == pytest.approx(3.5)
        assert stats.sparsity == pytest.approx(1 - 7 / 8)

    def test_manifest_round_trip(self, tmp_path):
        seq = InteractionSequence(3, (4, 5, 6, 7), (1, 2, 3, 4))
        split = leave_one_out_split([seq], n_items=10, max_seq_len=7)
        write_split_manifest(tmp_path / "m.json", split)
        restored = read_split_manifest(tmp_path / "m.json")
        assert restored.users == split.users
        assert restored.max_seq_len == 7


# ============ Feature File Tests ============

class TestModalFeatures:
    def test_shape(self, tmp_path):
        matrix = np.random.default_rng(0).standard_normal((7, 384)).astype(np.float32)
        write_modal_features(tmp_path / "f.fm", matrix)
        loaded = load_modal_features(tmp_path / "f.fm", expected_items=7)
        assert loaded.values.shape == (7, 384)
        assert loaded.n_missing == 0

    def test_round_trip_bit_identical(self, tmp_path):
        matrix = np.random.default_rng(1).standard_normal((5, 3)).astype(np.float32)
        write_modal_features(tmp_path / "f.fm", matrix)
        loaded = load_modal_features(tmp_path / "f.fm", expected_items=5, expected_dim=3)
        assert loaded.values.tobytes() == matrix.tobytes()

    def test_header_layout(self, tmp_path):
        write_modal_features(tmp_path / "f.fm", np.zeros((2, 3), dtype=np.float32))
        raw = (tmp_path / "f.fm").read_bytes()
        assert raw[:8] == FEATURE_MAGIC
        assert int.from_bytes(raw[8:16], "little") == 2
        assert int.from_bytes(raw[16:24], "little") == 3
        assert len(raw) == 24 + 2 * 3 * 4

    def test_missing_row_zero_filled(self, tmp_path):
        matrix = np.ones((4, 3), dtype=np.float32)
        matrix[2] = np.nan
        write_modal_features(tmp_path / "f.fm", matrix)
        loaded = load_modal_features(tmp_path / "f.fm", expected_items=4)
        assert loaded.n_missing == 1
        np.testing.assert_array_equal(loaded.values[2], 0.0)

    def test_row_count_mismatch(self, tmp_path):
        write_modal_features(tmp_path / "f.fm", np.zeros((4, 3), dtype=np.float32))
        with pytest.raises(DimensionError):
            load_modal_features(tmp_path / "f.fm", expected_items=5)

    def test_dimension_mismatch_with_config(self, tmp_path):
        write_modal_features(tmp_path / "f.fm", np.zeros((4, 3), dtype=np.float32))
        with pytest.raises(DimensionError):
            load_modal_features(tmp_path / "f.fm", expected_items=4, expected_dim=8)

    def test_bad_magic(self, tmp_path):
        (tmp_path / "f.fm").write_bytes(b"NOTMAGIC" + bytes(16))
        with pytest.raises(DataFormatError):
            load_modal_features(tmp_path / "f.fm", expected_items=0)


# ============ Synthetic Generator Tests ============

class TestSyntheticGenerator:
    def test_deterministic(self):
        cfg = SyntheticConfig(n_users=40, n_items=30, seed=7)
        a, b = generate_synthetic(cfg), generate_synthetic(cfg)
        assert a.sequences == b.sequences
        assert np.array_equal(a.labels.utility, b.labels.utility)
        assert np.array_equal(a.labels.exposure, b.labels.exposure)
        assert a.labels.false_negatives == b.labels.false_negatives
        assert a.catalog.text_features.tobytes() == b.catalog.text_features.tobytes()

    def test_full_exposure_has_no_false_negatives(self):
        ds = generate_synthetic(SyntheticConfig(n_users=20, n_items=25, exposure_rate=1.0, seed=1))
        assert all(len(v) == 0 for v in ds.labels.false_negatives.values())

    def test_label_invariants(self):
        """상호작용 ⊆ 노출, 거짓 음성은 상위 10% 효용이며 상호작용과 서로소"""
        ds = generate_synthetic(SyntheticConfig(n_users=50, n_items=40, exposure_rate=0.3, seed=2))
        utility, exposure = ds.labels.utility, ds.labels.exposure
        for seq in ds.sequences:
            assert exposure[seq.user_id, list(seq.items)].all()
            fn = ds.labels.false_negatives[seq.user_id]
            assert fn.isdisjoint(seq.items)
            threshold = np.sort(utility[seq.user_id])[::-1][3]
            assert all(utility[seq.user_id, i] >= threshold for i in fn)
            assert len(seq) >= 3
            assert list(seq.timestamps) == sorted(seq.timestamps)

    def test_popularity_exposure_mode(self):
        ds = generate_synthetic(SyntheticConfig(n_users=30, n_items=40, exposure_mode="popularity", seed=3))
        assert ds.labels.exposure.shape == (30, 40)

    def test_invalid_exposure_rate(self):
        with pytest.raises(ConfigError):
            generate_synthetic(SyntheticConfig(exposure_rate=0.0))

    def test_impossible_exposure_raises(self):
        with pytest.raises(DataFormatError):
            generate_synthetic(SyntheticConfig(n_users=5, n_items=10, exposure_rate=0.01, max_retries=2, seed=0))

    @pytest.mark.slow
    def test_false_negative_count_stable_across_seeds(self):
        """1000×500, exposure 0.3: 평균 거짓 음성 수가 시드 간 ±10% 이내"""
        means = [
            generate_synthetic(SyntheticConfig(n_users=1000, n_items=500, exposure_rate=0.3, seed=s))
            .labels.mean_false_negative_count()
            for s in range(10)
        ]
        center = float(np.mean(means))
        assert all(abs(m - center) <= 0.1 * center for m in means)

    def test_saved_dataset_loads(self, tmp_path):
        cfg = SyntheticConfig(n_users=20, n_items=15, d_txt=4, d_img=6, seed=4)
        ds = generate_synthetic(cfg)
        save_synthetic(ds, tmp_path, cfg)
        prepared = load_prepared_dataset(tmp_path, d_txt=4, d_img=6)
        assert prepared.split.users == ds.split.users
        assert prepared.labels.false_negatives == ds.labels.false_negatives
        np.testing.assert_array_equal(prepared.catalog.text_features, ds.catalog.text_features)

    def test_save_is_byte_reproducible(self, tmp_path):
        cfg = SyntheticConfig(n_users=10, n_items=12, seed=5)
        for name in ("a", "b"):
            save_synthetic(generate_synthetic(cfg), tmp_path / name, cfg)
        for path in sorted((tmp_path / "a").iterdir()):
            assert path.read_bytes() == (tmp_path / "b" / path.name).read_bytes()


# ============ batch_iterator Tests ============

class TestBatchIterator:
    @pytest.fixture
    def ten_example_split(self):
        seq = InteractionSequence(0, tuple(range(13)), tuple(range(13)))
        return leave_one_out_split([seq], n_items=20, max_seq_len=5)

    def test_batch_sizes(self, ten_example_split):
        sizes = [len(b) for b in batch_iterator(ten_example_split, 3)]
        assert sizes == [3, 3, 3, 1]

    def test_same_seed_same_order(self, ten_example_split):
        first = [b.targets.tolist() for b in batch_iterator(ten_example_split, 3, shuffle_seed=11)]
        second = [b.targets.tolist() for b in batch_iterator(ten_example_split, 3, shuffle_seed=11)]
        assert first == second

    def test_targets_multiset(self, ten_example_split):
        yielded = Counter(t for b in batch_iterator(ten_example_split, 4, shuffle_seed=2) for t in b.targets.tolist())
        expected = Counter(e.target for e in ten_example_split.training_examples())
        assert yielded == expected

    def test_left_padding(self, ten_example_split):
        batch = next(batch_iterator(ten_example_split, 3))
        assert batch.item_ids[0].tolist() == [20, 20, 20, 20, 0]
        assert batch.mask[0].tolist() == [False, False, False, False, True]
        assert batch.item_ids.shape == (3, 5)

    def test_start_batch_skips(self, ten_example_split):
        full = [b.targets.tolist() for b in batch_iterator(ten_example_split, 3, shuffle_seed=1)]
        resumed = [b.targets.tolist() for b in batch_iterator(ten_example_split, 3, shuffle_seed=1, start_batch=2)]
        assert resumed == full[2:]

    def test_invalid_batch_size(self, ten_example_split):
        with pytest.raises(ConfigError):
            list(batch_iterator(ten_example_split, 0))
