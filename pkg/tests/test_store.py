import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dualexpert.errors import (
    BadMagicError,
    DegenerateRowError,
    FormatError,
    InsufficientShotsError,
    NonFiniteValueError,
    TruncatedFileError,
    ValidationError,
)
from dualexpert.store import (
    EmbeddingMatrix,
    TaskManifest,
    l2_normalize,
    load_feature_file,
    sample_k_shot,
    save_feature_file,
)


def make_manifest(C=3, n_train=4, n_test=2):
    per = n_train + n_test
    labels = np.repeat(np.arange(C), per)
    splits = np.array((["train"] * n_train + ["test"] * n_test) * C)
    return TaskManifest(
        class_names=tuple(f"c{i}" for i in range(C)),
        image_feature_file="img.cmf1",
        text_embedding_file="txt.cmf1",
        indices=np.arange(C * per),
        labels=labels,
        splits=splits,
    )


class TestEmbeddingMatrix:
    def test_rejects_nan(self):
        with pytest.raises(NonFiniteValueError):
            EmbeddingMatrix(np.array([[1.0, np.nan]]))

    def test_rejects_empty(self):
        with pytest.raises(ValidationError):
            EmbeddingMatrix(np.zeros((0, 3)))

    def test_shape(self):
        m = EmbeddingMatrix(np.arange(6.0).reshape(2, 3))
        assert (m.rows, m.cols) == (2, 3)


class TestFileFormat:
    def test_round_trip_2x3(self, tmp_path):
        m = EmbeddingMatrix(np.arange(6, dtype=np.float32).reshape(2, 3))
        p = tmp_path / "m.cmf1"
        save_feature_file(p, m)
        back = load_feature_file(p)
        assert back.rows == 2 and back.cols == 3
        assert np.array_equal(back.data, m.data)

    def test_1x1_file_size(self, tmp_path):
        p = tmp_path / "one.cmf1"
        save_feature_file(p, EmbeddingMatrix(np.array([[0.0]])))
        assert p.stat().st_size == 12 + 4

    @given(rows=st.integers(1, 8), cols=st.integers(1, 8),
           seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_round_trip_random_bitexact(self, tmp_path_factory, rows, cols, seed):
        rng = np.random.Generator(np.random.PCG64(seed))
        vals = rng.standard_normal((rows, cols)).astype(np.float32)
        m = EmbeddingMatrix(vals.astype(np.float64))
        p = tmp_path_factory.mktemp("cmf") / "m.cmf1"
        save_feature_file(p, m)
        back = load_feature_file(p)
        assert back.data.tobytes() == m.data.tobytes()

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bad.cmf1"
        p.write_bytes(b"XXXX" + b"\x00" * 12)
        with pytest.raises(BadMagicError):
            load_feature_file(p)

    def test_truncated_payload(self, tmp_path):
        import struct
        p = tmp_path / "trunc.cmf1"
        # header promises 6 values, write only 5
        p.write_bytes(struct.pack("<4sII", b"CMF1", 2, 3) + b"\x00" * 20)
        with pytest.raises(TruncatedFileError):
            load_feature_file(p)

    def test_trailing_bytes(self, tmp_path):
        import struct
        p = tmp_path / "trail.cmf1"
        p.write_bytes(struct.pack("<4sII", b"CMF1", 1, 1) + b"\x00" * 8)
        with pytest.raises(FormatError):
            load_feature_file(p)

    def test_nan_in_payload(self, tmp_path):
        import struct
        p = tmp_path / "nan.cmf1"
        payload = struct.pack("<2f", 1.0, float("nan"))
        p.write_bytes(struct.pack("<4sII", b"CMF1", 1, 2) + payload)
        with pytest.raises(NonFiniteValueError) as e:
            load_feature_file(p)
        assert "row 0" in str(e.value) and "col 1" in str(e.value)

    def test_unwritable_path(self, tmp_path):
        with pytest.raises(OSError):
            save_feature_file(tmp_path / "no" / "dir" / "x.cmf1",
                              EmbeddingMatrix(np.array([[1.0]])))


class TestNormalize:
    def test_3_4_5(self):
        out = l2_normalize(EmbeddingMatrix(np.array([[3.0, 4.0]])))
        assert np.allclose(out.data, [[0.6, 0.8]], atol=1e-12)

    def test_idempotent(self):
        rng = np.random.Generator(np.random.PCG64(1))
        m = EmbeddingMatrix(rng.standard_normal((5, 7)))
        once = l2_normalize(m)
        twice = l2_normalize(once)
        assert np.max(np.abs(twice.data - once.data)) < 1e-12

    def test_unit_rows(self):
        rng = np.random.Generator(np.random.PCG64(2))
        out = l2_normalize(EmbeddingMatrix(rng.standard_normal((10, 4))))
        assert np.max(np.abs(np.linalg.norm(out.data, axis=1) - 1.0)) < 1e-9

    def test_zero_row(self):
        with pytest.raises(DegenerateRowError):
            l2_normalize(EmbeddingMatrix(np.array([[0.0, 0.0]])))


class TestManifest:
    def test_label_out_of_range(self):
        with pytest.raises(ValidationError):
            TaskManifest(
                class_names=("a",),
                image_feature_file="i",
                text_embedding_file="t",
                indices=np.array([0, 1]),
                labels=np.array([0, 1]),
                splits=np.array(["train", "test"]),
            )

    def test_class_without_test_rows(self):
        with pytest.raises(ValidationError):
            TaskManifest(
                class_names=("a", "b"),
                image_feature_file="i",
                text_embedding_file="t",
                indices=np.array([0, 1, 2]),
                labels=np.array([0, 0, 1]),
                splits=np.array(["train", "test", "train"]),
            )


class TestSampleKShot:
    def test_counts(self):
        m = make_manifest(C=5, n_train=3)
        task = sample_k_shot(m, 1, seed=0)
        assert len(task.train_rows) == 5
        assert sorted({l for _, l in task.train_rows}) == list(range(5))

    def test_deterministic(self):
        m = make_manifest()
        a = sample_k_shot(m, 2, seed=42)
        b = sample_k_shot(m, 2, seed=42)
        assert a == b

    def test_different_seeds_differ(self):
        m = make_manifest(C=2, n_train=20)
        a = sample_k_shot(m, 5, seed=0)
        b = sample_k_shot(m, 5, seed=1)
        assert a.train_rows != b.train_rows

    def test_insufficient_shots(self):
        m = make_manifest(C=3, n_train=10)
        with pytest.raises(InsufficientShotsError) as e:
            sample_k_shot(m, 16, seed=0)
        assert "c0" in str(e.value)

    def test_train_rows_from_train_split(self):
        m = make_manifest()
        task = sample_k_shot(m, 2, seed=3)
        train_set = {int(m.indices[i]) for i in m.train_rows()}
        assert {r for r, _ in task.train_rows} <= train_set

    def test_test_rows_full_split(self):
        m = make_manifest()
        task = sample_k_shot(m, 1, seed=0)
        assert len(task.test_rows) == len(m.test_rows())
