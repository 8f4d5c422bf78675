"""Tests for feature building, binary round trips, and the synthetic generator."""

import json

import numpy as np
import pytest

from swinvib.features import (
    SyntheticSpec,
    SyntheticWindowSource,
    build_training_sets,
    featurize,
    generate_synthetic,
    layer_directions,
    mean_heads,
    read_feature_file,
    write_feature_file,
)
from swinvib.fileio import sha256_file
from swinvib.validation import FormatError, ValidationError
from swinvib.windows import CONFLICTING, SUPPLEMENTARY, CorpusSample, TokenSequence


class TestMeanHeads:
    def test_single_head_is_identity(self):
        head = np.arange(9.0).reshape(1, 3, 3)
        np.testing.assert_array_equal(mean_heads(head), head[0])

    def test_constant_heads(self):
        stack = np.stack([np.full((2, 2), 0.2), np.full((2, 2), 0.6)])
        np.testing.assert_allclose(mean_heads(stack), np.full((2, 2), 0.4))

    def test_matches_element_loop_oracle(self):
        rng = np.random.default_rng(0)
        stack = rng.random((3, 2, 2))
        expected = np.zeros((2, 2))
        for i in range(2):
            for j in range(2):
                expected[i, j] = sum(stack[h, i, j] for h in range(3)) / 3
        np.testing.assert_allclose(mean_heads(stack), expected, atol=1e-15)

    def test_commutes_with_scaling_and_head_permutation(self):
        rng = np.random.default_rng(1)
        stack = rng.random((4, 3, 3))
        np.testing.assert_allclose(mean_heads(3.5 * stack), 3.5 * mean_heads(stack))
        np.testing.assert_allclose(mean_heads(stack[::-1]), mean_heads(stack))

    def test_ragged_input_rejected(self):
        with pytest.raises(ValidationError):
            mean_heads(np.zeros((2, 3, 4)))
        with pytest.raises(ValidationError):
            mean_heads(np.zeros((3, 3)))


class TestFeaturize:
    def test_exact_fit(self):
        g = np.arange(49.0).reshape(7, 7)
        np.testing.assert_array_equal(featurize(g, 49), np.arange(49.0))

    def test_padding(self):
        g = np.arange(36.0).reshape(6, 6)
        out = featurize(g, 49)
        np.testing.assert_array_equal(out[:36], np.arange(36.0))
        np.testing.assert_array_equal(out[36:], np.zeros(13))

    def test_truncation_keeps_row_major_prefix(self):
        g = np.arange(49.0).reshape(7, 7)
        np.testing.assert_array_equal(featurize(g, 16), np.arange(16.0))

    def test_injective_on_padded_prefix(self):
        rng = np.random.default_rng(2)
        a, b = rng.random((3, 3)), rng.random((3, 3))
        assert not np.array_equal(featurize(a, 16), featurize(b, 16))


class TestFeatureFileFormat:
    def test_labeled_round_trip_is_bit_identical(self, tmp_path):
        rng = np.random.default_rng(3)
        feats = rng.standard_normal((40, 9)).astype(np.float32)
        labels = rng.integers(0, 2, size=40)
        path = tmp_path / "layer.svf"
        write_feature_file(path, 2, feats, labels)
        loaded = read_feature_file(path)
        assert loaded.layer_index == 2
        assert loaded.has_labels
        assert loaded.features.tobytes() == feats.tobytes()
        np.testing.assert_array_equal(loaded.labels, labels)

    def test_unlabeled_round_trip(self, tmp_path):
        feats = np.random.default_rng(4).standard_normal((5, 3)).astype(np.float32)
        path = tmp_path / "layer.svq"
        write_feature_file(path, 0, feats)
        loaded = read_feature_file(path)
        assert not loaded.has_labels and loaded.labels is None
        assert loaded.features.tobytes() == feats.tobytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.svf"
        write_feature_file(path, 0, np.zeros((1, 2), np.float32), [1])
        data = bytearray(path.read_bytes())
        data[:4] = b"NOPE"
        path.write_bytes(bytes(data))
        with pytest.raises(FormatError, match="bad magic") as exc:
            read_feature_file(path)
        assert exc.value.field == "magic"

    def test_bad_version(self, tmp_path):
        path = tmp_path / "bad.svf"
        write_feature_file(path, 0, np.zeros((1, 2), np.float32), [1])
        data = bytearray(path.read_bytes())
        data[4] = 99
        path.write_bytes(bytes(data))
        with pytest.raises(FormatError) as exc:
            read_feature_file(path)
        assert exc.value.field == "version"

    def test_truncated_payload_reports_record_count(self, tmp_path):
        path = tmp_path / "bad.svf"
        write_feature_file(path, 0, np.ones((3, 4), np.float32), [0, 1, 0])
        path.write_bytes(path.read_bytes()[:-5])
        with pytest.raises(FormatError, match="record_count mismatch") as exc:
            read_feature_file(path)
        assert exc.value.field == "record_count"

    def test_label_flag_must_match_magic(self, tmp_path):
        path = tmp_path / "bad.svf"
        write_feature_file(path, 0, np.ones((1, 2), np.float32), [1])
        data = bytearray(path.read_bytes())
        data[24] = 0  # has_labels byte
        path.write_bytes(bytes(data))
        with pytest.raises(FormatError) as exc:
            read_feature_file(path)
        assert exc.value.field == "has_labels"


def _tiny_corpus(n, length=24):
    for i in range(n):
        yield CorpusSample(
            id=f"s{i}",
            query=f"query {i}",
            supplementary=TokenSequence.from_source(
                [f"s{i}_{j}" for j in range(length)], SUPPLEMENTARY
            ),
            conflicting=TokenSequence.from_source(
                [f"c{i}_{j}" for j in range(length)], CONFLICTING
            ),
        )


class TestBuildTrainingSets:
    def test_per_layer_files_share_labels_and_counts(self, tmp_path):
        spec = SyntheticSpec(n_layers=2, feature_dim=8, seed=5)
        source = SyntheticWindowSource(spec)
        manifest_path, report = build_training_sets(
            _tiny_corpus(3), source, tmp_path, seed=5
        )
        manifest = json.loads(manifest_path.read_text())
        assert len(manifest["files"]) == 2
        loaded = [read_feature_file(tmp_path / f["path"]) for f in manifest["files"]]
        assert all(f.features.shape[0] == 3 for f in loaded)
        np.testing.assert_array_equal(loaded[0].labels, loaded[1].labels)
        assert report.processed == 3

    def test_all_mixed_corpus_gives_zero_labels(self, tmp_path):
        spec = SyntheticSpec(n_layers=1, feature_dim=4, seed=6)
        source = SyntheticWindowSource(spec)
        _, report = build_training_sets(
            _tiny_corpus(5), source, tmp_path, mixed_fraction=1.0, seed=6
        )
        assert report.per_label_counts[1] == 0
        assert report.per_label_counts[0] == 5

    def test_short_samples_skipped_and_counted(self, tmp_path):
        spec = SyntheticSpec(n_layers=1, feature_dim=4, seed=7)
        source = SyntheticWindowSource(spec)
        corpus = list(_tiny_corpus(2)) + list(_tiny_corpus(1, length=2))
        _, report = build_training_sets(corpus, source, tmp_path, seed=7)
        assert report.skipped == 1
        assert report.processed == 2

    def test_deterministic_across_runs(self, tmp_path):
        spec = SyntheticSpec(n_layers=2, feature_dim=6, seed=8)
        for d in ("a", "b"):
            build_training_sets(
                _tiny_corpus(4), SyntheticWindowSource(spec), tmp_path / d, seed=8
            )
        for name in ("train_layer00.svf", "train_layer01.svf", "manifest.json"):
            assert sha256_file(tmp_path / "a" / name) == sha256_file(tmp_path / "b" / name)


class TestGenerateSynthetic:
    def test_manifest_hash_stable_across_runs(self, tmp_path):
        spec = SyntheticSpec(n_layers=2, feature_dim=8, seed=11)
        p1 = generate_synthetic(spec, tmp_path / "x", n_train=50, n_eval=10)
        p2 = generate_synthetic(spec, tmp_path / "y", n_train=50, n_eval=10)
        assert sha256_file(p1) == sha256_file(p2)

    def test_mixed_fraction_zero_gives_all_single_source_labels(self, tmp_path):
        spec = SyntheticSpec(n_layers=1, feature_dim=4, mixed_fraction=0.0, seed=12)
        manifest = json.loads(
            generate_synthetic(spec, tmp_path, n_train=64, n_eval=0).read_text()
        )
        assert manifest["label_counts"]["train"] == {"0": 0, "1": 64}
        loaded = read_feature_file(tmp_path / manifest["files"][0]["path"])
        assert np.all(loaded.labels == 1)

    def test_cluster_geometry_matches_labels(self, tmp_path):
        spec = SyntheticSpec(n_layers=2, feature_dim=16, cluster_separation=8.0,
                             noise_scale=0.5, seed=13)
        manifest = json.loads(
            generate_synthetic(spec, tmp_path, n_train=400, n_eval=0).read_text()
        )
        directions = np.array(manifest["synthetic"]["directions"])
        np.testing.assert_allclose(directions, layer_directions(spec), atol=1e-12)
        for entry in manifest["files"]:
            loaded = read_feature_file(tmp_path / entry["path"])
            proj = loaded.features.astype(np.float64) @ directions[entry["layer"]]
            # single-source rows project near +sep/2 = 4, mixed rows near -4
            assert proj[loaded.labels == 1].mean() > 3.0
            assert proj[loaded.labels == 0].mean() < -3.0

    def test_spec_invariants(self):
        with pytest.raises(ValidationError):
            SyntheticSpec(n_layers=0)
        with pytest.raises(ValidationError):
            SyntheticSpec(mixed_fraction=1.5)
        with pytest.raises(ValidationError):
            SyntheticSpec(feature_dim=1)
