"""File format round-trips, validation errors, splits, and the generator."""

import numpy as np
import pytest

from sgnn.data import (
    SBMConfig,
    compute_checksum,
    generate_sbm,
    load_dataset,
    parse_synthetic_spec,
    save_dataset,
    standard_split,
)
from sgnn.errors import ConfigError, DataFormatError
from sgnn.trainer import RunConfig, train


@pytest.fixture(scope="module")
def sbm_bundle():
    return generate_sbm(SBMConfig())


class TestFormatRoundTrip:
    def test_save_load_save_is_byte_identical(self, sbm_bundle, tmp_path):
        first = tmp_path / "a.graphtxt"
        second = tmp_path / "b.graphtxt"
        save_dataset(sbm_bundle, first)
        loaded = load_dataset(first)
        save_dataset(loaded, second)
        assert first.read_bytes() == second.read_bytes()

    def test_checksum_embedded_and_verified(self, sbm_bundle, tmp_path):
        path = tmp_path / "c.graphtxt"
        digest = save_dataset(sbm_bundle, path)
        loaded = load_dataset(path)
        assert loaded.checksum == digest
        assert compute_checksum(loaded) == digest

    def test_loaded_bundle_passes_graph_invariants(self, sbm_bundle, tmp_path):
        path = tmp_path / "d.graphtxt"
        save_dataset(sbm_bundle, path)
        g = load_dataset(path).graph
        # structural invariants of the compressed form
        assert np.all(np.diff(g.adjacency.indptr) >= 0)
        indptr, indices = g.adjacency.indptr, g.adjacency.indices
        for row in range(g.num_nodes):
            cols = indices[indptr[row]:indptr[row + 1]]
            assert np.all(np.diff(cols) > 0)
        assert (g.adjacency != g.adjacency.T).nnz == 0
        assert g.adjacency.diagonal().sum() == 0
        assert not np.any(g.train_mask & g.val_mask)
        assert not np.any(g.train_mask & g.test_mask)


class TestLoaderErrors:
    def _write(self, tmp_path, text):
        path = tmp_path / "broken.graphtxt"
        path.write_text(text, encoding="utf-8")
        return path

    def test_truncated_entry_names_line(self, tmp_path):
        path = self._write(
            tmp_path,
            "#meta\nnum_nodes=2\nnum_classes=1\nfeature_dim=1\n"
            "num_edges_undirected=1\n#edges\n0\n#features\n#labels\n#masks\n")
        with pytest.raises(DataFormatError, match="line 7"):
            load_dataset(path)

    def test_missing_section(self, tmp_path):
        path = self._write(tmp_path, "#meta\nnum_nodes=1\n")
        with pytest.raises(DataFormatError, match="missing"):
            load_dataset(path)

    def test_stats_mismatch(self, tmp_path):
        path = self._write(
            tmp_path,
            "#meta\nnum_nodes=2\nnum_classes=1\nfeature_dim=1\n"
            "num_edges_undirected=5\n#edges\n0 1\n#features\n0 0 1.0\n"
            "#labels\n0 0\n1 0\n#masks\n0 train\n1 test\n")
        with pytest.raises(DataFormatError, match="undirected edges"):
            load_dataset(path)

    def test_checksum_mismatch(self, sbm_bundle, tmp_path):
        path = tmp_path / "tampered.graphtxt"
        save_dataset(sbm_bundle, path)
        text = path.read_text(encoding="utf-8")
        tampered = text.replace("#edges\n0 ", "#edges\n1 ", 1)
        assert tampered != text
        path.write_text(tampered, encoding="utf-8")
        with pytest.raises(DataFormatError, match="checksum"):
            load_dataset(path)

    def test_unknown_section(self, tmp_path):
        path = self._write(tmp_path, "#meta\nnum_nodes=1\n#wat\n")
        with pytest.raises(DataFormatError, match="line 3"):
            load_dataset(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataFormatError, match="cannot read"):
            load_dataset(tmp_path / "nope.graphtxt")


class TestSbmGenerator:
    def test_same_seed_identical(self):
        a = generate_sbm(SBMConfig(seed=7))
        b = generate_sbm(SBMConfig(seed=7))
        assert compute_checksum(a) == compute_checksum(b)

    def test_different_seed_differs(self):
        a = generate_sbm(SBMConfig(seed=7))
        b = generate_sbm(SBMConfig(seed=8))
        assert compute_checksum(a) != compute_checksum(b)

    def test_inter_zero_components_are_label_pure(self):
        bundle = generate_sbm(SBMConfig(blocks=4, per_block=30, intra=0.3,
                                        inter=0.0, seed=3))
        g = bundle.graph
        edges = g.undirected_edges()
        assert len(edges) > 0
        assert np.all(g.labels[edges[:, 0]] == g.labels[edges[:, 1]])

    def test_edge_count_within_binomial_band(self):
        cfg = SBMConfig(blocks=3, per_block=100, intra=0.1, inter=0.005, seed=5)
        bundle = generate_sbm(cfg)
        per = cfg.per_block
        intra_pairs = cfg.blocks * per * (per - 1) // 2
        inter_pairs = (cfg.blocks * (cfg.blocks - 1) // 2) * per * per
        mean = intra_pairs * cfg.intra + inter_pairs * cfg.inter
        var = (intra_pairs * cfg.intra * (1 - cfg.intra)
               + inter_pairs * cfg.inter * (1 - cfg.inter))
        got = bundle.graph.num_undirected_edges
        assert abs(got - mean) < 4 * np.sqrt(var)

    def test_split_sizes_follow_convention(self):
        bundle = generate_sbm(SBMConfig())
        g = bundle.graph
        assert int(g.train_mask.sum()) == 60     # 20 per class
        assert int(g.val_mask.sum()) == 120      # min(500, (300-60)//2)
        assert int(g.test_mask.sum()) == 120

    def test_feature_dim_must_hold_centroids(self):
        with pytest.raises(ConfigError):
            SBMConfig(blocks=5, feature_dim=3).validate()

    def test_learnable_surrogate(self, sbm_bundle):
        result = train(sbm_bundle.graph, RunConfig(epochs=200, seed=1))
        assert result.record.final.test_acc > 0.9


class TestStandardSplit:
    def test_zero_per_class_rejected(self, sbm_bundle):
        with pytest.raises(ConfigError):
            standard_split(sbm_bundle.graph, 0, 10)

    def test_masks_disjoint_in_range(self, sbm_bundle):
        train_idx, val_idx, test_idx = standard_split(sbm_bundle.graph, 5, 50,
                                                      seed=3)
        all_idx = np.concatenate([train_idx, val_idx, test_idx])
        assert len(np.unique(all_idx)) == len(all_idx)
        assert all_idx.min() >= 0
        assert all_idx.max() < sbm_bundle.graph.num_nodes
        assert len(train_idx) == 15 and len(val_idx) == 50

    def test_class_too_small(self):
        bundle = generate_sbm(SBMConfig(blocks=2, per_block=25, seed=1))
        with pytest.raises(ConfigError, match="class"):
            standard_split(bundle.graph, 30, 5)

    def test_deterministic_given_seed(self, sbm_bundle):
        a = standard_split(sbm_bundle.graph, 10, 40, seed=9)
        b = standard_split(sbm_bundle.graph, 10, 40, seed=9)
        for x, y in zip(a, b):
            assert np.array_equal(x, y)

    def test_val_overflow_rejected(self, sbm_bundle):
        with pytest.raises(ConfigError, match="val split"):
            standard_split(sbm_bundle.graph, 20, 100000)


class TestSyntheticSpec:
    def test_parse(self):
        cfg = parse_synthetic_spec("sbm:4x50")
        assert cfg.blocks == 4 and cfg.per_block == 50

    def test_bad_specs(self):
        for spec in ("sbm", "sbm:3", "grid:2x2", "sbm:ax2"):
            with pytest.raises(ConfigError):
                parse_synthetic_spec(spec)
