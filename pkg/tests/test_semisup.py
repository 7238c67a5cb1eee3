"""Graph diffusion pseudo-labelers, constrained k-means, and grid selection."""

import numpy as np
import numpy.testing as npt
import pytest

from conftest import blobs, corner_means
from noseaug.classify import ClassifierConfig
from noseaug.data import UNLABELLED, LabeledDataset
from noseaug.exceptions import ConfigurationError
from noseaug.semisup import (
    PseudoLabeledSet,
    SemiSupConfig,
    affinity_matrix,
    best_semisup,
    default_semisup_grid,
    label_propagation,
    label_spreading,
    pseudo_label,
    semi_kmeans,
)


def _labeled(X, y, n_classes):
    return LabeledDataset(np.asarray(X, float), np.asarray(y, np.int64), n_classes)


def _unlabeled(X, n_classes):
    X = np.asarray(X, float)
    return LabeledDataset(
        X, np.full(len(X), UNLABELLED, dtype=np.int64), n_classes
    )


def _propagation_oracle(labeled, unlabeled, config):
    """Closed-form harmonic solution F_u = (I - T_uu)^-1 T_ul Y_l."""
    n_l = len(labeled)
    X = np.vstack([labeled.X, unlabeled.X])
    W = affinity_matrix(X, config)
    degrees = W.sum(axis=1)
    degrees[degrees == 0.0] = 1.0
    T = W / degrees[:, None]
    Y_l = np.zeros((n_l, labeled.n_classes))
    Y_l[np.arange(n_l), labeled.y] = 1.0
    T_uu, T_ul = T[n_l:, n_l:], T[n_l:, :n_l]
    F_u = np.linalg.solve(np.eye(len(unlabeled)) - T_uu, T_ul @ Y_l)
    return np.argmax(F_u, axis=1)


def _spreading_oracle(labeled, unlabeled, config):
    """Closed-form limit F* = (1 - alpha) (I - alpha S)^-1 Y."""
    n_l = len(labeled)
    X = np.vstack([labeled.X, unlabeled.X])
    W = affinity_matrix(X, config)
    degrees = W.sum(axis=1)
    degrees[degrees == 0.0] = 1.0
    inv_sqrt = 1.0 / np.sqrt(degrees)
    S = W * inv_sqrt[:, None] * inv_sqrt[None, :]
    Y = np.zeros((len(X), labeled.n_classes))
    Y[np.arange(n_l), labeled.y] = 1.0
    F = (1 - config.alpha) * np.linalg.solve(
        np.eye(len(X)) - config.alpha * S, Y
    )
    return np.argmax(F[n_l:], axis=1)


class TestLabelPropagation:
    def test_equidistant_tie_goes_to_class_zero(self):
        labeled = _labeled([[-1.0, 0.0], [1.0, 0.0]], [0, 1], 2)
        unlabeled = _unlabeled([[0.0, 0.0]], 2)
        out = label_propagation(labeled, unlabeled, SemiSupConfig("propagation"))
        assert out.labels[0] == 0
        assert out.confidence[0] == pytest.approx(0.5)

    def test_coincident_point_has_full_confidence(self):
        labeled = _labeled([[0.0, 0.0], [10.0, 0.0]], [0, 1], 2)
        unlabeled = _unlabeled([[10.0, 0.0]], 2)
        out = label_propagation(
            labeled, unlabeled, SemiSupConfig("propagation", gamma=1.0)
        )
        assert out.labels[0] == 1
        assert out.confidence[0] > 0.99

    @pytest.mark.parametrize("kernel", ["rbf", "knn"])
    def test_matches_harmonic_fixed_point_oracle(self, kernel):
        rng = np.random.default_rng(2)
        labeled = _labeled(rng.normal(size=(3, 2)) * 2, [0, 1, 2], 3)
        unlabeled = _unlabeled(rng.normal(size=(5, 2)) * 2, 3)
        config = SemiSupConfig(
            "propagation", kernel=kernel, n_neighbors=3, tol=1e-12
        )
        out = label_propagation(labeled, unlabeled, config)
        npt.assert_array_equal(
            out.labels, _propagation_oracle(labeled, unlabeled, config)
        )

    def test_disconnected_row_falls_back_to_nearest_labeled(self):
        labeled = _labeled([[0.0, 0.0], [0.1, 0.0]], [0, 1], 2)
        # distance 1000 underflows exp(-d^2) to exactly zero
        unlabeled = _unlabeled([[1000.0, 0.0]], 2)
        out = label_propagation(
            labeled, unlabeled, SemiSupConfig("propagation", gamma=1.0)
        )
        assert out.labels[0] == 1
        assert out.confidence[0] == 0.0

    def test_requires_two_classes(self):
        labeled = _labeled([[0.0], [1.0]], [0, 0], 1)
        with pytest.raises(ConfigurationError, match="2 classes"):
            label_propagation(labeled, _unlabeled([[0.5]], 1),
                              SemiSupConfig("propagation"))


class TestLabelSpreading:
    def test_small_alpha_follows_local_labels(self):
        labeled = _labeled([[0.0, 0.0], [10.0, 0.0]], [0, 1], 2)
        unlabeled = _unlabeled([[9.5, 0.0]], 2)
        config = SemiSupConfig("spreading", alpha=0.05, gamma=1.0)
        out = label_spreading(labeled, unlabeled, config)
        assert out.labels[0] == 1

    def test_equidistant_tie_goes_to_class_zero(self):
        labeled = _labeled([[-1.0, 0.0], [1.0, 0.0]], [0, 1], 2)
        unlabeled = _unlabeled([[0.0, 0.0]], 2)
        out = label_spreading(labeled, unlabeled, SemiSupConfig("spreading"))
        assert out.labels[0] == 0

    @pytest.mark.parametrize("alpha", [0.2, 0.8])
    @pytest.mark.parametrize("kernel", ["rbf", "knn"])
    def test_matches_closed_form_oracle(self, alpha, kernel):
        rng = np.random.default_rng(4)
        labeled = _labeled(rng.normal(size=(4, 2)) * 2, [0, 0, 1, 2], 3)
        unlabeled = _unlabeled(rng.normal(size=(6, 2)) * 2, 3)
        config = SemiSupConfig(
            "spreading", kernel=kernel, alpha=alpha, n_neighbors=3, tol=1e-12
        )
        out = label_spreading(labeled, unlabeled, config)
        npt.assert_array_equal(
            out.labels, _spreading_oracle(labeled, unlabeled, config)
        )


class TestSemiKmeans:
    def test_point_at_class_mean_takes_that_class(self, tight_clusters):
        means = corner_means(4, 6)
        out = semi_kmeans(
            tight_clusters, _unlabeled(means, 4), SemiSupConfig("kmeans")
        )
        npt.assert_array_equal(out.labels, np.arange(4))

    def test_labeled_only_returns_class_mean_centers(self, tight_clusters):
        out = semi_kmeans(
            tight_clusters, _unlabeled(np.empty((0, 6)), 4), SemiSupConfig("kmeans")
        )
        assert len(out) == 0
        expected = np.vstack(
            [tight_clusters.X[tight_clusters.y == c].mean(axis=0) for c in range(4)]
        )
        npt.assert_allclose(out.centers, expected)

    def test_matches_pinned_lloyd_oracle(self):
        rng = np.random.default_rng(7)
        labeled = blobs([[0.0, 0.0], [4.0, 0.0]], n_per=5, scale=1.0, seed=7)
        unlabeled_X = rng.normal(size=(20, 2)) * 2 + [2.0, 0.0]
        out = semi_kmeans(
            labeled, _unlabeled(unlabeled_X, 2), SemiSupConfig("kmeans")
        )

        centers = np.vstack(
            [labeled.X[labeled.y == c].mean(axis=0) for c in range(2)]
        )
        assign = np.full(20, -1)
        while True:
            D = np.linalg.norm(unlabeled_X[:, None] - centers[None], axis=2)
            new_assign = np.argmin(D, axis=1)
            for c in range(2):
                members = np.vstack(
                    [labeled.X[labeled.y == c], unlabeled_X[new_assign == c]]
                )
                centers[c] = members.mean(axis=0)
            if np.array_equal(new_assign, assign):
                break
            assign = new_assign
        npt.assert_array_equal(out.labels, assign)

    def test_missing_class_rejected(self):
        labeled = _labeled([[0.0], [1.0]], [0, 1], 3)
        with pytest.raises(ConfigurationError, match="covers 2 of 3"):
            semi_kmeans(labeled, _unlabeled([[0.5]], 3), SemiSupConfig("kmeans"))


class TestLabelerContract:
    @pytest.mark.parametrize("config", default_semisup_grid())
    def test_one_label_per_row_within_labeled_classes(self, config):
        labeled = blobs(corner_means(3, 4), n_per=8, scale=1.0, seed=1)
        unlabeled = _unlabeled(
            np.random.default_rng(3).normal(size=(15, 4)) * 3, 3
        )
        out = pseudo_label(labeled, unlabeled, config)
        assert len(out) == 15
        assert set(np.unique(out.labels)) <= {0, 1, 2}
        assert np.all(np.isfinite(out.confidence))

    @pytest.mark.parametrize("config", default_semisup_grid())
    def test_deterministic(self, config):
        labeled = blobs(corner_means(3, 4), n_per=8, scale=1.0, seed=2)
        unlabeled = _unlabeled(
            np.random.default_rng(5).normal(size=(10, 4)) * 3, 3
        )
        a = pseudo_label(labeled, unlabeled, config)
        b = pseudo_label(labeled, unlabeled, config)
        npt.assert_array_equal(a.labels, b.labels)
        npt.assert_array_equal(a.confidence, b.confidence)


class TestBestSemisup:
    def test_singleton_grid_is_forced(self, tight_clusters):
        unlabeled = _unlabeled(corner_means(4, 6), 4)
        config = SemiSupConfig("kmeans")
        out = best_semisup(
            tight_clusters, unlabeled, tight_clusters,
            ClassifierConfig("lda"), grid=[config],
        )
        assert out.config == config

    def test_selection_matches_exhaustive_oracle(self):
        from noseaug.classify import fit

        labeled = blobs(corner_means(3, 4, spread=2.0), n_per=10, scale=1.2, seed=3)
        validation = blobs(corner_means(3, 4, spread=2.0), n_per=10, scale=1.2, seed=4)
        unlabeled = _unlabeled(
            np.random.default_rng(9).normal(size=(12, 4)) * 2, 3
        )
        clf = ClassifierConfig("knn", k=1)
        grid = default_semisup_grid()

        best_cfg, best_acc = None, -1.0
        for config in grid:
            pseudo = pseudo_label(labeled, unlabeled, config)
            aug = LabeledDataset(
                np.vstack([labeled.X, pseudo.rows]),
                np.concatenate([labeled.y, pseudo.labels]),
                3,
            )
            acc = fit(clf, aug).accuracy(validation)
            if acc > best_acc:
                best_cfg, best_acc = config, acc

        out = best_semisup(labeled, unlabeled, validation, clf, grid=grid)
        assert out.config == best_cfg

    def test_failing_grid_point_skipped_with_warning(self):
        # labeled covers 2 of 3 classes: kmeans fails, propagation succeeds
        labeled = _labeled([[0.0, 0.0], [1.0, 0.0], [5.0, 0.0]], [0, 0, 1], 3)
        unlabeled = _unlabeled([[0.5, 0.0], [4.5, 0.0]], 3)
        validation = _labeled([[0.2, 0.0], [4.8, 0.0]], [0, 1], 3)
        grid = [SemiSupConfig("kmeans"), SemiSupConfig("propagation")]
        with pytest.warns(UserWarning, match="kmeans"):
            out = best_semisup(
                labeled, unlabeled, validation, ClassifierConfig("knn", k=1),
                grid=grid,
            )
        assert out.config.method == "propagation"

    def test_every_grid_point_failing_is_fatal(self):
        labeled = _labeled([[0.0, 0.0], [1.0, 0.0]], [0, 0], 3)
        unlabeled = _unlabeled([[0.5, 0.0]], 3)
        with pytest.raises(ConfigurationError, match="grid"):
            with pytest.warns(UserWarning):
                best_semisup(
                    labeled, unlabeled, labeled, ClassifierConfig("knn", k=1),
                    grid=[SemiSupConfig("kmeans")],
                )


class TestConfigValidation:
    @pytest.mark.parametrize(
        "bad",
        [
            SemiSupConfig("transduction"),
            SemiSupConfig("propagation", kernel="poly"),
            SemiSupConfig("propagation", n_neighbors=0),
            SemiSupConfig("spreading", alpha=1.0),
            SemiSupConfig("propagation", gamma=0.0),
            SemiSupConfig("propagation", max_iterations=0),
        ],
    )
    def test_invalid_configs_rejected(self, bad):
        with pytest.raises(ConfigurationError):
            bad.validate()

    def test_pseudo_labeled_set_length_mismatch_rejected(self):
        with pytest.raises(ConfigurationError, match="lengths"):
            PseudoLabeledSet(
                np.zeros((2, 2)), np.zeros(1, dtype=np.int64), np.zeros(2)
            )
