import numpy as np
import pytest

from driftlab.analysis import (
    IMAV_BINS,
    RAM_BINS,
    SAM_BINS,
    bin_angles,
    imav,
    ram,
    recall_at_k,
    rotation_flip_demo,
    sam,
    sam_delta_hist,
)
from driftlab.datastream import PhaseDataset
from driftlab.encoder import MlpParams, MlpSpec
from driftlab.errors import DimensionMismatchError, EmptyCorrectSetError
from driftlab.linalg import (
    l2_normalize_rows,
    negate_identity,
    plane_rotation,
    random_rotation,
    rng_from,
)


def unit_rows(n, d, seed):
    return l2_normalize_rows(rng_from(seed).standard_normal((n, d)))


def planar(angles_deg):
    t = np.radians(np.asarray(angles_deg, dtype=float))
    return np.stack([np.cos(t), np.sin(t)], axis=1)


def identity_snapshot(d, negate_language=False):
    """Encoders that just normalize their input rows (optionally negating
    the language side), so raw data doubles as the embedding."""

    def branch(scale):
        spec = MlpSpec((d, d))
        return MlpParams(spec, [scale * np.eye(d)], [np.zeros(d)])

    from driftlab.encoder import DualEncoderSnapshot

    return DualEncoderSnapshot(branch(1.0), branch(-1.0 if negate_language else 1.0), 0.07)


class TestBinAngles:
    def test_paper_bin_layouts(self):
        assert SAM_BINS == (0.0, 5.0, 10.0, 15.0, 20.0, 180.0)
        assert RAM_BINS == (0.0, 15.0, 20.0, 25.0, 30.0, 180.0)
        assert IMAV_BINS == SAM_BINS

    def test_first_bin_closed_both_ends(self):
        h = bin_angles([0.0, 5.0, 5.0001], SAM_BINS)
        assert h.counts == (2, 1, 0, 0, 0)

    def test_fractions_sum_to_one(self):
        h = bin_angles(rng_from(0).uniform(0, 180, 500), SAM_BINS)
        assert sum(h.counts) == 500
        assert sum(h.fractions) == pytest.approx(1.0, abs=1e-9)

    def test_labels(self):
        h = bin_angles([1.0], SAM_BINS)
        assert h.bin_labels() == ("[0,5]", "(5,10]", "(10,15]", "(15,20]", "(20,180]")

    def test_custom_edges(self):
        h = bin_angles([10.0, 30.0], (0.0, 20.0, 180.0))
        assert h.counts == (1, 1)


class TestSam:
    def test_orthonormal_rows(self):
        m = sam(np.eye(3))
        assert np.all(np.diagonal(m) == 0.0)
        off = m[~np.eye(3, dtype=bool)]
        np.testing.assert_allclose(off, 90.0, atol=1e-9)

    def test_duplicated_row_zero_angle(self):
        e = planar([10.0, 10.0, 80.0])
        assert sam(e)[0, 1] == pytest.approx(0.0, abs=1e-6)

    def test_antipodal_rows(self):
        e = planar([0.0, 180.0])
        assert sam(e)[0, 1] == pytest.approx(180.0, abs=1e-9)

    def test_symmetric_zero_diagonal(self):
        e = unit_rows(12, 6, 0)
        m = sam(e)
        np.testing.assert_allclose(m, m.T, atol=1e-9)
        assert np.all(np.diagonal(m) == 0.0)

    def test_invariant_under_global_rotation(self):
        e = unit_rows(10, 7, 1)
        r = random_rotation(7, 5)
        np.testing.assert_allclose(sam(e @ r.T), sam(e), atol=1e-7)


class TestSamDeltaHist:
    def test_identical_sets_all_lowest_bin(self):
        e = unit_rows(9, 5, 2)
        h = sam_delta_hist(e, e)
        assert h.fractions[0] == 1.0

    def test_global_rotation_all_lowest_bin(self):
        e = unit_rows(9, 5, 3)
        r = random_rotation(5, 11)
        h = sam_delta_hist(e, e @ r.T)
        assert h.fractions[0] == 1.0

    def test_hand_built_12_degree_shift(self):
        e_i = planar([0.0, 50.0, 90.0])
        e_j = planar([0.0, 50.0, 102.0])
        # Pairs (0,2) and (1,2) change by exactly 12 degrees; (0,1) by 0.
        h = sam_delta_hist(e_i, e_j)
        assert h.counts == (1, 0, 2, 0, 0)

    def test_excludes_diagonal(self):
        e = unit_rows(4, 3, 4)
        assert sam_delta_hist(e, e).total == 6  # C(4,2) unordered pairs

    def test_row_count_mismatch_raises(self):
        with pytest.raises(DimensionMismatchError):
            sam_delta_hist(unit_rows(3, 4, 0), unit_rows(4, 4, 1))


class TestRam:
    def test_identical_sets_zero(self):
        e = unit_rows(6, 4, 5)
        np.testing.assert_allclose(ram(e, e), 0.0, atol=1e-5)

    def test_negated_sets_180(self):
        e = unit_rows(6, 4, 6)
        np.testing.assert_allclose(ram(e, e @ negate_identity(4).T), 180.0, atol=1e-5)

    @pytest.mark.parametrize("theta", [5.0, 25.0, 90.0])
    def test_planar_rotation_reports_exact_angle(self, theta):
        e = planar(rng_from(7).uniform(0, 360, 20))
        r = plane_rotation(2, theta)
        np.testing.assert_allclose(ram(e, e @ r.T), theta, atol=1e-6)

    def test_shape_mismatch_raises(self):
        with pytest.raises(DimensionMismatchError):
            ram(unit_rows(3, 4, 0), unit_rows(3, 5, 1))


class TestImav:
    def make_data(self, vision, language):
        n = vision.shape[0]
        return PhaseDataset(vision, language, np.arange(n), "d")

    def test_identical_snapshots_lowest_bin(self):
        d = 4
        snap = identity_snapshot(d)
        vision = unit_rows(6, d, 8)
        language = l2_normalize_rows(vision + 0.1 * rng_from(9).standard_normal((6, d)))
        h = imav(snap, snap, self.make_data(vision, language))
        assert h.fractions[0] == 1.0

    def test_negated_language_angle_change(self):
        # New = old with language negated: angle becomes 180 - theta, so the
        # change is |2*theta - 180|.
        d = 2
        old = identity_snapshot(d)
        new = identity_snapshot(d, negate_language=True)
        vision = planar([0.0])
        language = planar([40.0])  # theta_old = 40deg -> change = 100deg
        h = imav(old, new, self.make_data(vision, language), bins=(0.0, 99.0, 101.0, 180.0))
        assert h.counts == (0, 1, 0)

    def test_correct_set_restriction(self):
        # Sample 0 misretrieved by the old snapshot: only sample 1 contributes.
        d = 3
        old = identity_snapshot(d)
        vision = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        language = np.array(
            [[0.0, 0.8, 0.6], [0.5, np.sqrt(3) / 2, 0.0]]
        )  # row 0: sim 0.0 vs 0.5 -> prefers column 1; row 1: 0.866 > 0.8
        m = vision @ language.T
        assert np.argmax(m[0]) == 1 and np.argmax(m[1]) == 1
        data = self.make_data(vision, language)
        h = imav(old, old, data)
        assert h.total == 1

    def test_empty_correct_set_raises(self):
        d = 2
        old = identity_snapshot(d)
        vision = planar([0.0, 90.0])
        language = planar([90.0, 0.0])  # both rows misretrieved
        with pytest.raises(EmptyCorrectSetError):
            imav(old, old, self.make_data(vision, language))

    def test_both_directions_flag_restricts_further(self):
        d = 3
        old = identity_snapshot(d)
        # Row argmaxes are diagonal for both samples; column 1's argmax is row 0,
        # so sample 1 fails the text->image check.
        vision = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        language = np.array(
            [[0.9, 0.3, np.sqrt(0.10)], [0.6, 0.5, np.sqrt(0.39)]]
        )  # similarity matrix [[0.9, 0.6], [0.3, 0.5]]
        m = vision @ language.T
        assert np.argmax(m[0]) == 0 and np.argmax(m[1]) == 1
        assert np.argmax(m[:, 1]) == 0
        data = self.make_data(vision, language)
        assert imav(old, old, data).total == 2
        assert imav(old, old, data, both_directions=True).total == 1


class TestRecallAtK:
    def test_identity_dominant_perfect(self):
        m = np.full((6, 6), 0.1)
        np.fill_diagonal(m, 0.9)
        rep = recall_at_k(m)
        assert all(v == 1.0 for v in rep.image_to_text.values())
        assert all(v == 1.0 for v in rep.text_to_image.values())

    def test_reversed_two_by_two(self):
        m = np.array([[0.1, 0.9], [0.9, 0.1]])
        rep = recall_at_k(m, ks=(1, 2))
        assert rep.image_to_text[1] == 0.0 and rep.image_to_text[2] == 1.0
        assert rep.text_to_image[1] == 0.0 and rep.text_to_image[2] == 1.0

    def test_monotone_in_k(self):
        m = rng_from(10).uniform(-1, 1, (20, 20))
        rep = recall_at_k(m, ks=(1, 5, 10))
        assert rep.image_to_text[1] <= rep.image_to_text[5] <= rep.image_to_text[10]
        assert rep.text_to_image[1] <= rep.text_to_image[5] <= rep.text_to_image[10]

    def test_k_clipped_to_n(self):
        m = rng_from(11).uniform(-1, 1, (3, 3))
        rep = recall_at_k(m, ks=(10,))
        assert rep.image_to_text[10] == 1.0

    def test_tie_breaks_toward_lower_index(self):
        # Row 0: diagonal ties at rank 1 (its own index is lowest).
        # Row 1: diagonal ties with column 0, which ranks earlier.
        m = np.array([[0.5, 0.5], [0.5, 0.5]])
        rep = recall_at_k(m, ks=(1,))
        assert rep.image_to_text[1] == 0.5

    def test_asymmetric_directions(self):
        # Row 1 peaks off-diagonal (0.85 at column 0) and column 1 peaks at
        # row 0 (0.8), so both directions miss exactly one query.
        m = np.array([[0.9, 0.8], [0.85, 0.1]])
        rep = recall_at_k(m, ks=(1,))
        assert rep.image_to_text[1] == 0.5
        assert rep.text_to_image[1] == 0.5


class TestRotationFlipDemo:
    def test_negation_flips_constructed_sample(self):
        rep = rotation_flip_demo(8, 4, seed=1)
        assert rep.entries_negated_exactly
        assert rep.correct_row_flipped
        assert rep.retrieval_unchanged_when_both_rotated
        assert rep.argmax_before[rep.correct_index] == rep.correct_index
        assert rep.argmax_before[rep.misretrieved_index] != rep.misretrieved_index
        assert rep.argmax_after[rep.correct_index] != rep.correct_index

    def test_rotation_is_negated_identity(self):
        rep = rotation_flip_demo(5, 3, seed=2)
        np.testing.assert_array_equal(rep.rotation, -np.eye(5))
        np.testing.assert_allclose(rep.rotation.T @ rep.rotation, np.eye(5), atol=1e-12)

    def test_hand_negation_example(self):
        m = np.array([[0.9, 0.1], [0.5, 0.6]])
        negated = -m
        assert np.argmax(m[0]) == 0
        assert np.argmax(negated[0]) == 1

    def test_deterministic(self):
        a = rotation_flip_demo(6, 4, seed=3)
        b = rotation_flip_demo(6, 4, seed=3)
        np.testing.assert_array_equal(a.m_before, b.m_before)
        assert a.correct_index == b.correct_index
