import numpy as np
import pytest

from stiefelbench.kernel import Field, RankDeficientError, Rng, frobenius_norm, gaussian_matrix
from stiefelbench.manifold import (
    SkewOperator,
    StiefelPoint,
    adaptive_alpha,
    build_skew,
    cayley_closed,
    cayley_iterative,
    orthonormality_error,
    random_point,
    reorthonormalize,
    retraction_check,
    spectral_norm_estimate,
    tangent_project,
)


def random_pair(rng, n, p, field=Field.REAL, scale=1.0):
    """A random point and a skew operator built from a Gaussian ambient direction."""
    x = random_point(rng, n, p, field)
    w = build_skew(x, scale * gaussian_matrix(rng, n, p, field))
    return x, w


def projection_oracle(x, z):
    """Independent algebraic form of the tangent projection."""
    xh = x.conj().T
    return z - x @ (xh @ z + z.conj().T @ x) / 2.0


class TestStiefelPoint:
    def test_validates_on_construction(self):
        with pytest.raises(ValueError):
            StiefelPoint(2.0 * np.eye(3)[:, :2])

    def test_accepts_orthonormal(self):
        p = StiefelPoint(np.eye(4)[:, :2])
        assert p.n == 4 and p.p == 2 and p.field is Field.REAL

    def test_wide_rejected(self):
        with pytest.raises(ValueError):
            StiefelPoint(np.ones((2, 4)))


class TestOrthonormalityError:
    def test_exact_point(self):
        assert orthonormality_error(np.eye(5)[:, :3]) == 0.0

    def test_scaled_column(self):
        x = np.array([[2.0], [0.0]])
        assert orthonormality_error(x) == pytest.approx(3.0)


class TestBuildSkew:
    def test_z_equals_x_cancels(self):
        x = StiefelPoint(np.array([[1.0], [0.0]]))
        w = build_skew(x, x.mat)
        np.testing.assert_allclose(w.mat, np.zeros((2, 2)), atol=1e-15)

    def test_hand_value(self):
        x = StiefelPoint(np.array([[1.0], [0.0]]))
        z = np.array([[0.0], [1.0]])
        np.testing.assert_allclose(w := build_skew(x, z).mat, [[0.0, -1.0], [1.0, 0.0]])
        assert frobenius_norm(w + w.T) == 0.0

    def test_random_inputs_skew(self):
        rng = Rng(5)
        for field in (Field.REAL, Field.COMPLEX):
            for _ in range(10):
                x = random_point(rng, 7, 3, field)
                w = build_skew(x, gaussian_matrix(rng, 7, 3, field)).mat
                assert frobenius_norm(w + w.conj().T) <= 1e-12 * max(1.0, frobenius_norm(w))

    def test_shape_mismatch(self):
        x = random_point(Rng(0), 5, 2)
        with pytest.raises(ValueError):
            build_skew(x, np.ones((4, 2)))


class TestTangentProject:
    def test_projection_of_x_is_zero(self):
        x = random_point(Rng(1), 6, 2)
        v = tangent_project(x, x.mat)
        assert frobenius_norm(v.mat) <= 1e-12

    def test_tangent_input_unchanged(self):
        x = StiefelPoint(np.array([[1.0], [0.0]]))
        z = np.array([[0.0], [1.0]])
        np.testing.assert_allclose(tangent_project(x, z).mat, z, atol=1e-15)

    def test_hand_value(self):
        x = StiefelPoint(np.array([[1.0], [0.0]]))
        z = np.array([[3.0], [4.0]])
        np.testing.assert_allclose(tangent_project(x, z).mat, [[0.0], [4.0]], atol=1e-14)

    def test_idempotence(self):
        rng = Rng(17)
        for _ in range(100):
            x = random_point(rng, 8, 3)
            z = gaussian_matrix(rng, 8, 3)
            once = tangent_project(x, z).mat
            twice = tangent_project(x, once).mat
            assert frobenius_norm(once - twice) <= 1e-10

    def test_matches_algebraic_oracle(self):
        rng = Rng(23)
        for field in (Field.REAL, Field.COMPLEX):
            for _ in range(50):
                x = random_point(rng, 9, 4, field)
                z = gaussian_matrix(rng, 9, 4, field)
                got = tangent_project(x, z).mat
                want = projection_oracle(x.mat, z)
                assert frobenius_norm(got - want) <= 1e-10


class TestCayleyClosed:
    def test_alpha_zero_returns_x_exactly(self):
        x, w = random_pair(Rng(2), 6, 3)
        y = cayley_closed(x, w, 0.0)
        assert y.mat is x.mat

    def test_hand_rotation(self):
        x = StiefelPoint(np.array([[1.0], [0.0]]))
        w = SkewOperator(np.array([[0.0, -1.0], [1.0, 0.0]]))
        y = cayley_closed(x, w, 2.0)
        np.testing.assert_allclose(y.mat, [[0.0], [1.0]], atol=1e-14)

    @pytest.mark.parametrize("alpha", [0.01, 0.1, 1.0, 10.0])
    def test_orthogonality_preserved(self, alpha):
        x, w = random_pair(Rng(3), 10, 4)
        y = cayley_closed(x, w, alpha)
        assert orthonormality_error(y.mat) <= 1e-12

    def test_unitary_in_complex_case(self):
        x, w = random_pair(Rng(4), 8, 8, Field.COMPLEX)
        y = cayley_closed(x, w, 0.1)
        assert orthonormality_error(y.mat) <= 1e-12


class TestCayleyIterative:
    def test_zero_operator_fixed_point(self):
        x = random_point(Rng(6), 5, 2)
        w = SkewOperator(np.zeros((5, 5)))
        y = cayley_iterative(x, w, 0.3, 4, x.mat)
        np.testing.assert_array_equal(y, x.mat)

    def test_converges_to_closed_form(self):
        rng = Rng(7)
        x, w = random_pair(rng, 6, 3)
        alpha = adaptive_alpha(0.5, w)
        y0 = x.mat + alpha * (w.mat @ x.mat)
        y = cayley_iterative(x, w, alpha, 50, y0)
        yc = cayley_closed(x, w, alpha)
        assert frobenius_norm(y - yc.mat) <= 1e-12

    def test_contraction_ratio_bounded(self):
        rng = Rng(8)
        for _ in range(10):
            x, w = random_pair(rng, 8, 3)
            wn = SkewOperator(w.mat / w.norm)
            alpha = 0.2
            target = cayley_closed(x, wn, alpha).mat
            y = x.mat + alpha * (wn.mat @ x.mat)
            bound = alpha * wn.norm / 2.0 + 1e-6
            prev = frobenius_norm(y - target)
            for _ in range(6):
                y = cayley_iterative(x, wn, alpha, 1, y)
                cur = frobenius_norm(y - target)
                assert cur <= bound * prev
                prev = cur

    def test_order_improves_with_halved_alpha(self):
        rng = Rng(9)
        for _ in range(10):
            x, w = random_pair(rng, 8, 3)
            wn = SkewOperator(w.mat / w.norm)

            def final_error(alpha):
                y0 = x.mat + alpha * (wn.mat @ x.mat)
                y2 = cayley_iterative(x, wn, alpha, 2, y0)
                return frobenius_norm(y2 - cayley_closed(x, wn, alpha).mat)

            assert final_error(0.2) / final_error(0.1) >= 2.0**3.5

    def test_bad_y0_shape(self):
        x, w = random_pair(Rng(10), 5, 2)
        with pytest.raises(ValueError):
            cayley_iterative(x, w, 0.1, 2, np.ones((3, 3)))


class TestAdaptiveAlpha:
    def test_small_norm_returns_l(self):
        w = SkewOperator(0.05 * np.array([[0.0, -1.0], [1.0, 0.0]]))
        assert w.norm == pytest.approx(0.05 * np.sqrt(2))
        assert adaptive_alpha(0.2, w, q=0.5, eps=1e-8) == 0.2

    def test_large_norm_caps(self):
        w_mat = np.array([[0.0, -100.0], [100.0, 0.0]]) / np.sqrt(2)
        w = SkewOperator(w_mat)  # ||W||_F = 100
        a = adaptive_alpha(0.2, w, q=0.5, eps=1e-8)
        assert a == pytest.approx(1.0 / (100.0 + 1e-8))
        assert a * w.norm / 2.0 <= 0.5

    def test_zero_operator_returns_l(self):
        w = SkewOperator(np.zeros((3, 3)))
        assert adaptive_alpha(0.2, w) == 0.2

    def test_validation(self):
        w = SkewOperator(np.zeros((2, 2)))
        with pytest.raises(ValueError):
            adaptive_alpha(-1.0, w)
        with pytest.raises(ValueError):
            adaptive_alpha(0.1, w, q=1.5)


class TestRandomPoint:
    def test_orthonormal(self):
        x = random_point(Rng(42), 4, 2)
        assert orthonormality_error(x.mat) <= 1e-12

    def test_deterministic(self):
        a = random_point(Rng(42), 4, 2)
        b = random_point(Rng(42), 4, 2)
        np.testing.assert_array_equal(a.mat, b.mat)

    def test_complex_square_unitary(self):
        x = random_point(Rng(5), 8, 8, Field.COMPLEX)
        assert orthonormality_error(x.mat) <= 1e-12


class TestReorthonormalize:
    def test_identity_on_orthonormal(self):
        x = random_point(Rng(11), 6, 3)
        y = reorthonormalize(x.mat)
        assert frobenius_norm(y.mat - x.mat) <= 1e-12

    def test_repairs_mild_scaling(self):
        x = random_point(Rng(12), 6, 3)
        drifted = x.mat * np.array([1.01, 0.99, 1.02])
        y = reorthonormalize(drifted)
        assert orthonormality_error(y.mat) <= 1e-12

    def test_zero_column_rejected(self):
        bad = np.eye(4)[:, :2].copy()
        bad[:, 1] = 0.0
        with pytest.raises(RankDeficientError):
            reorthonormalize(bad)


class TestRetractionCheck:
    def test_zero_operator(self):
        x = random_point(Rng(13), 5, 2)
        c0, c1 = retraction_check(x, SkewOperator(np.zeros((5, 5))))
        assert c0 == 0.0
        assert c1 <= 1e-12

    def test_first_order_scaling(self):
        rng = Rng(14)
        for _ in range(10):
            x, w = random_pair(rng, 7, 3)
            wn = SkewOperator(w.mat / w.norm)
            _, c1 = retraction_check(x, wn, h=1e-5)
            _, c1_half = retraction_check(x, wn, h=5e-6)
            assert 1.8 <= c1 / c1_half <= 2.2

    def test_hand_initial_velocity(self):
        x = StiefelPoint(np.array([[1.0], [0.0]]))
        w = SkewOperator(np.array([[0.0, -1.0], [1.0, 0.0]]))
        np.testing.assert_allclose(w.mat @ x.mat, [[0.0], [1.0]])
        c0, c1 = retraction_check(x, w)
        assert c0 <= 1e-14
        assert c1 <= 1e-4


class TestSpectralNormEstimate:
    def test_matches_svd_on_random_skew(self):
        rng = Rng(15)
        z = gaussian_matrix(rng, 10, 10)
        w = z - z.T
        est = spectral_norm_estimate(w, Rng(0))
        true = np.linalg.svd(w, compute_uv=False)[0]
        assert est == pytest.approx(true, rel=1e-6)

    def test_zero(self):
        assert spectral_norm_estimate(np.zeros((4, 4)), Rng(0)) == 0.0


class TestComplexSuite:
    """The core manifold properties hold verbatim with conjugate transpose."""

    def test_iterative_matches_closed_complex(self):
        rng = Rng(16)
        x, w = random_pair(rng, 6, 3, Field.COMPLEX)
        alpha = adaptive_alpha(0.5, w)
        y0 = x.mat + alpha * (w.mat @ x.mat)
        y = cayley_iterative(x, w, alpha, 50, y0)
        assert frobenius_norm(y - cayley_closed(x, w, alpha).mat) <= 1e-12

    def test_contraction_complex(self):
        rng = Rng(18)
        x, w = random_pair(rng, 6, 3, Field.COMPLEX)
        wn = SkewOperator(w.mat / w.norm)
        alpha = 0.2
        target = cayley_closed(x, wn, alpha).mat
        y = x.mat + alpha * (wn.mat @ x.mat)
        bound = alpha * wn.norm / 2.0 + 1e-6
        prev = frobenius_norm(y - target)
        for _ in range(6):
            y = cayley_iterative(x, wn, alpha, 1, y)
            cur = frobenius_norm(y - target)
            assert cur <= bound * prev
            prev = cur
