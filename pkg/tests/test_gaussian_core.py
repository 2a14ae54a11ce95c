import numpy as np
import pytest
from hypothesis import assume, given

from conftest import dense_gamma, dense_nu_minus, physical_ccms, sigma_matrices
from cvrealign.errors import SingularMatrix
from cvrealign.gaussian_core import (
    I_X,
    IDENTITY,
    S3_I,
    X_I,
    Z_PRIME,
    Z_SWAP,
    SigmaBasisMatrix,
    SymmetricCCM,
    beta,
    gamma_prime,
    is_valid_ccm,
    k_coefficients,
    mixture_ccm,
    physicality_check,
    quadrature_covariance,
    simon_ppt_check,
    symplectic_eigenvalues,
)

TMSV = SymmetricCCM(5.0 / 6.0, -2.0 / 3.0, 0.0)


def coeffs(m):
    return np.asarray(m.coeffs)


# --- sigma-basis algebra against dense 4x4 matrices -------------------------


def test_dense_layout():
    m = SigmaBasisMatrix(1.0, 2.0, 3.0, 4.0)
    expected = np.array(
        [[1, 2, 3, 4], [2, 1, 4, 3], [3, 4, 1, 2], [4, 3, 2, 1]], dtype=float
    )
    np.testing.assert_array_equal(m.dense(), expected)


@given(sigma_matrices(), sigma_matrices())
def test_product_matches_dense(a, b):
    np.testing.assert_allclose((a @ b).dense(), a.dense() @ b.dense(), atol=1e-12)


@given(sigma_matrices())
def test_eigenvalues_and_det_match_dense(a):
    np.testing.assert_allclose(np.sort(a.eigenvalues()), np.sort(np.linalg.eigvalsh(a.dense())), atol=1e-12)
    assert a.det() == pytest.approx(np.linalg.det(a.dense()), abs=1e-10)


@given(sigma_matrices())
def test_inverse_matches_dense(a):
    assume(not a.is_singular(1e-3))
    np.testing.assert_allclose(a.inverse().dense(), np.linalg.inv(a.dense()), rtol=1e-9, atol=1e-9)


@given(sigma_matrices())
def test_conjugations_match_dense(a):
    d = a.dense()
    np.testing.assert_allclose(a.s3_conjugate().dense(), S3_I @ d @ S3_I, atol=1e-14)
    np.testing.assert_allclose(a.z_conjugate().dense(), Z_SWAP @ d @ Z_SWAP, atol=1e-14)
    np.testing.assert_allclose(a.zprime_conjugate().dense(), Z_PRIME @ d @ Z_PRIME, atol=1e-14)


def test_singular_inverse_reports_eigenvalue():
    with pytest.raises(SingularMatrix) as exc:
        SigmaBasisMatrix(0.0, 1.0, 1.0, 0.0).inverse()
    assert exc.value.eigenvalue == 0.0


def test_from_dense_round_trip_and_rejection():
    m = SigmaBasisMatrix(0.3, -1.0, 2.0, 0.5)
    assert SigmaBasisMatrix.from_dense(m.dense()) == m
    with pytest.raises(ValueError):
        SigmaBasisMatrix.from_dense(np.arange(16.0).reshape(4, 4))


def test_from_eigenvalues_inverts_eigenvalues():
    m = SigmaBasisMatrix(0.1, 0.2, -0.7, 0.4)
    assert SigmaBasisMatrix.from_eigenvalues(m.eigenvalues()).allclose(m)


def test_basis_constants():
    assert (I_X @ I_X).allclose(IDENTITY)
    assert (X_I @ X_I).allclose(IDENTITY)


# --- gamma', K, beta ---------------------------------------------------------


@pytest.mark.parametrize(
    "ccm, expected",
    [
        (SymmetricCCM.vacuum(), (0.0, 0.0, 1.0, 0.0)),
        (TMSV, (0.0, -2.0 / 3.0, 4.0 / 3.0, 0.0)),
        (SymmetricCCM(1.5, 0.5, 0.1), (0.0, 0.5, 2.0, 0.1)),
    ],
)
def test_gamma_prime_examples(ccm, expected):
    np.testing.assert_allclose(coeffs(gamma_prime(ccm)), expected, atol=1e-15)


def test_gamma_prime_is_gamma_plus_half_swap():
    ccm = SymmetricCCM(1.5, 0.5, 0.1)
    np.testing.assert_allclose(gamma_prime(ccm).dense(), ccm.gamma.dense() + 0.5 * X_I.dense())


def test_tmsv_constructor_matches_lambda_half():
    assert SymmetricCCM.tmsv(0.5).as_tuple() == pytest.approx(TMSV.as_tuple(), abs=1e-15)


def test_k_vacuum():
    k = k_coefficients(SymmetricCCM.vacuum())
    assert (k.K1, k.K2, k.K3, k.K4) == pytest.approx((0.0, 0.0, 1.0, 0.0))
    assert k.delta2 == pytest.approx(1.0)


def test_k_tmsv_against_dense_inverse():
    k = k_coefficients(TMSV)
    inv = np.linalg.inv(gamma_prime(TMSV).dense())
    np.testing.assert_allclose(inv[0], [k.K1, k.K2, k.K3, k.K4], atol=1e-13)
    c1, b = -2.0 / 3.0, 4.0 / 3.0
    assert k.K2 == pytest.approx(c1 * (c1**2 - b**2) / k.delta2, rel=1e-13)
    assert k.delta2 == pytest.approx(np.linalg.det(gamma_prime(TMSV).dense()), rel=1e-12)


@given(physical_ccms())
def test_k_matches_dense_inverse(ccm):
    inv = np.linalg.inv(gamma_prime(ccm).dense())
    np.testing.assert_allclose(k_coefficients(ccm).matrix.dense(), inv, rtol=1e-9, atol=1e-11)


def test_beta_examples():
    assert beta(SymmetricCCM.vacuum()).allclose(SigmaBasisMatrix(0.0, 0.0, -1.0, 0.0))
    k = k_coefficients(TMSV)
    assert beta(TMSV).allclose(SigmaBasisMatrix(k.K1, k.K2, -k.K3, -k.K4))
    dense = S3_I @ np.linalg.inv(gamma_prime(TMSV).dense()) @ S3_I
    np.testing.assert_allclose(beta(TMSV).dense(), dense, atol=1e-13)


# --- quadratures, physicality, PPT -------------------------------------------


def test_quadrature_covariance_vacuum_and_thermal():
    np.testing.assert_allclose(quadrature_covariance(SymmetricCCM.vacuum().gamma), np.eye(4) / 2, atol=1e-15)
    np.testing.assert_allclose(quadrature_covariance(SymmetricCCM.thermal(2.0).gamma), 2.5 * np.eye(4), atol=1e-14)


def test_physicality_examples():
    assert physicality_check(SymmetricCCM.vacuum())
    assert physicality_check(TMSV)
    assert symplectic_eigenvalues(TMSV)[0] == pytest.approx(0.5, abs=1e-12)
    assert not physicality_check(SymmetricCCM(0.6, 0.5, 0.0))


def test_simon_examples():
    assert simon_ppt_check(SymmetricCCM.vacuum())
    assert not simon_ppt_check(TMSV)
    assert simon_ppt_check(SymmetricCCM(1.5, 0.5, 0.1))


def test_tiny_correlations_near_threshold():
    # a correlation of 6e-8 at b0 = 1/2 is NPT; a quadratic invariant loses it
    ccm = SymmetricCCM(0.5, 6e-8, 0.0)
    assert physicality_check(ccm)
    assert not simon_ppt_check(ccm)
    nu_pt = symplectic_eigenvalues(ccm, transpose=True)[0]
    assert nu_pt == pytest.approx(0.5 - 6e-8, rel=1e-15)
    nu = symplectic_eigenvalues(SymmetricCCM(2.5, 6e-8, 0.0), transpose=True)
    assert nu[0] == pytest.approx(2.5 - 6e-8, rel=1e-15)
    assert nu[1] == pytest.approx(2.5 + 6e-8, rel=1e-15)


@given(physical_ccms(c_max=3.0))
def test_symplectic_eigenvalues_match_dense(ccm):
    g = dense_gamma(ccm.b0, ccm.b0, ccm.c1, ccm.c2)
    assert symplectic_eigenvalues(ccm)[0] == pytest.approx(dense_nu_minus(g), abs=1e-9)
    assert symplectic_eigenvalues(ccm, transpose=True)[0] == pytest.approx(
        dense_nu_minus(g, partial_transpose=True), abs=1e-9
    )


def test_physicality_agrees_with_uncertainty_relation(rng):
    for _ in range(2000):
        b0 = rng.uniform(0.3, 3.0)
        c1, c2 = rng.uniform(-3.0, 3.0, 2)
        ccm = SymmetricCCM(b0, c1, c2)
        nu = dense_nu_minus(dense_gamma(b0, b0, c1, c2))
        if abs(nu - 0.5) < 1e-8 or b0 <= abs(c1 + c2) or b0 <= abs(c2 - c1):
            continue
        assert physicality_check(ccm) == is_valid_ccm(ccm.gamma) == (nu >= 0.5)


def test_mixture_examples():
    a, b = TMSV, SymmetricCCM.vacuum()
    assert mixture_ccm(1.0, a, b) == a
    assert mixture_ccm(0.0, a, b) == b
    assert mixture_ccm(0.5, a, b).as_tuple() == pytest.approx((2.0 / 3.0, -1.0 / 3.0, 0.0))
    with pytest.raises(ValueError):
        mixture_ccm(1.5, a, b)


@given(physical_ccms(), physical_ccms())
def test_mixture_of_physical_is_physical(a, b):
    assert physicality_check(mixture_ccm(0.3, a, b), tol=1e-9)


def test_flipped_is_local_phase_flip():
    ccm = SymmetricCCM(1.3, 0.8, -0.35)
    g = dense_gamma(1.3, 1.3, 0.8, -0.35)
    # a2 -> -a2 negates every entry that couples mode 2 with mode 1
    sign = np.array([1, -1, 1, -1])
    assert np.allclose(ccm.flipped().gamma.dense(), np.outer(sign, sign) * g)
