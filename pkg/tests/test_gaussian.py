import numpy as np
import pytest

from ferroflow.algebra import (
    GeneratorSet,
    GrassmannElement,
    berezin_integrate,
    exp_of,
    translate_double,
    wedge,
)
from ferroflow.errors import GramSplitError
from ferroflow.gaussian import (
    AntisymmetricCovariance,
    covariance_split_check,
    det_correlation,
    gaussian_expectation,
    gaussian_moment,
    heat_kernel_convolve,
    laplacian,
    pfaffian,
)

from conftest import rand_antisymmetric, rand_element


def pfaffian_matching_sum(a):
    """Independent oracle: the signed perfect-matching expansion."""
    a = np.asarray(a)
    m = a.shape[0]
    if m == 0:
        return 1.0
    if m % 2:
        return 0.0
    total = 0.0
    rest = list(range(1, m))
    for pos, k in enumerate(rest):
        sub = [i for i in rest if i != k]
        minor = a[np.ix_(sub, sub)]
        total += (-1.0) ** pos * a[0, k] * pfaffian_matching_sum(minor)
    return total


def expectation_density_oracle(a, f):
    """Independent oracle: Pf(A) times the top coefficient of f against the
    explicit Gaussian density (needs invertible A)."""
    gens = f.gens
    ainv = np.linalg.inv(a)
    quad = GrassmannElement.zero(gens)
    for i in range(gens.count):
        for j in range(gens.count):
            quad = quad + GrassmannElement.monomial(gens, [i, j], ainv[i, j])
    dens = exp_of(quad * (-0.5))
    return pfaffian(a) * wedge(f, dens).coeffs[-1]


class TestCovarianceType:
    def test_antisymmetry_enforced(self):
        a = np.array([[0.0, 1.0], [-1.0, 1e-15]])
        cov = AntisymmetricCovariance(a)
        assert np.all(cov.matrix == -cov.matrix.T)

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            AntisymmetricCovariance(np.array([[0.0, 1.0], [1.0, 0.0]]))

    def test_block_form(self):
        c = np.array([[2.0, 0.5], [0.5, 1.0]])
        cov = AntisymmetricCovariance.from_block(c)
        assert np.all(cov.matrix[:2, 2:] == c)
        assert np.all(cov.matrix[2:, :2] == -c)
        assert np.all(cov.matrix[:2, :2] == 0.0)

    def test_split_requires_positive_definite(self):
        good = np.eye(2)
        bad = -np.eye(2)
        with pytest.raises(ValueError):
            AntisymmetricCovariance.from_split(good, bad)
        cov = AntisymmetricCovariance.from_split(2 * good, good)
        assert cov.has_split()
        assert np.all(cov.c_matrix == good)

    def test_require_split(self):
        cov = AntisymmetricCovariance.zero(4)
        with pytest.raises(GramSplitError):
            cov.require_split()


class TestPfaffian:
    def test_two_by_two_normalization(self):
        assert pfaffian(np.array([[0.0, 2.0], [-2.0, 0.0]])) == 2.0

    def test_four_by_four_formula(self, rng):
        a = rand_antisymmetric(rng, 4)
        expect = a[0, 1] * a[2, 3] - a[0, 2] * a[1, 3] + a[0, 3] * a[1, 2]
        assert pfaffian(a) == pytest.approx(expect, rel=1e-12)

    def test_matching_sum_oracle_small_dims(self, rng):
        for dim in (2, 4, 6):
            for _ in range(5):
                a = rand_antisymmetric(rng, dim)
                assert pfaffian(a) == pytest.approx(
                    pfaffian_matching_sum(a), rel=1e-11)

    def test_squares_to_determinant(self, rng):
        for dim in (2, 4, 6, 8, 10, 12):
            a = rand_antisymmetric(rng, dim)
            pf = pfaffian(a)
            det = np.linalg.det(a)
            assert abs(pf * pf - det) <= 1e-9 * abs(det)

    def test_odd_dimension_rejected(self):
        with pytest.raises(ValueError, match="odd"):
            pfaffian(np.zeros((3, 3)))

    def test_complex_entries(self, rng):
        a = rand_antisymmetric(rng, 6) + 1j * rand_antisymmetric(rng, 6)
        pf = pfaffian(a)
        det = np.linalg.det(a)
        assert abs(pf * pf - det) <= 1e-9 * abs(det)

    def test_singular(self):
        assert pfaffian(np.zeros((4, 4))) == 0.0


class TestMoments:
    def test_pair_moment_is_entry(self, rng):
        a = rand_antisymmetric(rng, 8)
        assert gaussian_moment(a, [0, 1]) == pytest.approx(a[0, 1])
        assert gaussian_moment(a, [2, 5]) == pytest.approx(a[2, 5])

    def test_odd_vanishes_empty_is_one(self, rng):
        a = rand_antisymmetric(rng, 8)
        assert gaussian_moment(a, [0, 1, 2]) == 0.0
        assert gaussian_moment(a, []) == 1.0

    def test_four_point(self, rng):
        a = rand_antisymmetric(rng, 8)
        expect = a[0, 1] * a[2, 3] - a[0, 2] * a[1, 3] + a[0, 3] * a[1, 2]
        assert gaussian_moment(a, [0, 1, 2, 3]) == pytest.approx(expect)

    def test_expectation_of_one(self, rng):
        a = rand_antisymmetric(rng, 6)
        gens = GeneratorSet(6)
        assert gaussian_expectation(a, GrassmannElement.scalar(gens, 1.0)) == 1.0

    def test_expectation_density_oracle_all_subsets(self, rng):
        a = rand_antisymmetric(rng, 6)
        gens = GeneratorSet(6)
        for mask in range(64):
            mono = GrassmannElement(gens, np.eye(gens.dim)[mask])
            direct = gaussian_expectation(a, mono)
            oracle = expectation_density_oracle(a, mono)
            assert abs(direct - oracle) < 1e-10

    def test_expectation_random_element(self, rng):
        a = rand_antisymmetric(rng, 6)
        f = rand_element(rng, GeneratorSet(6))
        assert abs(gaussian_expectation(a, f)
                   - expectation_density_oracle(a, f)) < 1e-10


class TestLaplacianAndHeatKernel:
    def test_scalar_annihilated(self, rng):
        a = rand_antisymmetric(rng, 6)
        g = GeneratorSet(6)
        out = laplacian(a, GrassmannElement.scalar(g, 5.0))
        assert np.all(out.coeffs == 0.0)

    def test_pair_monomial_sign_anchor(self, rng):
        # the convention anchor: Delta_A Psi_{01} = +2 A_{01}, so the heat
        # kernel's scalar part reproduces the two-point moment
        a = rand_antisymmetric(rng, 6)
        g = GeneratorSet(6)
        out = laplacian(a, GrassmannElement.monomial(g, [0, 1]))
        assert out.scalar_part == pytest.approx(2.0 * a[0, 1])

    def test_degree_drop(self, rng):
        a = rand_antisymmetric(rng, 6)
        g = GeneratorSet(6)
        out = laplacian(a, GrassmannElement.monomial(g, [0, 1, 2, 3]))
        assert np.all(out.coeffs[out.degrees() != 2] == 0.0)

    def test_moment_consistency(self, rng):
        a = rand_antisymmetric(rng, 8, 0.4)
        f = rand_element(rng, GeneratorSet(8), 0.5)
        conv = heat_kernel_convolve(a, f)
        assert abs(conv.scalar_part - gaussian_expectation(a, f)) < 1e-12

    def test_translation_oracle(self, rng):
        # (mu_A * f)(Psi) = integral of f(Psi + Theta) over Theta: partial
        # expectation in the doubled algebra, independent of the Laplacian
        g = GeneratorSet(6)
        a = rand_antisymmetric(rng, 6, 0.5)
        f = rand_element(rng, g, 0.7)
        doubled = translate_double(f)
        out = np.zeros(g.dim, dtype=complex)
        for mask in doubled.nonzero_masks():
            mask = int(mask)
            psi_part = mask & (g.dim - 1)
            theta_part = mask >> g.count
            out[psi_part] += doubled.coeffs[mask] * gaussian_moment(a, theta_part)
        conv = heat_kernel_convolve(a, f)
        assert np.max(np.abs(conv.coeffs - out)) < 1e-12

    def test_scalar_passthrough(self, rng):
        a = rand_antisymmetric(rng, 6)
        g = GeneratorSet(6)
        out = heat_kernel_convolve(a, GrassmannElement.scalar(g, 2.0))
        assert out.scalar_part == 2.0
        assert np.count_nonzero(out.coeffs) == 1

    def test_pair_monomial_convolution(self, rng):
        a = rand_antisymmetric(rng, 6)
        g = GeneratorSet(6)
        out = heat_kernel_convolve(a, GrassmannElement.monomial(g, [0, 1]))
        assert out.scalar_part == pytest.approx(a[0, 1])
        assert out.coeffs[0b11] == 1.0

    def test_zero_covariance_identity(self, rng):
        g = GeneratorSet(6)
        f = rand_element(rng, g)
        out = heat_kernel_convolve(np.zeros((6, 6)), f)
        assert np.all(out.coeffs == f.coeffs)

    def test_series_terminates(self, rng):
        a = rand_antisymmetric(rng, 6)
        g = GeneratorSet(6)
        term = rand_element(rng, g)
        for _ in range(g.pairs + 1):
            term = laplacian(a, term)
        assert np.all(term.coeffs == 0.0)


class TestCovarianceSplitting:
    def test_zero_second_covariance(self, rng):
        a = rand_antisymmetric(rng, 8, 0.4)
        f = rand_element(rng, GeneratorSet(8))
        assert covariance_split_check(a, np.zeros((8, 8)), f) == 0.0

    def test_random_triples(self, rng):
        for _ in range(10):
            a = rand_antisymmetric(rng, 8, 0.4)
            b = rand_antisymmetric(rng, 8, 0.4)
            f = rand_element(rng, GeneratorSet(8))
            assert covariance_split_check(a, b, f) <= 1e-10

    def test_scalar_input(self, rng):
        a = rand_antisymmetric(rng, 6)
        b = rand_antisymmetric(rng, 6)
        f = GrassmannElement.scalar(GeneratorSet(6), 3.0)
        assert covariance_split_check(a, b, f) == 0.0


class TestExponentialPairing:
    def test_pairing_identity(self, rng):
        # E over psi of exp(<Psi, Theta>) equals exp(-<Theta, A Theta>/2),
        # coefficientwise in the theta block
        n_gen = 6
        g = GeneratorSet(n_gen)
        doubled = GeneratorSet(2 * n_gen)
        a = rand_antisymmetric(rng, n_gen, 0.6)
        pairing = GrassmannElement.zero(doubled)
        for i in range(n_gen):
            pairing = pairing + GrassmannElement.monomial(
                doubled, [i, i + n_gen], 1.0)
        lhs_full = exp_of(pairing)
        lhs = np.zeros(1 << n_gen, dtype=complex)
        for mask in lhs_full.nonzero_masks():
            mask = int(mask)
            psi_part = mask & ((1 << n_gen) - 1)
            theta_part = mask >> n_gen
            lhs[theta_part] += lhs_full.coeffs[mask] * gaussian_moment(a, psi_part)
        quad = GrassmannElement.zero(g)
        for i in range(n_gen):
            for j in range(n_gen):
                quad = quad + GrassmannElement.monomial(g, [i, j], a[i, j])
        rhs = exp_of(quad * (-0.5))
        assert np.max(np.abs(lhs - rhs.coeffs)) < 1e-12


class TestDetCorrelation:
    def test_single_pair_entry(self, rng):
        c = rand_antisymmetric(rng, 3) @ rand_antisymmetric(rng, 3)
        c = c + c.T
        assert det_correlation(c, [0], [1]) == pytest.approx(c[0, 1])

    def test_unequal_sizes_vanish(self, rng):
        c = np.eye(3)
        assert det_correlation(c, [0, 1], [2]) == 0.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            det_correlation(np.eye(3), [], [0])

    def test_minor_determinant_and_pfaffian_route(self, rng):
        c = rng.normal(size=(3, 3))
        c = c + c.T
        cov = AntisymmetricCovariance.from_block(c)
        for (jj, kk) in [([0, 1], [0, 1]), ([0, 1], [0, 2]), ([0, 2], [1, 2])]:
            minor = c[np.ix_(jj, kk)]
            expect = minor[0, 0] * minor[1, 1] - minor[0, 1] * minor[1, 0]
            val = det_correlation(c, jj, kk)
            assert val == pytest.approx(expect)
            # block-Pfaffian route carries the interleaving parity (-1)^(p(p-1)/2)
            block = gaussian_moment(cov.matrix, sorted(jj + [k + 3 for k in kk]))
            assert block == pytest.approx(-expect)

    def test_density_oracle_interleaved(self, rng):
        # against the explicit barred/unbarred Gaussian density: the moment
        # of psi_j1 psibar_k1 psi_j2 psibar_k2 ... equals det C_{JxK}
        n = 3
        c = rng.normal(size=(n, n))
        c = c + c.T + 4.0 * np.eye(n)
        gens = GeneratorSet(2 * n)
        cinv = np.linalg.inv(c)
        quad = GrassmannElement.zero(gens)
        for i in range(n):
            for j in range(n):
                quad = quad + GrassmannElement.monomial(gens, [i + n, j], cinv[i, j])
        dens = exp_of(quad * (-1.0))
        measure = list(range(n, 2 * n)) + list(range(n))

        def mu_c(f):
            out = berezin_integrate(wedge(f, dens), measure)
            return np.linalg.det(c) * out.scalar_part

        assert mu_c(GrassmannElement.scalar(gens, 1.0)) == pytest.approx(1.0)
        for (jj, kk) in [([0], [0]), ([0, 1], [0, 1]), ([0, 1, 2], [0, 1, 2]),
                         ([0, 2], [1, 2])]:
            inter = GrassmannElement.monomial(
                gens, [x for pair in zip(jj, kk) for x in (pair[0], pair[1] + n)])
            assert mu_c(inter) == pytest.approx(det_correlation(c, jj, kk))
