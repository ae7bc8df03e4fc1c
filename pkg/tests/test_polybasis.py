import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss

from uqpipe import polybasis
from uqpipe.errors import (
    BasisTooLargeError,
    DegreeOverflowError,
    DomainViolationError,
    ShapeError,
    ValidationError,
)


def quad_inner_legendre(f, g, n_nodes=64):
    # E[f g] under U(-1, 1)
    x, w = leggauss(n_nodes)
    return float(np.sum(w * f(x) * g(x)) / 2.0)


class TestUnivariate:
    def test_degree_zero_is_one(self):
        assert polybasis.eval_univariate("legendre", 0, 0.7) == 1.0

    def test_degree_one(self):
        val = polybasis.eval_univariate("legendre", 1, 0.5)
        assert val == pytest.approx(math.sqrt(3) * 0.5, abs=1e-15)

    def test_degree_two_at_zero(self):
        val = polybasis.eval_univariate("legendre", 2, 0.0)
        assert val == pytest.approx(-math.sqrt(5) / 2, abs=1e-15)

    def test_degree_overflow(self):
        with pytest.raises(DegreeOverflowError):
            polybasis.eval_univariate("legendre", 31, 0.0)

    def test_domain_violation(self):
        with pytest.raises(DomainViolationError):
            polybasis.eval_univariate("legendre", 2, 1.5)

    def test_hermite_low_degrees(self):
        # He_2(x)/sqrt(2) = (x^2 - 1)/sqrt(2)
        val = polybasis.eval_univariate("hermite", 2, 1.5)
        assert val == pytest.approx((1.5**2 - 1) / math.sqrt(2), abs=1e-14)

    def test_legendre_orthonormal_to_degree_10(self):
        x, w = leggauss(32)
        table = np.column_stack(
            [[polybasis.eval_univariate("legendre", d, xi) for xi in x]
             for d in range(11)])
        gram = (table * w[:, None]).T @ table / 2.0
        assert np.max(np.abs(gram - np.eye(11))) < 1e-10

    def test_hermite_orthonormal_to_degree_10(self):
        x, w = hermegauss(48)
        w = w / math.sqrt(2 * math.pi)
        table = np.column_stack(
            [[polybasis.eval_univariate("hermite", d, xi) for xi in x]
             for d in range(11)])
        gram = (table * w[:, None]).T @ table
        assert np.max(np.abs(gram - np.eye(11))) < 1e-10


class TestMultivariate:
    def setup_method(self):
        self.spec = polybasis.BasisSpec.legendre([(-1, 1), (-1, 1)])

    def test_zero_index_is_one(self):
        assert polybasis.eval_basis(self.spec, (0, 0), [0.3, -0.8]) == 1.0

    def test_reduces_to_univariate(self):
        val = polybasis.eval_basis(self.spec, (1, 0), [0.5, 0.9])
        assert val == pytest.approx(math.sqrt(3) * 0.5, abs=1e-14)

    def test_product_structure(self):
        val = polybasis.eval_basis(self.spec, (1, 1), [0.5, 0.5])
        assert val == pytest.approx(3 * 0.25, abs=1e-14)

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            polybasis.eval_basis(self.spec, (1, 0), [0.5])

    def test_tensor_orthonormality_to_degree_4(self):
        x, w = leggauss(16)
        indices = polybasis.total_degree_set(2, 4)
        xx, yy = np.meshgrid(x, x, indexing="ij")
        ww = np.outer(w, w).ravel() / 4.0
        pts = np.column_stack([xx.ravel(), yy.ravel()])
        psi = polybasis.basis_matrix(self.spec, indices, pts)
        gram = (psi * ww[:, None]).T @ psi
        assert np.max(np.abs(gram - np.eye(len(indices)))) < 1e-10

    def test_basis_matrix_matches_pointwise_eval(self):
        rng = np.random.default_rng(0)
        pts = rng.uniform(-1, 1, size=(7, 2))
        indices = polybasis.total_degree_set(2, 3)
        psi = polybasis.basis_matrix(self.spec, indices, pts)
        for i, p in enumerate(pts):
            for j, a in enumerate(indices):
                assert psi[i, j] == pytest.approx(
                    polybasis.eval_basis(self.spec, a, p), rel=1e-12)


class TestTotalDegreeSet:
    def test_one_dim(self):
        assert polybasis.total_degree_set(1, 2) == [(0,), (1,), (2,)]

    def test_graded_lex_two_dim(self):
        assert polybasis.total_degree_set(2, 1) == [(0, 0), (1, 0), (0, 1)]

    def test_cardinality_8_3(self):
        out = polybasis.total_degree_set(8, 3)
        assert len(out) == math.comb(11, 3)
        # exhaustive check of membership
        assert all(sum(a) <= 3 for a in out)
        assert len(set(out)) == len(out)

    def test_downward_closed(self):
        out = set(polybasis.total_degree_set(3, 4))
        for a in out:
            for i in range(3):
                if a[i] > 0:
                    lowered = a[:i] + (a[i] - 1,) + a[i + 1:]
                    assert lowered in out

    def test_cap(self):
        with pytest.raises(BasisTooLargeError):
            polybasis.total_degree_set(8, 10, cap=1000)

    @given(st.integers(1, 4), st.integers(0, 5))
    def test_cardinality_matches_binomial(self, dim, deg):
        out = polybasis.total_degree_set(dim, deg)
        assert len(out) == math.comb(dim + deg, deg)
        grades = [sum(a) for a in out]
        assert grades == sorted(grades)


class TestStandardize:
    def test_midpoint(self):
        spec = polybasis.BasisSpec.legendre([(0.5, 1.1)])
        assert polybasis.standardize(spec, [0.8])[0] == pytest.approx(0.0, abs=1e-15)

    def test_upper_bound(self):
        spec = polybasis.BasisSpec.legendre([(0.5, 1.1)])
        assert polybasis.standardize(spec, [1.1])[0] == 1.0

    def test_linear_map(self):
        spec = polybasis.BasisSpec.legendre([(1.0, 1.5)])
        assert polybasis.standardize(spec, [1.125])[0] == pytest.approx(-0.5, abs=1e-14)

    def test_out_of_bounds(self):
        spec = polybasis.BasisSpec.legendre([(0.5, 1.1)])
        with pytest.raises(DomainViolationError):
            polybasis.standardize(spec, [1.2])

    @settings(max_examples=50)
    @given(st.floats(0.0, 1.0), st.floats(-5, 5), st.floats(0.1, 7))
    def test_round_trip(self, frac, lo, width):
        spec = polybasis.BasisSpec.legendre([(lo, lo + width)])
        x = lo + frac * width
        u = polybasis.standardize(spec, [x])
        back = polybasis.unstandardize(spec, u)
        assert abs(back[0] - x) < 1e-14 * max(1.0, abs(x))
        assert -1.0 <= u[0] <= 1.0

    def test_hermite_passthrough(self):
        spec = polybasis.BasisSpec(families=("hermite", "legendre"),
                                   bounds=(None, (0.0, 2.0)))
        u = polybasis.standardize(spec, [1.7, 1.0])
        assert u[0] == 1.7 and u[1] == 0.0


class TestBasisSpec:
    def test_json_round_trip(self):
        spec = polybasis.BasisSpec(families=("legendre", "hermite"),
                                   bounds=((0.5, 1.5), None))
        same = polybasis.BasisSpec.from_dict(spec.to_dict())
        assert same == spec

    def test_legendre_needs_bounds(self):
        with pytest.raises(ValidationError):
            polybasis.BasisSpec(families=("legendre",), bounds=(None,))

    def test_hermite_rejects_bounds(self):
        with pytest.raises(ValidationError):
            polybasis.BasisSpec(families=("hermite",), bounds=((0, 1),))

    def test_degenerate_bounds(self):
        with pytest.raises(ValidationError):
            polybasis.BasisSpec.legendre([(1.0, 1.0)])
