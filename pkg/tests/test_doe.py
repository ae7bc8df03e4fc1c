import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uqpipe import doe
from uqpipe.errors import DegenerateBoundsError, ValidationError


class TestLhs:
    def test_stratification_small(self):
        pts = doe.lhs(4, 1, 0)
        strata = sorted(int(v) for v in np.floor(4 * pts[:, 0]))
        assert strata == [0, 1, 2, 3]

    @settings(max_examples=25)
    @given(st.integers(1, 64), st.integers(1, 6), st.integers(0, 10**6))
    def test_stratification(self, n, dim, seed):
        pts = doe.lhs(n, dim, seed)
        assert pts.shape == (n, dim)
        for j in range(dim):
            strata = sorted(np.floor(n * pts[:, j]).astype(int))
            assert strata == list(range(n))

    def test_determinism(self):
        a = doe.lhs(100, 8, 1234)
        b = doe.lhs(100, 8, 1234)
        assert a.tobytes() == b.tobytes()

    def test_seed_changes_output(self):
        assert not np.array_equal(doe.lhs(16, 2, 1), doe.lhs(16, 2, 2))

    def test_bad_args(self):
        with pytest.raises(ValidationError):
            doe.lhs(0, 1, 0)


class TestScale:
    def test_identity_on_unit_box(self):
        unit = doe.lhs(10, 3, 5)
        design = doe.scale([(0, 1)] * 3, unit)
        assert np.array_equal(design.points, unit)

    def test_midpoint(self):
        design = doe.scale([(0.5, 1.1)], np.array([[0.5]]))
        assert design.points[0, 0] == pytest.approx(0.8)

    def test_lower_corner_matches_parameter_table(self):
        from uqpipe.simulators import PARAMETER_BOUNDS

        design = doe.scale(PARAMETER_BOUNDS, np.zeros((1, 8)))
        expected = [0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 1.0]
        assert np.allclose(design.points[0], expected)

    def test_degenerate_bounds(self):
        with pytest.raises(DegenerateBoundsError):
            doe.scale([(1.0, 1.0)], np.array([[0.5]]))


class TestChunkedDesign:
    def test_two_chunks(self):
        bounds = [(0.0, 1.0)] * 8
        design = doe.chunked_design(bounds, [1024, 1024], 99)
        assert design.size == 2048
        assert design.chunk_sizes == (1024, 1024)
        # each chunk is itself a Latin hypercube
        for block in (design.points[:1024], design.points[1024:]):
            for j in range(8):
                strata = sorted(np.floor(1024 * block[:, j]).astype(int))
                assert strata == list(range(1024))

    def test_points_inside_box(self):
        from uqpipe.simulators import PARAMETER_BOUNDS

        design = doe.chunked_design(PARAMETER_BOUNDS, [32, 32], 7)
        for j, (lo, hi) in enumerate(PARAMETER_BOUNDS):
            assert design.points[:, j].min() >= lo
            assert design.points[:, j].max() <= hi

    def test_determinism(self):
        bounds = [(0.0, 2.0)] * 3
        a = doe.chunked_design(bounds, [16, 16], 3)
        b = doe.chunked_design(bounds, [16, 16], 3)
        assert a.points.tobytes() == b.points.tobytes()
