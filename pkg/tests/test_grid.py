import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from quatwave.errors import DomainError
from quatwave.grid import (
    GridSpec2D,
    GridSpec4D,
    _product_count,
    annulus_area,
    area_bound,
    enumerate_grid_2d,
    enumerate_grid_4d,
    validate_area_bound,
)


def test_annulus_area_values():
    assert annulus_area(1, 0.5, 10) == pytest.approx(0.0785398, abs=1e-7)
    assert annulus_area(2, 0.5, 10) == pytest.approx(0.1178097, abs=1e-7)


def test_annulus_area_is_ring_area_over_cell_count():
    lam, L = 0.3, 7
    for t in range(1, 20):
        ring = np.pi * ((t * lam) ** 2 - ((t - 1) * lam) ** 2)
        assert annulus_area(t, lam, L) == pytest.approx(ring / (t * L), rel=1e-14)


@given(st.integers(1, 10**6), st.floats(1e-3, 0.999), st.integers(2, 500))
def test_annulus_area_profile(t, lam, L):
    a = annulus_area(t, lam, L)
    base = np.pi * lam**2 / L
    assert a >= base * (1 - 1e-15)
    # the exact formula increases towards 2 pi lam^2 / L
    assert a < 2 * base
    assert annulus_area(t + 1, lam, L) > a


def test_annulus_area_rejects_bad_input():
    for args in [(0, 0.5, 10), (1, 0.0, 10), (1, 0.5, 1), (1.5, 0.5, 10)]:
        with pytest.raises(DomainError):
            annulus_area(*args)


def test_validate_area_bound_examples():
    assert validate_area_bound((0.1, 100), 0.01).ok
    assert not validate_area_bound((1 - 1e-9, 2), 1e-6).ok
    eta = area_bound(0.4, 6)
    assert not validate_area_bound((0.4, 6), eta).ok


def test_area_report_worst_ring():
    spec = GridSpec2D(0.5, 8, 1.0, 1.0, 5)
    rep = validate_area_bound(spec, 1.0)
    assert rep.worst_t == 5
    assert rep.worst_area == pytest.approx(annulus_area(5, 0.5, 8))
    assert rep.supremum == pytest.approx(2 * np.pi * 0.25 / 8)


def test_area_report_4d_pair():
    spec = GridSpec4D(0.5, 0.25, 4, 6, 1.0, 2, 3)
    r1, r2 = validate_area_bound(spec, (0.5, 0.01))
    assert r1.ok and not r2.ok
    assert r2.worst_t == 3


def test_2d_counts():
    spec = GridSpec2D(0.5, 2, 1.0, 1.0, 3, 0)
    pts = list(enumerate_grid_2d(spec))
    assert len(pts) == 12
    assert [sum(p.t == t for p in pts) for t in (1, 2, 3)] == [2, 4, 6]
    spec = GridSpec2D(0.5, 8, 1.0, 1.0, 4, 2)
    assert spec.size == _product_count(spec) == 8 * 10 * 25


def test_2d_angles_and_translation():
    spec = GridSpec2D(0.5, 3, 1.0, 2.0, 3, 1)
    for p in enumerate_grid_2d(spec):
        assert p.theta == pytest.approx(2 * np.pi * p.l / (p.t * 3))
        assert p.a == pytest.approx(p.t * 0.5)
        b = p.matrix @ np.array([p.m0 * 1.0, p.m1 * 2.0])
        assert np.allclose(p.b, b)
    p = next(q for q in enumerate_grid_2d(GridSpec2D(0.5, 3, 1.0, 1.0, 1, 1)) if (q.l, q.m0, q.m1) == (0, 1, 0))
    assert p.b == pytest.approx((0.5, 0.0))


def test_2d_order_is_lexicographic_and_deterministic():
    spec = GridSpec2D(0.5, 3, 1.0, 1.0, 2, 1)
    idx = [(p.t, p.l, p.m0, p.m1) for p in enumerate_grid_2d(spec)]
    assert idx == sorted(idx)
    assert idx == [(p.t, p.l, p.m0, p.m1) for p in enumerate_grid_2d(spec)]
    assert np.array_equal(spec.index_table(), np.array(idx))


def test_growing_rule():
    spec = GridSpec2D(0.5, 3, 1.0, 1.0, 3, 0, scale_rule="growing")
    assert [spec.dilation(t) for t in (1, 2, 3)] == [0.5, 2.0, 4.5]


def test_b_max_filter():
    full = GridSpec2D(0.5, 4, 1.0, 1.0, 2, 30)
    cut = GridSpec2D(0.5, 4, 1.0, 1.0, 2, 30, b_max=3.0)
    b_full = full.translations()
    keep = np.max(np.abs(b_full), axis=1) <= 3.0 * (1 + 1e-12)
    assert cut.size == int(keep.sum())
    assert np.allclose(np.sort(cut.translations(), axis=0), np.sort(b_full[keep], axis=0))


def test_4d_counts_and_matrices():
    spec = GridSpec4D(0.5, 0.5, 2, 2, 1.0, 1, 1, 0)
    pts = list(enumerate_grid_4d(spec))
    assert len(pts) == 4
    spec = GridSpec4D(0.5, 0.5, 4, 4, 1.0, 2, 2, 1)
    assert spec.size == _product_count(spec) == 11664
    for cell in spec.cells[::7]:
        A = cell.matrix
        lam1, _, lam2, _ = cell.params
        assert np.allclose(A.T @ A, (lam1**2 + lam2**2) * np.eye(4), atol=1e-12)


def test_4d_translations_follow_cell_matrix():
    spec = GridSpec4D(0.5, 0.3, 2, 3, (1.0, 0.5, 2.0, 1.5), 2, 1, 1)
    for p in list(enumerate_grid_4d(spec))[::37]:
        b = p.matrix @ (np.array(p.m) * np.array(spec.betas))
        assert np.allclose(p.b, b)


def test_degenerate_second_dilation_decouples():
    from quatwave.quaternion import similitude_array

    A = similitude_array(0.7, 0.4, 0.0, 1.1)
    assert np.allclose(A[:2, 2:], 0) and np.allclose(A[2:, :2], 0)


def test_spec_validation():
    with pytest.raises(DomainError):
        GridSpec2D(1.5, 8, 1.0, 1.0, 2)
    with pytest.raises(DomainError):
        GridSpec2D(0.5, 1, 1.0, 1.0, 2)
    with pytest.raises(DomainError):
        GridSpec2D(0.5, 8, -1.0, 1.0, 2)
    with pytest.raises(DomainError):
        GridSpec4D(0.5, 0.5, 4, 4, 1.0, 0, 1)
