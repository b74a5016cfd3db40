import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quatwave.analysis import AnalysisOperator
from quatwave.errors import DomainError, ShapeError, VerdictError
from quatwave.fields import BoxSpec, QuaternionField, SampledField, inner, qinner, random_field
from quatwave.framebounds import FrameReport, dft_basis
from quatwave.grid import GridSpec2D
from quatwave.lifting import (
    LiftedSystem,
    as_quaternions,
    conjugate_system,
    expand,
    lift,
    lift_wavelet_frame,
    lifted_empirical_bounds,
    quaternion_modulus_matrix,
    read_lifted_coefficients_csv,
    verify_frame_preservation,
    write_lifted_coefficients_csv,
)
from quatwave.wavelets import laplacian_of_gaussian

BOX = BoxSpec.cube(2, 4.0, 8)
BASIS = [SampledField(BOX, s, domain="frequency").to_space() for s in dft_basis(BOX)]


def _qfield(seed):
    rng = np.random.default_rng(seed)
    return QuaternionField(random_field(BOX, rng), random_field(BOX, rng))


def _random_system(n, seed):
    rng = np.random.default_rng(seed)
    return [random_field(BOX, rng) for _ in range(n)]


def test_conjugate_system_gram():
    phis = _random_system(5, 0)
    conj = conjugate_system(phis)
    G = np.array([[inner(a, b) for b in phis] for a in phis])
    Gc = np.array([[inner(a, b) for b in conj] for a in conj])
    assert np.allclose(Gc, np.conj(G), rtol=1e-13)


@pytest.mark.parametrize("mode", ["diagonal", "mixed"])
def test_coefficients_are_quaternion_inner_products(mode):
    phis = _random_system(6, 1)
    sys_ = lift(phis, mode)
    F = _qfield(2)
    q = sys_.coefficients(F)
    for n, M in enumerate(sys_.members()):
        assert np.allclose(q[n], qinner(M, F).to_array(), rtol=1e-12, atol=1e-12 * np.abs(q).max())


@pytest.mark.parametrize("mode", ["diagonal", "mixed"])
def test_partial_expansion_is_projection(mode):
    # the first 20 basis members: partial sum projects f1 and conj f2 on their span
    sys_ = lift(BASIS[:20], mode)
    F = _qfield(3)
    R = expand(F, sys_).reconstruction
    P = np.stack([b.samples.ravel() for b in BASIS[:20]])
    V = BOX.cell_volume

    def proj(x):
        return (V * (np.conj(P) @ x.ravel())) @ P

    assert np.allclose(R.f1.samples.ravel(), proj(F.f1.samples), atol=1e-10)
    assert np.allclose(np.conj(R.f2.samples.ravel()), proj(np.conj(F.f2.samples)), atol=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from(["diagonal", "mixed"]))
def test_lifted_frame_sum_is_diagonal(seed, mode):
    sys_ = lift(_random_system(7, seed), mode)
    z1, z2 = sys_.coefficient_pairs(_qfield(seed + 1))
    M = quaternion_modulus_matrix(z1, z2)
    assert abs(M[0, 1]) <= 1e-12 * abs(M[0, 0]) and abs(M[1, 0]) <= 1e-12 * abs(M[0, 0])
    assert M[0, 0] == pytest.approx(M[1, 1], rel=1e-12)
    assert M[0, 0].real == pytest.approx(np.sum(np.abs(z1) ** 2 + np.abs(z2) ** 2), rel=1e-12)


@pytest.mark.parametrize("mode", ["diagonal", "mixed"])
def test_complete_basis_expansion_and_parseval(mode):
    sys_ = lift(BASIS, mode)
    F = _qfield(4)
    ex = expand(F, sys_)
    assert ex.relative_residual < 1e-10
    assert np.sum(ex.coefficients**2) == pytest.approx(F.norm2(), rel=1e-10)


def test_single_member_expansion():
    sys_ = lift(BASIS)
    F = sys_.member(5)
    ex = expand(F, sys_)
    target = np.zeros((len(BASIS), 4))
    target[5, 0] = 1.0
    assert np.allclose(ex.coefficients, target, atol=1e-12)
    assert ex.residual < 1e-12


def test_preservation_orthonormal_and_duplicated():
    probes = [_qfield(s) for s in range(5)]
    rep = verify_frame_preservation(BASIS, 1.0, 1.0, probes)
    assert rep.ok and np.allclose(rep.ratios, 1.0, atol=1e-12)
    rep = verify_frame_preservation(lift(BASIS + BASIS, "mixed"), 2.0, 2.0, probes)
    assert rep.ok and np.allclose(rep.ratios, 2.0, atol=1e-12)
    bad = verify_frame_preservation(BASIS[:-1], 1.0, 1.0, probes)
    assert not bad.ok and bad.worst_lower_margin < 0


def test_complex_fields_reduce_to_complex_frame_sum():
    phis = _random_system(6, 5)
    f = random_field(BOX, np.random.default_rng(6))
    z1, z2 = lift(phis).coefficient_pairs(QuaternionField.from_complex(f))
    assert np.allclose(z2, 0)
    assert np.allclose(z1, [inner(p, f) for p in phis], rtol=1e-12)


def test_zero_probe_and_empty_system():
    zero = QuaternionField(SampledField.zeros(BOX), SampledField.zeros(BOX))
    with pytest.raises(DomainError):
        verify_frame_preservation(BASIS, 1.0, 1.0, [zero])
    with pytest.raises(DomainError):
        lift([])
    with pytest.raises(DomainError):
        lift(BASIS, "twisted")
    with pytest.raises(ShapeError):
        lift(BASIS).coefficient_pairs(QuaternionField.from_complex(SampledField.zeros(BoxSpec.cube(2, 4.0, 16))))


def test_refuses_uncertified_frame():
    psi = laplacian_of_gaussian(2)
    grid = GridSpec2D(0.5, 8, 1.0, 1.0, 2, 1)
    rep = FrameReport(1, 2, 3, 1, -2, 5, None, None, "inconclusive", True)
    with pytest.raises(VerdictError, match="not certified"):
        lift_wavelet_frame(psi, grid, BOX, rep)
    with pytest.raises(VerdictError):
        lift_wavelet_frame(psi, grid, BOX, None)


@pytest.fixture(scope="module")
def wavelet_pair():
    box = BoxSpec.cube(2, 6.4, 16)
    op = AnalysisOperator(laplacian_of_gaussian(2), GridSpec2D(0.5, 4, 1.0, 1.0, 2, 1), box)
    via_op = LiftedSystem(operator=op, mode="mixed")
    explicit = lift([via_op._source_field(n) for n in range(len(via_op))], "mixed")
    return box, via_op, explicit


def test_operator_path_matches_explicit(wavelet_pair):
    box, via_op, explicit = wavelet_pair
    rng = np.random.default_rng(7)
    F = QuaternionField(random_field(box, rng), random_field(box, rng))
    assert np.allclose(via_op.coefficients(F), explicit.coefficients(F), rtol=1e-10, atol=1e-12)
    z1, z2 = explicit.coefficient_pairs(F)
    a, b = via_op.synthesize(z1, z2), explicit.synthesize(z1, z2)
    assert np.sqrt((a - b).norm2()) < 1e-10 * np.sqrt(b.norm2())
    Fs = [F, QuaternionField(random_field(box, rng), random_field(box, rng))]
    assert np.allclose(via_op.lifted_gram(Fs), explicit.lifted_gram(Fs), rtol=1e-10)


def test_lifted_bounds_equal_complex_bounds(wavelet_pair):
    box, via_op, _ = wavelet_pair
    from quatwave.framebounds import empirical_bounds

    probes = dft_basis(box)[:12]
    lifted = lifted_empirical_bounds(via_op, probes)
    plain = empirical_bounds(None, None, probes, box, operator=via_op.operator)
    assert lifted.ritz_min == pytest.approx(plain.ritz_min, rel=1e-9)
    assert lifted.ritz_max == pytest.approx(plain.ritz_max, rel=1e-9)
    assert lifted.rank == 2 * plain.rank


def test_lifted_csv_roundtrip(tmp_path, wavelet_pair):
    box, via_op, explicit = wavelet_pair
    rng = np.random.default_rng(8)
    q = via_op.coefficients(QuaternionField(random_field(box, rng), random_field(box, rng)))
    write_lifted_coefficients_csv(tmp_path / "q.csv", via_op, q, header="x")
    idx, back = read_lifted_coefficients_csv(tmp_path / "q.csv")
    assert np.array_equal(back, q) and np.array_equal(idx, via_op.operator.grid.index_table())
    write_lifted_coefficients_csv(tmp_path / "e.csv", explicit, q)
    idx, back = read_lifted_coefficients_csv(tmp_path / "e.csv")
    assert idx.shape == (len(q), 1) and np.array_equal(back, q)
    assert as_quaternions(q[:1])[0].to_array().tolist() == q[0].tolist()
