"""End-to-end acceptance checks, one test per criterion.

Each test records PASS/FAIL and its wall time; the terminal summary prints
one line per criterion.
"""

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from quatwave.analysis import AnalysisOperator, analyze, analyze_direct, reconstruct
from quatwave.errors import InadmissibleError
from quatwave.fields import BoxSpec, QuaternionField, SampledField, bandlimited_field, random_field
from quatwave.framebounds import (
    ExplicitFrame,
    FrequencyBand,
    beta_sweep,
    dft_basis,
    empirical_bounds,
    frame_verdict,
    wave_packets,
)
from quatwave.grid import GridSpec2D, GridSpec4D, annulus_area
from quatwave.lifting import (
    expand,
    lift,
    lift_wavelet_frame,
    lifted_empirical_bounds,
    quaternion_modulus_matrix,
)
from quatwave.quaternion import matrix2_array, matrix4_array, qconj_array, qmul_array
from quatwave.wavelets import _integrand_radius, _weighted_sum
from quatwave.wavelets import Atom, atom_dft, duflo_moore_norm, gaussian, laplacian_of_gaussian, realize_atom

pytestmark = pytest.mark.acceptance

LOG2 = laplacian_of_gaussian(2)
LOG4 = laplacian_of_gaussian(4)
BOX2 = BoxSpec.cube(2, 12.8, 64)
GRID2 = GridSpec2D(0.5, 8, 1.0, 1.0, 4, 2)
BOX4 = BoxSpec.cube(4, 4.8, 16)
GRID4 = GridSpec4D(0.5, 0.5, 4, 4, (1.0, 1.0, 1.0, 1.0), 2, 2, 1)

# the validated 2D configuration: box of side 64 holds every translation |b| <= 32
BAND = FrequencyBand(0.4, 4.0)
VBOX = BoxSpec.cube(2, 64.0, 128)


def validated_grid(beta=1.0):
    return GridSpec2D(0.5, 8, beta, beta, 4, 10**6, b_max=32.0)


def validated_probes():
    return wave_packets(VBOX, BAND, 4.0, 6, 8)


def _rel(a, b):
    return np.max(np.abs(a - b)) / np.max(np.abs(b))


def test_criterion_1_quaternion_algebra(criterion):
    with criterion(1, 1.0) as notes:
        rng = np.random.default_rng(1)
        n = 10**4
        one, i, j, k = np.eye(4)
        assert np.allclose(qmul_array(i, j), k, atol=0) and np.allclose(qmul_array(j, k), i, atol=0)
        assert np.allclose(qmul_array(k, i), j, atol=0)
        assert np.allclose(qmul_array(j, i), -k, atol=0) and np.allclose(qmul_array(k, j), -i, atol=0)
        assert np.allclose(qmul_array(i, k), -j, atol=0)
        assert np.allclose(qmul_array(i, i), -one, atol=0)
        a = rng.standard_normal((n, 4))
        b = rng.standard_normal((n, 4))
        na = np.sum(a * a, axis=-1)
        nb = np.sum(b * b, axis=-1)
        M = matrix2_array(a)
        det_err = np.max(np.abs(np.linalg.det(M) - na) / (1 + na))
        gram = np.einsum("nji,njk->nik", np.conj(M), M)
        norm_err = np.max(np.abs(gram - na[:, None, None] * np.eye(2)) / (1 + na[:, None, None]))
        ab = qmul_array(a, b)
        hom_err = np.max(
            np.abs(matrix4_array(ab) - matrix4_array(a) @ matrix4_array(b)) / (1 + np.sqrt(na * nb))[:, None, None]
        )
        hom2_err = np.max(np.abs(matrix2_array(ab) - M @ matrix2_array(b)) / (1 + np.sqrt(na * nb))[:, None, None])
        conj_err = np.max(np.abs(qmul_array(a, qconj_array(a))[:, 0] - na) / (1 + na))
        notes.append(f"max errors det {det_err:.1e} norm {norm_err:.1e} hom {max(hom_err, hom2_err):.1e}")
        assert max(det_err, norm_err, hom_err, hom2_err, conj_err) <= 1e-12


def test_criterion_2_annulus_area(criterion):
    with criterion(2, 1.0) as notes:
        lam, L = 0.7, 8
        lo, hi = np.pi * lam**2 / L, 3 * np.pi * lam**2 / (2 * L)
        ts = np.unique(np.geomspace(1, 10**6, 400).astype(int))
        areas = np.array([annulus_area(int(t), lam, L) for t in ts])
        formula = np.pi * (2 * ts - 1) * lam**2 / (ts * L)
        exact = bool(np.all(areas == formula))
        lower = bool(np.all(areas >= lo)) and areas[0] == lo and bool(np.all(areas[1:] > lo))
        upper_viol = ts[areas >= hi]
        upper = upper_viol.size == 0
        limit_gap = abs(annulus_area(10**6, lam, L) - lo)
        limit = limit_gap <= 1e-6
        notes.append(f"formula exact: {exact}")
        notes.append(f"lower bracket (equality only at t=1): {lower}")
        notes.append(
            "strict upper bracket: "
            + ("holds" if upper else f"violated from t={int(upper_viol[0])} (ratio at t=1e6 {areas[-1] / hi:.6f})")
        )
        notes.append(f"limit |dA(1e6) - pi lam^2/L| = {limit_gap:.3e} (needs <= 1e-6)")
        assert exact and lower and upper and limit, " | ".join(notes)


def test_criterion_3_atom_spectrum_identity(criterion):
    with criterion(3, 60.0) as notes:
        rng = np.random.default_rng(3)
        worst = {}
        for name, psi, grid, box in (("2d", LOG2, GRID2, BOX2), ("4d", LOG4, GRID4, BOX4)):
            pick = rng.choice(grid.size, 24, replace=False)
            cell_of = np.searchsorted(grid.offsets(), pick, side="right") - 1
            errs = []
            for p, c in zip(pick, cell_of):
                b = grid.lattices[c][1][p - grid.offsets()[c]]
                atom = Atom(psi, grid.cells[c].matrix, b)
                errs.append(_rel(realize_atom(atom, box).spectrum, atom_dft(atom, box)))
            worst[name] = max(errs)
        notes.append(f"24 points each, worst relative error 2d {worst['2d']:.1e}, 4d {worst['4d']:.1e}")
        assert max(worst.values()) <= 1e-8


def test_criterion_4_fast_equals_slow(criterion):
    with criterion(4, 120.0) as notes:
        rng = np.random.default_rng(4)
        worst = {}
        for name, psi, grid, box, m in (("2d", LOG2, GRID2, BOX2, 40), ("4d", LOG4, GRID4, BOX4, 20)):
            f = random_field(box, rng)
            idx = np.sort(rng.choice(grid.size, m, replace=False))
            fast = analyze(f, psi, grid).values[idx]
            slow = analyze_direct(f, psi, grid, indices=idx)
            worst[name] = _rel(fast, slow)
        notes.append(f"relative error 2d {worst['2d']:.1e}, 4d {worst['4d']:.1e}")
        assert max(worst.values()) <= 1e-8


def test_criterion_5_frame_sandwich_and_sweep(criterion):
    with criterion(5, 300.0) as notes:
        betas = [0.5, 1.0, 2.0, 4.0, 8.0]
        rows = beta_sweep(LOG2, validated_grid(), BAND, betas, VBOX, validated_probes(), eps=1e-10)
        tol = 1e-6
        for r in rows:
            notes.append(
                f"beta {r['beta']:g}: Acand {r['A_candidate']:.4g} Aemp {r['A_emp']:.4g} "
                f"Bemp {r['B_emp']:.4g} Bcand {r['B_candidate']:.4g}"
            )
        certified = [r for r in rows if r["A_candidate"] > 0]
        assert certified and certified[0]["beta"] == 0.5, "no positive candidate bound at small beta"
        for r in certified:
            assert r["A_candidate"] <= r["A_emp"] * (1 + tol)
            assert r["A_emp"] <= r["B_emp"] * (1 + tol)
            assert r["B_emp"] <= r["B_candidate"] * (1 + tol)
        a_emp = [r["A_emp"] for r in rows]
        assert all(x > y for x, y in zip(a_emp, a_emp[1:])), "A_emp does not decay along the sweep"
        last = rows[-1]
        assert last["A_candidate"] < 0 and last["A_emp"] <= 1e-3 * last["B_emp"]
        notes.append(f"A_emp/B_emp at beta 8: {last['A_emp'] / last['B_emp']:.1e}")


def test_criterion_6_reconstruction(criterion):
    with criterion(6, 120.0) as notes:
        grid = validated_grid()
        f = bandlimited_field(VBOX, BAND.k_min, BAND.k_max, np.random.default_rng(6))
        op = AnalysisOperator(LOG2, grid, VBOX, eps=1e-11)
        rec = reconstruct(analyze(f, LOG2, grid, operator=op), LOG2, VBOX, iters=200, tol=1e-6, operator=op)
        err = np.sqrt((rec.field - f).norm2() / f.norm2())
        notes.append(f"{rec.iterations} iterations, relative L2 error {err:.2e}")
        assert rec.iterations <= 200 and err <= 1e-3


def test_criterion_7_lifting(criterion):
    with criterion(7, 60.0) as notes:
        rng = np.random.default_rng(7)
        box = BoxSpec.cube(2, 4.0, 8)
        basis = [SampledField(box, s, domain="frequency").to_space() for s in dft_basis(box)]
        # equal projections of the two lifts of a partial orthonormal system
        diff = 0.0
        for _ in range(5):
            F = QuaternionField(random_field(box, rng), random_field(box, rng))
            a = expand(F, lift(basis[:23], "diagonal")).reconstruction
            b = expand(F, lift(basis[:23], "mixed")).reconstruction
            diff = max(diff, np.sqrt((a - b).norm2() / F.norm2()))
        notes.append(f"projection difference {diff:.1e}")
        # modulus matrix diagonal for a random (non-orthogonal) system
        phis = [random_field(box, rng) for _ in range(9)]
        off = 0.0
        for mode in ("diagonal", "mixed"):
            for _ in range(5):
                F = QuaternionField(random_field(box, rng), random_field(box, rng))
                M = quaternion_modulus_matrix(*lift(phis, mode).coefficient_pairs(F))
                off = max(off, abs(M[0, 1]) / abs(M[0, 0]), abs(M[1, 0]) / abs(M[0, 0]))
        notes.append(f"off-diagonal {off:.1e}")
        # bound preservation: orthonormal fixture
        probes = np.stack([random_field(box, rng).spectrum for _ in range(12)])
        onb = ExplicitFrame(basis)
        plain = empirical_bounds(None, None, probes, box, operator=onb)
        lifted = lifted_empirical_bounds(lift(basis), probes)
        onb_gap = max(abs(lifted.A_emp - plain.A_emp) / plain.A_emp, abs(lifted.B_emp - plain.B_emp) / plain.B_emp)
        onb_unit = max(abs(plain.A_emp - 1), abs(plain.B_emp - 1))
        # bound preservation: the validated wavelet frame
        grid = validated_grid()
        packets = wave_packets(VBOX, BAND, 4.0, 3, 4)
        report = frame_verdict(LOG2, grid, BAND, VBOX, packets, eps=1e-10)
        system = lift_wavelet_frame(LOG2, grid, VBOX, report, eps=1e-10)
        w_lift = lifted_empirical_bounds(system, packets)
        w_gap = max(
            abs(w_lift.A_emp - report.A_emp) / report.A_emp, abs(w_lift.B_emp - report.B_emp) / report.B_emp
        )
        notes.append(f"bounds gap orthonormal {onb_gap:.1e} (|A-1|,|B-1| {onb_unit:.1e}), wavelet {w_gap:.1e}")
        # completeness of the lifted DFT basis
        res = 0.0
        for mode in ("diagonal", "mixed"):
            F = QuaternionField(random_field(box, rng), random_field(box, rng))
            res = max(res, expand(F, lift(basis, mode)).relative_residual)
        notes.append(f"complete-basis residual {res:.1e}")
        assert diff <= 1e-10 and off <= 1e-12
        assert onb_gap <= 1e-6 and onb_unit <= 1e-6 and w_gap <= 1e-6
        assert res <= 1e-10


FOUR_D = {
    "mode": "4d",
    "box": {"side_length": 4.8, "samples": 16},
    "grid": {"t_max": 2, "j_max": 2, "L1": 4, "L2": 4, "m_range": 1, "betas": [1.0, 1.0, 1.0, 1.0]},
    "bounds": {"n_radii": 16, "n_dirs": 128, "probes": {"kind": "dft", "count": 24}, "lift_probes": 2},
}


@pytest.mark.slow
def test_criterion_8_4d_end_to_end(criterion, tmp_path):
    with criterion(8, 600.0) as notes:
        cfg = tmp_path / "four_d.json"
        cfg.write_text(json.dumps(FOUR_D))
        outs = []
        for run in ("a", "b"):
            out = tmp_path / run
            cmd = [sys.executable, "-m", "quatwave.cli", "report", "--config", str(cfg), "--out", str(out)]
            proc = subprocess.run(cmd, capture_output=True, text=True)
            assert proc.returncode == 0, proc.stderr
            outs.append(out)
        names = ["grid.csv", "area_report.json", "coefficients.csv", "frame_report.json", "lifted_report.json"]
        same = {n: (outs[0] / n).read_bytes() == (outs[1] / n).read_bytes() for n in names}
        rep = json.loads((outs[0] / "frame_report.json").read_text())
        lifted = json.loads((outs[0] / "lifted_report.json").read_text())
        notes.append(
            f"verdict {rep['verdict']}, A_cand {rep['A_candidate']:.4g}, "
            f"{rep['details']['grid_points']} points, identical outputs {all(same.values())}"
        )
        assert rep["verdict"] == "frame" and all(same.values())
        assert lifted["max_offdiag"] <= 1e-12


def test_criterion_9_duflo_moore(criterion):
    with criterion(9, 10.0) as notes:
        value = duflo_moore_norm(LOG2)
        # the Riemann sum under three successive halvings of the spacing
        k_max = _integrand_radius(LOG2)
        sums = [_weighted_sum(LOG2, k_max, k_max / 24 / 2**h) for h in range(3)]
        drift = max(abs(a - b) / abs(b) for a, b in zip(sums, sums[1:]))
        notes.append(f"LoG {value:.6g} (4 pi^3 = {4 * np.pi**3:.6g}), refinement drift {drift:.1e}")
        assert np.isfinite(value) and drift <= 1e-2 and abs(value - sums[-1]) <= 1e-2 * value
        with pytest.raises(InadmissibleError, match="nonvanishing DC"):
            duflo_moore_norm(gaussian(2))
        notes.append("Gaussian rejected: nonvanishing DC")
