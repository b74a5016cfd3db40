"""Command-line front end: config-driven grids, analyses, frame studies and lifts.

Every command reads a nested JSON config (``--config``) merged over the
built-in defaults, applies ``--set dotted.key=value`` overrides and writes
its outputs to ``--out``. Each output embeds the SHA-256 of the resolved
config; identical configs give byte-identical files.

Exit codes: 0 success, 2 invalid configuration or input, 3 numerical
verdict failure (for instance ``not-frame`` when ``require_frame`` is set).
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import _nufft
from .analysis import (
    AnalysisOperator,
    CoefficientSet,
    index_names,
    reconstruct,
    write_coefficients_binary,
    write_coefficients_csv,
)
from .errors import DomainError, ShapeError, StagnationError, UnsupportedSizeError, VerdictError
from .fields import (
    BoxSpec,
    QuaternionField,
    SampledField,
    bandlimited_field,
    random_field,
    read_field,
    read_field_csv,
)
from .framebounds import FrequencyBand, beta_sweep, dft_basis, frame_verdict, wave_packets
from .grid import GridSpec2D, GridSpec4D, validate_area_bound
from .lifting import (
    expand,
    lift,
    lift_wavelet_frame,
    verify_frame_preservation,
    write_lifted_coefficients_csv,
)
from .wavelets import NORMALIZATIONS, by_name

EXIT_OK, EXIT_INVALID, EXIT_VERDICT = 0, 2, 3

DEFAULTS = {
    "mode": "2d",
    "seed": 0,
    "box": {"side_length": 12.8, "samples": 64},
    "wavelet": {"name": "log", "params": {}},
    "grid": {
        "lambda0": 0.5,
        "L": 8,
        "beta0": 1.0,
        "beta1": 1.0,
        "t_max": 4,
        "m_range": 2,
        "scale_rule": "fixed",
        "b_max": None,
        "lambda01": 0.5,
        "lambda02": 0.5,
        "L1": 4,
        "L2": 4,
        "betas": [1.0, 1.0, 1.0, 1.0],
        "j_max": 2,
    },
    "normalization": "L2",
    "evaluation": "exact",
    "eps": 1e-11,
    "area": {"eta": 0.5},
    "input": {"field": None},
    "bounds": {
        "band": [0.4, 4.0],
        "n_radii": 48,
        "n_dirs": None,
        "rtol": 5e-3,
        "summand": "sqrt",
        "probes": {"kind": "packets", "sigma": 4.0, "n_radii": 6, "n_dirs": 8, "count": 24},
        "require_frame": False,
        "lift_probes": 4,
    },
    "sweep": {"betas": [0.5, 1.0, 2.0, 4.0, 8.0]},
    "reconstruct": {"iters": 200, "tol": 1e-8},
    "lift": {"side_length": 3.0, "samples": 8, "partial": [1, 8, 32]},
}


class ConfigError(ValueError):
    pass


# -- configuration ------------------------------------------------------------------


def _merge(base: dict, extra: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in extra.items():
        here = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {here!r}")
        if isinstance(base[key], dict) and key not in ("params",):
            if not isinstance(val, dict):
                raise ConfigError(f"config key {here!r} must be an object")
            out[key] = _merge(base[key], val, here + ".")
        else:
            out[key] = copy.deepcopy(val)
    return out


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(cfg: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not of the form key=value")
    key, text = assignment.split("=", 1)
    parts = key.strip().split(".")
    node = cfg
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            raise ConfigError(f"unknown config key {key!r}")
        node = node[p]
    if parts[-1] not in node and not (len(parts) >= 2 and parts[-2] == "params"):
        raise ConfigError(f"unknown config key {key!r}")
    node[parts[-1]] = _parse_value(text)


def load_config(path=None, overrides=(), seed=None) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if path:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config must be a JSON object")
        cfg = _merge(cfg, user)
    for o in overrides:
        apply_override(cfg, o)
    if seed is not None:
        cfg["seed"] = int(seed)
    if cfg["mode"] not in ("2d", "4d"):
        raise ConfigError("mode must be '2d' or '4d'")
    return cfg


def config_hash(cfg: dict) -> str:
    text = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


class Experiment:
    """Objects built from a resolved config."""

    def __init__(self, cfg: dict):
        self.cfg = cfg
        self.hash = config_hash(cfg)
        self.dim = 2 if cfg["mode"] == "2d" else 4
        b = cfg["box"]
        self.box = BoxSpec(self.dim, b["side_length"], b["samples"])
        w = cfg["wavelet"]
        self.psi = by_name(w["name"], self.dim, **w["params"])
        g = cfg["grid"]
        if self.dim == 2:
            self.grid = GridSpec2D(
                g["lambda0"], g["L"], g["beta0"], g["beta1"], g["t_max"], g["m_range"],
                g["scale_rule"], g["b_max"],
            )
        else:
            self.grid = GridSpec4D(
                g["lambda01"], g["lambda02"], g["L1"], g["L2"], tuple(g["betas"]), g["t_max"],
                g["j_max"], g["m_range"], g["scale_rule"], g["b_max"],
            )
        self.normalization = cfg["normalization"]
        if self.normalization not in NORMALIZATIONS:
            raise ConfigError(f"normalization must be one of {NORMALIZATIONS}")
        if cfg["evaluation"] not in ("exact", "nearest"):
            raise ConfigError("evaluation must be 'exact' or 'nearest'")
        self.band = FrequencyBand(*cfg["bounds"]["band"])

    def rng(self, stream: int = 0) -> np.random.Generator:
        return np.random.default_rng([int(self.cfg["seed"]), stream])

    def operator(self, grid=None) -> AnalysisOperator:
        return AnalysisOperator(
            self.psi, grid or self.grid, self.box, self.normalization, self.cfg["evaluation"], self.cfg["eps"]
        )

    def input_field(self) -> SampledField:
        path = self.cfg["input"]["field"]
        if path is None:
            return bandlimited_field(self.box, self.band.k_min, self.band.k_max, self.rng(1))
        f = read_field_csv(path) if str(path).endswith(".csv") else read_field(path)
        if f.box != self.box:
            raise ShapeError("input field box differs from the configured box")
        return f

    def probes(self):
        p = self.cfg["bounds"]["probes"]
        if p["kind"] == "packets":
            return wave_packets(self.box, self.band, p["sigma"], p["n_radii"], p["n_dirs"], seed=int(self.cfg["seed"]))
        if p["kind"] == "dft":
            basis = dft_basis(self.box, self.band)
            if len(basis) == 0:
                raise DomainError("no DFT modes inside the band")
            count = min(int(p["count"]), len(basis))
            pick = np.sort(self.rng(2).choice(len(basis), count, replace=False))
            return basis[pick]
        raise ConfigError(f"unknown probe kind {p['kind']!r}")


# -- output helpers -------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, hash_: str, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_sha256={hash_}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return v


def _write_json(path: Path, hash_: str, payload: dict) -> None:
    data = {"config_sha256": hash_, **_jsonable(payload)}
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- commands -------------------------------------------------------------------------


def run_grid(exp: Experiment, out: Path) -> int:
    """Grid table and the annulus-area report."""
    grid = exp.grid
    cols = index_names(exp.dim)
    if exp.dim == 2:
        cols += ["a", "theta", "b0", "b1"]
    else:
        cols += ["lambda1", "theta1", "lambda2", "theta2", "b0", "b1", "b2", "b3"]

    def rows():
        for cell, (m, b) in zip(grid.cells, grid.lattices):
            for mi, bi in zip(m, b):
                yield [*cell.index, *mi, *cell.params, *bi]

    _write_csv(out / "grid.csv", exp.hash, cols, rows())
    eta = exp.cfg["area"]["eta"]
    rep = validate_area_bound(grid, eta)
    reps = rep if isinstance(rep, tuple) else (rep,)
    _write_json(
        out / "area_report.json",
        exp.hash,
        {"ok": all(r.ok for r in reps), "families": [r.as_dict() for r in reps], "grid": grid.as_dict(),
         "points": grid.size},
    )
    return EXIT_OK


def run_analyze(exp: Experiment, out: Path) -> int:
    f = exp.input_field()
    op = exp.operator()
    coeffs = CoefficientSet(exp.grid, op.forward(f.spectrum)[0], exp.normalization)
    write_coefficients_csv(out / "coefficients.csv", coeffs, header=f"config_sha256={exp.hash}")
    write_coefficients_binary(out / "coefficients.bin", coeffs)
    _write_json(
        out / "analysis_summary.json",
        exp.hash,
        {"points": len(coeffs), "energy": coeffs.energy(), "field_norm2": f.norm2()},
    )
    return EXIT_OK


def _frame_report(exp: Experiment, grid=None):
    b = exp.cfg["bounds"]
    return frame_verdict(
        exp.psi, grid or exp.grid, exp.band, exp.box, exp.probes(), exp.normalization, b["summand"],
        b["n_radii"], b["n_dirs"], b["rtol"], eps=exp.cfg["eps"], seed=int(exp.cfg["seed"]),
    )


def _lift_report(exp: Experiment, report) -> dict:
    system = lift_wavelet_frame(exp.psi, exp.grid, exp.box, report, exp.normalization, eps=exp.cfg["eps"])
    rng = exp.rng(3)
    n = int(exp.cfg["bounds"]["lift_probes"])
    k = exp.band
    F = [
        QuaternionField(
            bandlimited_field(exp.box, k.k_min, k.k_max, rng), bandlimited_field(exp.box, k.k_min, k.k_max, rng)
        )
        for _ in range(n)
    ]
    rep = verify_frame_preservation(system, report.A_emp, report.B_emp, F)
    return rep.as_dict()


def run_bounds(exp: Experiment, out: Path) -> int:
    report = _frame_report(exp)
    payload = json.loads(report.to_json())
    _write_json(out / "frame_report.json", exp.hash, payload)
    if report.verdict == "frame":
        _write_json(out / "lifted_report.json", exp.hash, _lift_report(exp, report))
    if exp.cfg["bounds"]["require_frame"] and report.verdict != "frame":
        print(f"verdict {report.verdict}: frame required", file=sys.stderr)
        return EXIT_VERDICT
    return EXIT_OK


def run_sweep(exp: Experiment, out: Path) -> int:
    b = exp.cfg["bounds"]
    rows = beta_sweep(
        exp.psi, exp.grid, exp.band, exp.cfg["sweep"]["betas"], exp.box, exp.probes(), exp.normalization,
        b["summand"], exp.cfg["eps"], n_radii=b["n_radii"], n_dirs=b["n_dirs"], rtol=b["rtol"],
    )
    cols = ["beta", "A_candidate", "B_candidate", "A_emp", "B_emp", "s", "S", "E", "grid_points"]
    _write_csv(out / "sweep.csv", exp.hash, cols, ([r[c] for c in cols] for r in rows))
    return EXIT_OK


def run_reconstruct(exp: Experiment, out: Path) -> int:
    f = exp.input_field()
    op = exp.operator()
    coeffs = CoefficientSet(exp.grid, op.forward(f.spectrum)[0], exp.normalization)
    r = exp.cfg["reconstruct"]
    rows = []
    try:
        rec = reconstruct(coeffs, exp.psi, exp.box, r["iters"], r["tol"], operator=op)
        err = np.sqrt((rec.field - f).norm2() / f.norm2())
        rows.append([rec.iterations, rec.residual, err, rec.converged, "ok"])
        code = EXIT_OK
    except StagnationError as exc:
        rows.append([0, float("nan"), float("nan"), False, str(exc)])
        code = EXIT_VERDICT
    _write_csv(out / "reconstruction.csv", exp.hash,
               ["iterations", "residual", "relative_error", "converged", "status"], rows)
    return code


def run_lift(exp: Experiment, out: Path) -> int:
    """Expansion residuals of DFT-basis lifts on a small 2D box."""
    lc = exp.cfg["lift"]
    box = BoxSpec(2, lc["side_length"], lc["samples"])
    basis = [SampledField(box, s, domain="frequency") for s in dft_basis(box)]
    rng = exp.rng(4)
    F = QuaternionField(random_field(box, rng), random_field(box, rng))
    rows = []
    for mode in ("diagonal", "mixed"):
        for n in list(lc["partial"]) + [len(basis)]:
            n = min(int(n), len(basis))
            e = expand(F, lift(basis[:n], mode))
            rows.append([mode, n, e.residual, e.relative_residual])
    _write_csv(out / "lift_residuals.csv", exp.hash, ["mode", "members", "residual", "relative_residual"], rows)
    system = lift(basis)
    e = expand(F, system)
    write_lifted_coefficients_csv(out / "lifted_coefficients.csv", system, e.coefficients,
                                  header=f"config_sha256={exp.hash}")
    return EXIT_OK


def run_report(exp: Experiment, out: Path) -> int:
    """Grid, analysis, frame report (with lifted report) in one pass."""
    codes = [run_grid(exp, out), run_analyze(exp, out), run_bounds(exp, out)]
    return max(codes)


COMMANDS = {
    "grid": run_grid,
    "analyze": run_analyze,
    "bounds": run_bounds,
    "sweep": run_sweep,
    "lift": run_lift,
    "reconstruct": run_reconstruct,
    "report": run_report,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="quatwave", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config entry by dotted path (repeatable)")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--threads", type=int, default=None, help="threads for the NUFFT backend")
    p.add_argument("--seed", type=int, default=None, help="seed for random fields and probes")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _nufft.set_threads(args.threads)
    try:
        cfg = load_config(args.config, args.set, args.seed)
        exp = Experiment(cfg)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "config.json", exp.hash, {"config": cfg})
        return COMMANDS[args.command](exp, out)
    except (ConfigError, DomainError, ShapeError, UnsupportedSizeError, TypeError, KeyError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except VerdictError as exc:
        print(f"verdict: {exc}", file=sys.stderr)
        return EXIT_VERDICT


if __name__ == "__main__":
    sys.exit(main())
