"""Command-line entry point: ``ghostbound {verify,ehrenfest,evolve,scan,spectrum}``.

Every run writes plot-ready CSV files plus ``<subcommand>_manifest.json``
into the output directory.  Parameters resolve as

    built-in defaults < --preset < --config FILE (JSON object) < explicit flags

Exit status: 0 when every invariant check passed, 1 when one failed,
2 for usage or configuration errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__

log = logging.getLogger("ghostbound")

ENV_OUTPUT_DIR = "GHOSTBOUND_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "ghostbound_out"

DEFAULTS: dict[str, dict[str, Any]] = {
    "verify": {
        "samples": 100_000,
        "lambdas": [1 / 3],
        "half_width": 10.0,
        "tolerance": 1e-10,
        "bracket_samples": 10_000,
        "fock": False,
        "n_max": 21,
        "margin": 6,
        "quad_order": 96,
    },
    "ehrenfest": {
        "lambda": 1 / 3,
        "start": [1.0, 0.0, 0.5, 0.0],
        "dt": 0.02,
        "t_final": 500.0,
        "sample_every": 5,
        "drift_tolerance": 1e-7,
        "bound_slack": 1e-6,
    },
    "evolve": {
        "lambda": 1 / 3,
        "points": 128,
        "half_extent": 16.0,
        "dt": 5e-3,
        "t_final": 200.0,
        "center": [1.0, 0.5],
        "width": 0.7,
        "sample_every": 100,
        "stencil": "sinc",
        "substep": "exact",
        "tol_norm": 1e-9,
        "tol_moment": 0.05,
        "tol_sigma": 0.05,
        "tol_energy": 0.02,
        "tol_boundary": 1e-8,
        "checkpoint": None,
        "initial_checkpoint": None,
    },
    "scan": {
        "lambdas": None,
        "lambda_min": -0.8,
        "lambda_max": 0.8,
        "lambda_step": 0.1,
        "max_abs_lambda": 1.0,
        "points": 128,
        "half_extent": 16.0,
        "dt": 5e-3,
        "t_final": 200.0,
        "center": [1.0, 0.5],
        "width": 0.7,
        "sample_every": 100,
        "stencil": "sinc",
        "substep": "exact",
    },
    "spectrum": {
        "n_max": 21,
        "lambda": 1 / 3,
        "quad_order": 96,
        "mode": "intra_multiplet",
        "degree": 7,
        "bins": 30,
        "density_extent": 5.0,
        "density_points": 101,
        "references": [[0, 0], [1, 0], [0, 1]],
    },
}

# printed figure parameters
PRESETS: dict[str, tuple[str, dict[str, Any]]] = {
    "fig1": ("ehrenfest", {"lambda": 1 / 3, "dt": 0.02, "t_final": 500.0, "start": [1.0, 0.0, 0.5, 0.0]}),
    "fig2": ("evolve", {"lambda": 1 / 3, "points": 128, "dt": 5e-3, "t_final": 200.0,
                        "center": [1.0, 0.5], "width": 0.7}),
    "fig3": ("scan", {"lambda_min": -0.8, "lambda_max": 0.8, "lambda_step": 0.1,
                      "points": 128, "dt": 5e-3, "t_final": 200.0}),
    "fig4": ("spectrum", {"n_max": 21, "lambda": 1 / 3, "quad_order": 96}),
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# output helpers


def fmt(v) -> str:
    """Round-trip exact text for CSV cells."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path: Path, header: list[str], rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


@dataclass
class RunManifest:
    subcommand: str
    config: dict
    checks: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    wall_clock_s: float = 0.0

    def check(self, name: str, passed: bool, value=None, threshold=None) -> None:
        self.checks[name] = {"passed": bool(passed), "value": _jsonable(value), "threshold": _jsonable(threshold)}
        log.info("check %-28s %s (value=%s, threshold=%s)", name, "PASS" if passed else "FAIL", value, threshold)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks.values())

    def to_json(self) -> str:
        body = {
            "tool": "ghostbound",
            "version": __version__,
            "subcommand": self.subcommand,
            "config": self.config,
            "wall_clock_s": round(self.wall_clock_s, 3),
            "passed": self.passed,
            "checks": self.checks,
            "summary": {k: _jsonable(v) for k, v in self.summary.items()},
            "outputs": self.outputs,
        }
        return json.dumps(body, indent=2, sort_keys=True)


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    return v


# ---------------------------------------------------------------------------
# pipelines


def run_verify(cfg: dict, out: Path, m: RunManifest) -> None:
    from .commutator import coefficient_triple, fock_commutator_residual, poisson_bracket_ch

    rng = np.random.default_rng(cfg["seed"])
    w = float(cfg["half_width"])
    rows = []
    for lam in cfg["lambdas"]:
        lam = float(lam)
        if lam == 0:
            raise ConfigError("verify needs non-zero couplings (tolerance scales with |lambda|)")
        pts = rng.uniform(-w, w, size=(2, int(cfg["samples"])))
        tri = coefficient_triple(pts[0], pts[1], lam)
        mx = [float(np.max(np.abs(a))) for a in (tri.a_x, tri.a_y, tri.a_0)]
        z = rng.uniform(-2.0, 2.0, size=(4, int(cfg["bracket_samples"])))
        pb = float(np.max(np.abs(poisson_bracket_ch(z, lam))))
        worst = max(mx)
        ok = worst < cfg["tolerance"] * abs(lam)
        print(f"lambda={lam:+.6g}  max|a_x|={mx[0]:.3e}  max|a_y|={mx[1]:.3e}  max|a_0|={mx[2]:.3e}  "
              f"max|{{C,H}}|={pb:.3e}  {'ok' if ok else 'FAIL'}")
        m.check(f"coefficients lambda={lam:+.6g}", ok, worst, cfg["tolerance"] * abs(lam))
        m.check(f"poisson bracket lambda={lam:+.6g}", pb < cfg["tolerance"], pb, cfg["tolerance"])
        row = [lam, *mx, pb, ok]
        if cfg["fock"]:
            res = fock_commutator_residual(int(cfg["n_max"]), lam, int(cfg["margin"]), int(cfg["quad_order"]))
            m.check(f"fock residual lambda={lam:+.6g}", res < 1e-8, res, 1e-8)
            print(f"lambda={lam:+.6g}  fock interior residual={res:.3e}")
            row.insert(5, res)
        rows.append(row)
    header = ["lambda", "max_abs_a_x", "max_abs_a_y", "max_abs_a_0", "max_abs_bracket", "passed"]
    if cfg["fock"]:
        header.insert(5, "fock_residual")
    m.outputs.append(str(write_csv(out / "verify.csv", header, rows)))
    m.summary["max_coefficient_residual"] = max(max(r[1:4]) for r in rows)


def run_ehrenfest(cfg: dict, out: Path, m: RunManifest) -> None:
    from .ehrenfest import BlowupError, IntegratorConfig, integrate

    lam = float(cfg["lambda"])
    ic = IntegratorConfig(float(cfg["dt"]), float(cfg["t_final"]))
    try:
        tr = integrate(np.asarray(cfg["start"], dtype=float), ic, lam, int(cfg["sample_every"]))
    except BlowupError as exc:
        m.check("finite trajectory", False, exc.time)
        print(f"blow-up at t={exc.time:.6g}", file=sys.stderr)
        return
    m.check("finite trajectory", True)
    mom = tr.moment()
    ceiling = mom[0] + 4.0 * abs(lam)
    rows = ([t, *z, h, c, mm] for t, z, h, c, mm in zip(tr.times, tr.states, tr.H, tr.C, mom))
    m.outputs.append(str(write_csv(out / "ehrenfest.csv", ["t", "x", "px", "y", "py", "H", "C", "moment"], rows)))
    tol = float(cfg["drift_tolerance"])
    m.check("H drift", tr.drift_h() < tol, tr.drift_h(), tol)
    m.check("C drift", tr.drift_c() < tol, tr.drift_c(), tol)
    m.check("classical moment ceiling", mom.max() <= ceiling + cfg["bound_slack"], float(mom.max()), ceiling)
    m.summary.update(drift_H=tr.drift_h(), drift_C=tr.drift_c(), max_abs_coordinate=float(np.abs(tr.states).max()))
    print(f"H drift {tr.drift_h():.3e}  C drift {tr.drift_c():.3e}  max moment {mom.max():.6f} (ceiling {ceiling:.6f})")


def _grid_from(cfg):
    from .grid import GridSpec

    return GridSpec(float(cfg["half_extent"]), int(cfg["points"]))


def run_evolve(cfg: dict, out: Path, m: RunManifest) -> None:
    from .grid import evolve_monitored, init_gaussian, load_checkpoint, save_checkpoint

    lam = float(cfg["lambda"])
    if cfg["initial_checkpoint"]:
        psi0 = load_checkpoint(cfg["initial_checkpoint"])
    else:
        psi0 = init_gaussian(_grid_from(cfg), cfg["center"], float(cfg["width"]))
    recs, final = evolve_monitored(psi0, float(cfg["dt"]), float(cfg["t_final"]), lam, int(cfg["sample_every"]),
                                   cfg["stencil"], tolerances=None, return_final=True,
                                   substep=cfg["substep"])
    f0 = recs[0]
    ceiling = f0.moment + 4.0 * abs(lam)
    corrected = f0.moment + 2.0 * f0.k2 + 4.0 * abs(lam)
    sig_ceiling = f0.sigma + 2.0 * abs(lam)
    header = ["t", "x2", "y2", "px2", "py2", "k2", "h_mean", "e_mean", "norm", "boundary_prob",
              "r2", "moment", "sigma", "moment_ceiling", "corrected_ceiling", "sigma_ceiling"]
    rows = ([r.time, r.x2, r.y2, r.px2, r.py2, r.k2, r.h_mean, r.e_mean, r.norm, r.boundary_prob,
             r.r2, r.moment, r.sigma, ceiling, corrected, sig_ceiling] for r in recs)
    m.outputs.append(str(write_csv(out / "evolve.csv", header, rows)))

    norm_drift = max(abs(r.norm - f0.norm) for r in recs)
    max_mom = max(r.moment for r in recs)
    max_sig = max(r.sigma for r in recs)
    e_drift = max(abs(r.e_mean - f0.e_mean) for r in recs)
    edge = max(r.boundary_prob for r in recs)
    m.check("norm drift", norm_drift < cfg["tol_norm"], norm_drift, cfg["tol_norm"])
    m.check("moment ceiling", max_mom <= ceiling + cfg["tol_moment"], max_mom, ceiling + cfg["tol_moment"])
    m.check("K^2-corrected moment ceiling", max_mom <= corrected + cfg["tol_moment"], max_mom,
            corrected + cfg["tol_moment"])
    m.check("sigma ceiling", max_sig <= sig_ceiling + cfg["tol_sigma"], max_sig, sig_ceiling + cfg["tol_sigma"])
    m.check("<E> conservation", e_drift < cfg["tol_energy"], e_drift, cfg["tol_energy"])
    m.check("boundary probability", edge < cfg["tol_boundary"], edge, cfg["tol_boundary"])
    m.summary.update(max_r2=max(r.r2 for r in recs), min_r2=min(r.r2 for r in recs), moment_ceiling=ceiling,
                     max_moment=max_mom, energy_drift=e_drift, gaussian_convention="exp(-r^2/(2 width^2))")
    if cfg["checkpoint"]:
        save_checkpoint(final, cfg["checkpoint"])
        m.outputs.append(str(cfg["checkpoint"]))
    print(f"max <r^2> {m.summary['max_r2']:.6f}  moment {max_mom:.6f} vs ceiling {ceiling:.6f}  "
          f"<E> drift {e_drift:.3e}")


def _scan_lambdas(cfg) -> list[float]:
    if cfg["lambdas"]:
        return [float(v) for v in cfg["lambdas"]]
    lo, hi, step = float(cfg["lambda_min"]), float(cfg["lambda_max"]), float(cfg["lambda_step"])
    if step <= 0 or hi < lo:
        raise ConfigError("need lambda_step > 0 and lambda_max >= lambda_min")
    n = int(round((hi - lo) / step))
    return [round(lo + k * step, 12) for k in range(n + 1)]


def run_scan(cfg: dict, out: Path, m: RunManifest) -> None:
    from .grid import lambda_scan

    lams = _scan_lambdas(cfg)
    entries = lambda_scan(lams, _grid_from(cfg), float(cfg["dt"]), float(cfg["t_final"]), cfg["center"],
                          float(cfg["width"]), int(cfg["sample_every"]), cfg["stencil"],
                          float(cfg["max_abs_lambda"]), None, int(cfg["threads"]), cfg["substep"])
    header = ["lambda", "max_r2", "ceiling", "violated", "max_moment", "corrected_ceiling",
              "max_sigma", "sigma_ceiling", "max_energy_drift"]
    rows = ([e.lam, e.max_r2, e.ceiling, e.violated, e.max_moment, e.corrected_ceiling, e.max_sigma,
             e.sigma_ceiling, e.max_energy_drift] for e in entries)
    m.outputs.append(str(write_csv(out / "scan.csv", header, rows)))
    bad = [e.lam for e in entries if e.violated]
    m.check("max <r^2> below ceiling", not bad, bad, "none")
    for e in entries:
        print(f"lambda={e.lam:+.3f}  max r2={e.max_r2:.4f}  ceiling={e.ceiling:.4f}  "
              f"{'VIOLATED' if e.violated else 'ok'}")


def run_spectrum(cfg: dict, out: Path, m: RunManifest) -> None:
    from .fock import FockBasis, build_hamiltonian, diagonalize, eigenstate_density, spacing_statistics

    lam = float(cfg["lambda"])
    basis = FockBasis(int(cfg["n_max"]))
    spec = diagonalize(build_hamiltonian(basis, lam, int(cfg["quad_order"])))
    ev = spec.eigenvalues
    m.outputs.append(str(write_csv(out / "eigenvalues.csv", ["index", "eigenvalue", "multiplet"],
                                   zip(range(ev.size), ev, spec.labels))))
    m.check("state count", ev.size == basis.size, ev.size, basis.size)
    m.check("multiplet labels within 0.25", spec.labels_reliable, spec.max_label_offset, 0.25)
    if lam == 0:
        exact = np.sort(basis.free_energies().astype(float))
        dev = float(np.max(np.abs(ev - exact)))
        m.check("integer ladder", dev < 1e-9, dev, 1e-9)
    m.summary.update(n_states=int(ev.size), max_label_offset=spec.max_label_offset)

    mode = cfg["mode"]
    if lam != 0 or mode == "global":
        st = spacing_statistics(spec, mode=mode, degree=int(cfg["degree"]), bins=int(cfg["bins"]))
        rows = zip(st.bin_edges[:-1], st.bin_edges[1:], st.counts, st.density)
        m.outputs.append(str(write_csv(out / "spacing_histogram.csv",
                                       ["bin_lo", "bin_hi", "count", "density"], rows)))
        m.summary.update(ks_poisson=st.ks_poisson, ks_wigner=st.ks_wigner, preferred=st.preferred, mode=mode)
        print(f"{mode}: KS Poisson {st.ks_poisson:.4f}  KS Wigner-Dyson {st.ks_wigner:.4f}  -> {st.preferred}")

    axis = np.linspace(-cfg["density_extent"], cfg["density_extent"], int(cfg["density_points"]))
    for ref in cfg["references"]:
        nx, ny = (int(v) for v in ref)
        rho = eigenstate_density(spec, (nx, ny), axis, axis)
        path = out / f"density_{nx}_{ny}.csv"
        np.savetxt(path, rho, delimiter=",", fmt="%.17g")
        m.outputs.append(str(path))
    sidecar = {"n_max": int(cfg["n_max"]), "lambda": lam, "quad_order": int(cfg["quad_order"]),
               "density_axis": [float(axis[0]), float(axis[-1]), int(axis.size)],
               "density_layout": "rows are x, columns are y"}
    (out / "density_meta.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))
    m.outputs.append(str(out / "density_meta.json"))
    print(f"{ev.size} eigenvalues, max distance to an integer {spec.max_label_offset:.4f}")


PIPELINES: dict[str, Callable[[dict, Path, RunManifest], None]] = {
    "verify": run_verify,
    "ehrenfest": run_ehrenfest,
    "evolve": run_evolve,
    "scan": run_scan,
    "spectrum": run_spectrum,
}


# ---------------------------------------------------------------------------
# argument handling

# flag -> config key, type, extra argparse kwargs
_FLAGS: dict[str, list[tuple[str, str, Any, dict]]] = {
    "verify": [
        ("--samples", "samples", int, {}),
        ("--lambda", "lambdas", float, {"nargs": "+"}),
        ("--half-width", "half_width", float, {}),
        ("--tolerance", "tolerance", float, {}),
        ("--bracket-samples", "bracket_samples", int, {}),
        ("--fock", "fock", None, {"action": "store_const", "const": True}),
        ("--n-max", "n_max", int, {}),
        ("--margin", "margin", int, {}),
        ("--quad-order", "quad_order", int, {}),
    ],
    "ehrenfest": [
        ("--lambda", "lambda", float, {}),
        ("--start", "start", float, {"nargs": 4, "metavar": ("X", "PX", "Y", "PY")}),
        ("--dt", "dt", float, {}),
        ("--t-final", "t_final", float, {}),
        ("--sample-every", "sample_every", int, {}),
        ("--drift-tolerance", "drift_tolerance", float, {}),
    ],
    "evolve": [
        ("--lambda", "lambda", float, {}),
        ("--points", "points", int, {}),
        ("--half-extent", "half_extent", float, {}),
        ("--dt", "dt", float, {}),
        ("--t-final", "t_final", float, {}),
        ("--center", "center", float, {"nargs": 2, "metavar": ("X0", "Y0")}),
        ("--width", "width", float, {}),
        ("--sample-every", "sample_every", int, {}),
        ("--stencil", "stencil", str, {"choices": ("fd2", "fd4", "sinc")}),
        ("--substep", "substep", str, {"choices": ("exact", "cayley")}),
        ("--tol-energy", "tol_energy", float, {}),
        ("--tol-moment", "tol_moment", float, {}),
        ("--tol-sigma", "tol_sigma", float, {}),
        ("--checkpoint", "checkpoint", str, {}),
        ("--initial-checkpoint", "initial_checkpoint", str, {}),
    ],
    "scan": [
        ("--lambdas", "lambdas", float, {"nargs": "+"}),
        ("--lambda-min", "lambda_min", float, {}),
        ("--lambda-max", "lambda_max", float, {}),
        ("--lambda-step", "lambda_step", float, {}),
        ("--max-abs-lambda", "max_abs_lambda", float, {}),
        ("--points", "points", int, {}),
        ("--half-extent", "half_extent", float, {}),
        ("--dt", "dt", float, {}),
        ("--t-final", "t_final", float, {}),
        ("--center", "center", float, {"nargs": 2, "metavar": ("X0", "Y0")}),
        ("--width", "width", float, {}),
        ("--sample-every", "sample_every", int, {}),
        ("--stencil", "stencil", str, {"choices": ("fd2", "fd4", "sinc")}),
        ("--substep", "substep", str, {"choices": ("exact", "cayley")}),
    ],
    "spectrum": [
        ("--n-max", "n_max", int, {}),
        ("--lambda", "lambda", float, {}),
        ("--quad-order", "quad_order", int, {}),
        ("--mode", "mode", str, {"choices": ("intra_multiplet", "global")}),
        ("--degree", "degree", int, {}),
        ("--bins", "bins", int, {}),
    ],
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ghostbound", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"ghostbound {__version__}")
    sub = p.add_subparsers(dest="subcommand", required=True)
    for name, flags in _FLAGS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--preset", choices=sorted(k for k, v in PRESETS.items() if v[0] == name))
        sp.add_argument("--config", help="JSON object of parameters (keys as in the manifest)")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--threads", type=int, default=None)
        sp.add_argument("--output-dir", default=None)
        sp.add_argument("-v", "--verbose", action="store_true")
        for flag, key, typ, extra in flags:
            kw = dict(extra, dest=key, default=None)
            if typ is not None:
                kw["type"] = typ
            sp.add_argument(flag, **kw)
    return p


def resolve_config(args: argparse.Namespace) -> dict:
    name = args.subcommand
    cfg = dict(DEFAULTS[name])
    cfg.update(seed=0, threads=os.cpu_count() or 1, output_dir=os.environ.get(ENV_OUTPUT_DIR, DEFAULT_OUTPUT_DIR))
    if args.preset:
        cfg.update(PRESETS[args.preset][1])
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(data) - set(cfg)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(data)
    for key in list(cfg) + ["seed", "threads", "output_dir"]:
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = list(v) if isinstance(v, (list, tuple)) else v
    if int(cfg["threads"]) < 1:
        raise ConfigError("threads must be >= 1")
    cfg["preset"] = args.preset
    return cfg


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"ghostbound: error: {exc}", file=sys.stderr)
        return 2
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(args.subcommand, cfg)
    t0 = time.perf_counter()
    try:
        PIPELINES[args.subcommand](cfg, out, manifest)
    except (ConfigError, ValueError, TypeError, KeyError) as exc:
        print(f"ghostbound: error: {exc}", file=sys.stderr)
        manifest.check("configuration", False, str(exc))
        manifest.wall_clock_s = time.perf_counter() - t0
        (out / f"{args.subcommand}_manifest.json").write_text(manifest.to_json())
        return 2
    manifest.wall_clock_s = time.perf_counter() - t0
    (out / f"{args.subcommand}_manifest.json").write_text(manifest.to_json())
    if not manifest.passed:
        failed = [k for k, c in manifest.checks.items() if not c["passed"]]
        print(f"ghostbound: invariant check failed: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
