"""Batch command-line front end.

Subcommands mirror the pipeline stages (morse, kernel, spectrum, fit,
optimize, survival, adiabaticity, pipeline) and emit figure-ready CSV files
plus machine-readable JSON reports.  Exit codes: 0 success, 2 configuration
error, 3 numerical-convergence error, 4 regime breakdown, 1 anything else.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__, kernel, morse, optimizer, survival
from .config import RunConfig, apply_override, default_config_text, load_config
from .errors import (
    ConfigError,
    DomainError,
    MorseTransportError,
    NumericalError,
    RegimeBreakdownError,
)
from .fitting import fit_kernel, laplace_of_fit
from .svgplot import render_line_svg

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_REGIME = 4

_STAGES = ["morse", "kernel", "spectrum", "fit", "optimize", "survival",
           "adiabaticity"]


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".12g")


def _write_csv(path: Path, header, columns):
    rows = zip(*columns)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\r\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\r\n")


def _write_json(path: Path, payload: dict):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _config_fingerprint(cfg: RunConfig) -> str:
    blob = json.dumps(cfg.as_flat_dict(), sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


class Context:
    """Lazily computed shared pipeline state."""

    def __init__(self, cfg: RunConfig, outdir: Path, svg: bool):
        self.cfg = cfg
        self.outdir = outdir
        self.svg = svg
        self.checks = {}
        self._cache = {}

    def _get(self, key, builder):
        if key not in self._cache:
            self._cache[key] = builder()
        return self._cache[key]

    @property
    def model(self):
        c = self.cfg["morse"]
        return self._get("model", lambda: morse.build_model(c["d"], c["a"], c["m"]))

    @property
    def samples(self):
        c = self.cfg["kernel"]
        return self._get("samples", lambda: kernel.sample_kernel(
            self.model, t_max=c["t_max"], n=c["n"], quadrature_tol=c["quad_tol"]))

    @property
    def fit(self):
        c = self.cfg["fit"]
        init = c["init"] if c["init"] else None
        return self._get("fit", lambda: fit_kernel(
            self.samples, init=init, window=(c["window_min"], c["window_max"]),
            pin_dc=c["pin_dc"]))

    @property
    def trajectory(self):
        c = self.cfg["optimize"]

        def build():
            traj = optimizer.solve_trajectory(
                self.fit, c["lambda"], p_dot0=c["p_dot0"], horizon=30.0)
            if c["horizon"] == "auto":
                horizon = optimizer.fluence_matched_horizon(
                    traj, c["fluence_target"], t_lo=0.05, t_hi=60.0)
                self.checks["fluence_matched_horizon"] = horizon
            else:
                horizon = c["horizon"]
            return optimizer.Trajectory(
                poles=traj.poles, residues=traj.residues, lam=traj.lam,
                p_dot0=traj.p_dot0, horizon=float(horizon))
        return self._get("trajectory", build)

    @property
    def modes(self):
        c = self.cfg["survival"]
        if not c["mode_table"]:
            return None
        return self._get("modes", lambda: survival.load_mode_table(c["mode_table"]))

    def maybe_svg(self, stem, x, series, title, xlabel, ylabel):
        if self.svg:
            render_line_svg(self.outdir / f"{stem}.svg", x, series,
                            title=title, xlabel=xlabel, ylabel=ylabel)


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------

def stage_morse(ctx: Context):
    c = ctx.cfg["morse"]
    model = ctx.model
    kap = np.linspace(c["kappa_max"] / c["kappa_n"], c["kappa_max"], c["kappa_n"])
    a_vals = np.asarray(morse.a_coefficient(model, kap))
    _write_csv(ctx.outdir / "a_kappa.csv",
               ["kappa (reduced)", "a_kappa (reduced)"], [kap, a_vals])
    ctx.maybe_svg("a_kappa", kap, {"a_kappa": a_vals},
                  "leakage weight", "kappa", "a_kappa")
    print(f"N = {model.N:.12g}")
    print(f"omega0 = {model.omega0:.12g}")
    print(f"m_star = {model.m_star:.12g}")


def stage_kernel(ctx: Context):
    s = ctx.samples
    _write_csv(ctx.outdir / "kernel.csv",
               ["t (reduced)", "kernel (reduced)"], [s.times, s.values])
    ctx.maybe_svg("kernel", s.times, {"2 Re Phi": s.values},
                  "memory kernel", "t", "kernel")


def stage_spectrum(ctx: Context):
    c = ctx.cfg["kernel"]
    spec = kernel.LeakageSpectrum(ctx.model)
    om = np.linspace(-c["omega_max"], c["omega_max"], c["omega_n"])
    g = kernel.spectrum_on_grid(spec, om)
    _write_csv(ctx.outdir / "spectrum.csv",
               ["omega (reduced)", "G (reduced)"], [om, g])
    ctx.maybe_svg("spectrum", om, {"G": g}, "leakage spectrum", "omega", "G")

    ts = np.arange(0.0, c["fourier_window"] + c["fourier_dt"] / 2, c["fourier_dt"])
    long_samples = kernel.KernelSamples(
        times=ts, values=kernel.kernel_on_grid(ctx.model, ts),
        quadrature_tol=c["quad_tol"])
    est = kernel.windowed_fourier(long_samples, c["fourier_omegas"])
    print("Fourier consistency (windowed transform vs spectrum):")
    for w, e in zip(c["fourier_omegas"], est):
        exact = kernel.leakage_spectrum_value(spec, w)
        ratio = e / exact if exact else float("inf")
        ctx.checks[f"fourier_ratio_omega_{w:g}"] = ratio
        print(f"  omega = {w:g}: transform = {e:.6g}, spectrum = {exact:.6g}, "
              f"ratio = {ratio:.4f}")
    # prefactor convention recorded alongside the data
    ctx.checks["spectrum_prefactor"] = float(np.sqrt(ctx.model.m_star / 2.0))


def stage_fit(ctx: Context):
    fit = ctx.fit
    payload = {
        "a1": fit.a1, "b1": fit.b1, "c1": fit.c1, "d1": fit.d1,
        "w1": fit.w1, "w2": fit.w2,
        "residual_norm": fit.residual_norm,
        "fit_window": list(fit.fit_window),
        "dc_pinned": fit.dc_pinned,
        "config": ctx.cfg.as_flat_dict(),
    }
    _write_json(ctx.outdir / "fit.json", payload)
    s = ctx.samples
    model_vals = fit(s.times)
    _write_csv(ctx.outdir / "fit_overlay.csv",
               ["t (reduced)", "data (reduced)", "model (reduced)"],
               [s.times, s.values, model_vals])
    ctx.maybe_svg("fit_overlay", s.times,
                  {"data": s.values, "model": model_vals},
                  "kernel fit", "t", "kernel")
    ctx.checks["fit_residual_norm"] = fit.residual_norm
    print(f"fit: a1={fit.a1:.4f} b1={fit.b1:.4f} c1={fit.c1:.4f} "
          f"d1={fit.d1:.4f} w1={fit.w1:.4f} w2={fit.w2:.4f} "
          f"residual={fit.residual_norm:.4g}")


def stage_optimize(ctx: Context):
    c = ctx.cfg["optimize"]
    traj = ctx.trajectory
    cls = optimizer.classify_poles(traj)
    E = optimizer.fluence(traj)
    ts = np.linspace(0.0, traj.horizon, c["trajectory_n"])
    vel = optimizer.velocity(traj, ts)
    pos = optimizer.position(traj, ts)
    _write_csv(ctx.outdir / "trajectory.csv",
               ["t (reduced)", "velocity (reduced)", "position (reduced)"],
               [ts, vel, pos])
    ctx.maybe_svg("trajectory", ts, {"velocity": vel, "position": pos},
                  f"optimal trajectory (lambda={traj.lam:g})", "t", "value")
    payload = {
        "lambda": traj.lam,
        "p_dot0": traj.p_dot0,
        "horizon": traj.horizon,
        "fluence": E,
        "poles": [[p.real, p.imag] for p in traj.poles],
        "residues": [[r.real, r.imag] for r in traj.residues],
        "classification": {
            "verdict": cls.verdict,
            "n_real_positive": cls.n_real_positive,
            "n_real_negative": cls.n_real_negative,
            "n_neutral": cls.n_neutral,
            "n_complex_rhp_pairs": cls.n_complex_rhp_pairs,
            "n_complex_lhp_pairs": cls.n_complex_lhp_pairs,
        },
        "config": ctx.cfg.as_flat_dict(),
    }
    _write_json(ctx.outdir / "trajectory.json", payload)
    ctx.checks["fluence"] = E
    ctx.checks["el_residual_fitted_kernel"] = optimizer.el_residual(
        traj, ctx.fit, np.linspace(0.0, traj.horizon, 101))
    print(f"lambda = {traj.lam:g}: verdict = {cls.verdict}, "
          f"fluence(T={traj.horizon:.4g}) = {E:.6g}")

    if c["lambda_sweep"]:
        lo, hi, n = c["lambda_sweep"]
        lams = -np.logspace(np.log10(abs(lo)), np.log10(abs(hi)), int(n))
        recs = optimizer.lambda_sweep(ctx.fit, lams, p_dot0=c["p_dot0"],
                                      fluence_target=c["fluence_target"])
        _write_json(ctx.outdir / "lambda_sweep.json",
                    {"records": recs, "config": ctx.cfg.as_flat_dict()})
        print(f"lambda sweep: {len(recs)} records")


def stage_survival(ctx: Context):
    c = ctx.cfg["survival"]
    traj = ctx.trajectory
    ts = np.linspace(0.0, traj.horizon, c["t_n"])
    series = survival.survival_series(traj, ctx.model, ts, modes=ctx.modes,
                                      initial=c["initial"], k0=c["k0_index"])
    _write_csv(ctx.outdir / "survival.csv",
               ["t (reduced)", "p_free", "p_total", "loss_nonadiabatic",
                "loss_phonon", "cross"],
               [series.times, series.p_free, series.p_total,
                series.terms["nonadiabatic"], series.terms["phonon"],
                series.terms["cross"]])
    ctx.maybe_svg("survival", series.times,
                  {"p_free": series.p_free, "p_total": series.p_total},
                  "survival probability", "t", "P")
    ctx.checks["min_p_free"] = float(series.p_free.min())
    if series.flags is not None and series.flags.any():
        print(f"warning: {int(series.flags.sum())} survival values outside "
              "[0, 1] by more than 1e-6 (second-order overshoot)")
    # cross-check the two formulations at the final time
    p_time = survival.survival_free_time(traj, ctx.model, traj.horizon)
    ctx.checks["dual_formulation_gap"] = abs(p_time - series.p_free[-1])
    print(f"min P_free = {series.p_free.min():.6f}; "
          f"time-vs-spectral gap at T = {ctx.checks['dual_formulation_gap']:.2e}")


def stage_adiabaticity(ctx: Context):
    c = ctx.cfg["adiabaticity"]
    traj = ctx.trajectory
    kap = np.linspace(c["kappa_min"], c["kappa_max"], c["kappa_n"])
    ts = np.linspace(0.0, traj.horizon, c["t_n"])
    rep = survival.adiabaticity_report(traj, ctx.model, kap, ts,
                                       margin=c["margin"])
    tau_col, kap_col = np.meshgrid(ts, kap, indexing="ij")
    _write_csv(ctx.outdir / "adiabaticity.csv",
               ["tau (reduced)", "kappa (reduced)", "lhs", "rhs", "violated"],
               [tau_col.ravel(), kap_col.ravel(), rep.lhs.ravel(),
                np.broadcast_to(rep.rhs, rep.lhs.shape).ravel(),
                rep.violated.ravel().astype(int)])
    if rep.violated_band:
        lo, hi = rep.violated_band
        ctx.checks["adiabaticity_violated_band"] = [lo, hi]
        print(f"adiabaticity violated on kappa in [{lo:.4g}, {hi:.4g}] "
              f"(margin {rep.margin:g})")
    else:
        ctx.checks["adiabaticity_violated_band"] = None
        print("no adiabaticity violations on the scanned grid")


_STAGE_FN = {
    "morse": stage_morse,
    "kernel": stage_kernel,
    "spectrum": stage_spectrum,
    "fit": stage_fit,
    "optimize": stage_optimize,
    "survival": stage_survival,
    "adiabaticity": stage_adiabaticity,
}


def run_pipeline(ctx: Context):
    manifest = {
        "config": ctx.cfg.as_flat_dict(),
        "config_sha256": _config_fingerprint(ctx.cfg),
        "versions": {
            "morse_transport": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": sys.version.split()[0],
        },
        "stages": [],
        "timings_s": {},
    }
    try:
        for name in _STAGES:
            t0 = time.perf_counter()
            _STAGE_FN[name](ctx)
            manifest["timings_s"][name] = time.perf_counter() - t0
            manifest["stages"].append(name)
    finally:
        manifest["checks"] = ctx.checks
        _write_json(ctx.outdir / "manifest.json", manifest)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="morse-transport",
        description="Optimal-transport pipeline for a wavepacket in a "
                    "moving shallow Morse trap (reduced units, hbar = 1).")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _STAGES + ["pipeline", "defaults"]:
        p = sub.add_parser(name, help=f"run the {name} stage"
                           if name != "defaults" else "print default config")
        if name == "defaults":
            continue
        p.add_argument("--config", type=str, default=None,
                       help="INI config file (defaults used when omitted)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VAL",
                       help="override a dotted config key, e.g. morse.d=0.6")
        p.add_argument("--out", type=str, default=None,
                       help="output directory (overrides output.directory)")
        p.add_argument("--svg", action="store_true",
                       help="also render an SVG plot per CSV")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "defaults":
        sys.stdout.write(default_config_text())
        return EXIT_OK
    try:
        cfg = load_config(args.config)
        for item in args.set:
            apply_override(cfg, item)
        outdir = Path(args.out if args.out else cfg.get("output", "directory"))
        outdir.mkdir(parents=True, exist_ok=True)
        svg = args.svg or cfg.get("output", "svg")
        ctx = Context(cfg, outdir, svg)
        if args.command == "pipeline":
            run_pipeline(ctx)
        else:
            _STAGE_FN[args.command](ctx)
        return EXIT_OK
    except (ConfigError, DomainError) as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RegimeBreakdownError as exc:
        print(f"error (RegimeBreakdownError): {exc}", file=sys.stderr)
        return EXIT_REGIME
    except NumericalError as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except MorseTransportError as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
