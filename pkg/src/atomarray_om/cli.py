"""Command-line front end: ``atomarray-om <verb> CONFIG [--out DIR] [--seed N] [--format csv,json,svg]``.

Exit status is 0 on success, 1 for configuration errors and 2 when a
numerical method does not converge.  Every run writes ``manifest.json``
(resolved config, tool version, seed) next to its data files.  Results
are computed before anything is written, so a failing run leaves no
partial outputs.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dynamics as dyn
from . import io
from . import lattice as lat
from . import params as prm
from . import trajectories as trj
from .fock import HilbertDims, ModelParams, polaron_level, spectrum_undriven

log = logging.getLogger("atomarray_om")

FORMATS = ("csv", "json", "svg")


@dataclass
class Outputs:
    """Deferred writers keyed by file name, plus a JSON-able summary."""

    writers: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    seed: int | None = None

    def add(self, kind: str, name: str, fn):
        self.writers[name] = (kind, fn)


# ---------------------------------------------------------------- config


def _physical(cfg: dict) -> prm.PhysicalConfig:
    sec = dict(cfg.get("physical") or {})
    preset = sec.pop("preset", None)
    presets = {"fig3": prm.fig3_config, "hem": prm.hem_config}
    if preset is not None:
        if preset not in presets:
            raise io.ConfigError(f"physical.preset must be one of {sorted(presets)}")
        extra = {k: io.parse_quantity(v, f"physical.{k}") if k != "scheme" else v
                 for k, v in sec.items()}
        try:
            return presets[preset](**extra)
        except (TypeError, ValueError) as exc:
            raise io.ConfigError(f"physical: {exc}") from exc
    if not sec:
        raise io.ConfigError("config needs a 'physical' section (or physical.preset)")
    return io.build_dataclass(prm.PhysicalConfig, sec, "physical")


_DELTA = re.compile(r"^\s*-\s*G\s*(?:([-+])\s*([0-9.eE+-]+)\s*)?$")


def _delta(value, G: float, name: str) -> float:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if isinstance(value, str):
        m = _DELTA.match(value)
        if m:
            off = float(m.group(2)) if m.group(2) else 0.0
            return -G + (off if m.group(1) != "-" else -off)
    raise io.ConfigError(f"{name}: expected a number or '-G [+/- x]', got {value!r}")


_MODEL_KEYS = {"g", "kappa", "g2", "gamma_m", "n_th", "delta_L"}
_SIM_KEYS = {"omega_ratio", "n_photon_max", "n_phonon_max", "delta_min", "delta_max",
             "delta_points", "tau_max_kappa", "tau_points", "engine", "t_max", "eps_ss",
             "method", "allow_strong_drive"}


def _check_keys(sec: dict, allowed: set, name: str):
    bad = sorted(set(sec) - allowed)
    if bad:
        raise io.ConfigError(f"unknown field(s) in {name}: {', '.join(bad)}")


def _model(cfg: dict) -> tuple[ModelParams, dict]:
    """Dimensionless model (omega_m = 1) from ``model`` or the physical mapping."""
    sim = dict(cfg.get("simulation") or {})
    _check_keys(sim, _SIM_KEYS, "simulation")
    mod = dict(cfg.get("model") or {})
    _check_keys(mod, _MODEL_KEYS, "model")
    if "g" in mod or "kappa" in mod:
        if "g" not in mod or "kappa" not in mod:
            raise io.ConfigError("model needs both g and kappa (units of omega_m)")
        g, kappa, g2 = float(mod["g"]), float(mod["kappa"]), float(mod.get("g2", 0.0))
    else:
        p = prm.derive_params(_physical(cfg))
        g, kappa, g2 = p.g / p.omega_m, p.kappa / p.omega_m, p.g2 / p.omega_m
    G = g * g
    delta = _delta(mod.get("delta_L", "-G"), G, "model.delta_L")
    omega_ratio = float(sim.get("omega_ratio", 0.05))
    try:
        mp = ModelParams(delta_L=delta, omega_m=1.0, g=g, kappa=kappa, Omega=omega_ratio * kappa,
                         g2=g2, gamma_m=float(mod.get("gamma_m", 0.0)), n_th=float(mod.get("n_th", 0.0)))
    except ValueError as exc:
        raise io.ConfigError(f"model: {exc}") from exc
    return mp, sim


def _dims(sim: dict) -> HilbertDims:
    try:
        return HilbertDims(int(sim.get("n_photon_max", 4)), int(sim.get("n_phonon_max", 16)))
    except ValueError as exc:
        raise io.ConfigError(f"simulation: {exc}") from exc


def _ctrl(sim: dict) -> dyn.SimControl:
    try:
        return dyn.SimControl(omega_ratio=float(sim.get("omega_ratio", 0.05)),
                              t_max=float(sim.get("t_max", 30.0)),
                              eps_ss=float(sim.get("eps_ss", 1e-9)),
                              allow_strong_drive=bool(sim.get("allow_strong_drive", False)))
    except ValueError as exc:
        raise io.ConfigError(f"simulation: {exc}") from exc


def _grid(spec, name: str) -> np.ndarray:
    if isinstance(spec, dict) and "values" in spec:
        spec = spec["values"]
    if isinstance(spec, list):
        return np.array([io.parse_quantity(v, name) for v in spec], dtype=float)
    if not isinstance(spec, dict) or not {"start", "stop", "num"} <= set(spec):
        raise io.ConfigError(f"{name} must be a list or a mapping with start, stop, num")
    lo = io.parse_quantity(spec["start"], f"{name}.start")
    hi = io.parse_quantity(spec["stop"], f"{name}.stop")
    num = int(spec["num"])
    if spec.get("log", False):
        if lo <= 0 or hi <= 0:
            raise io.ConfigError(f"{name}: log grids need positive bounds")
        return np.geomspace(lo, hi, num)
    return np.linspace(lo, hi, num)


# ---------------------------------------------------------------- commands


def cmd_map_params(cfg: dict, args) -> Outputs:
    pc = _physical(cfg)
    p = prm.derive_params(pc)
    out = Outputs()
    rates = {}
    for name in ("g", "kappa_c", "kappa_sc", "kappa", "omega_m", "G", "g2"):
        v = getattr(p, name)
        rates[name] = {"rad_per_s": v, "x2pi_Hz": v / (2 * math.pi)}
    summary = {"rates": rates, "N_eff": p.N_eff, "x0": p.x0, "scheme": p.scheme,
               "flags": list(p.flags),
               "g_over_omega_m": p.g / p.omega_m, "kappa_over_omega_m": p.kappa / p.omega_m}
    if p.kappa > 0:
        m = prm.regime_margins(p)
        summary["margins"] = {"sideband": m.sideband, "blockade": m.blockade}
    out.summary = summary
    out.add("json", "params.json", lambda path: io.write_json(path, summary))
    print(json.dumps(io._jsonable(summary), indent=2, sort_keys=True))
    return out


def cmd_regime_map(cfg: dict, args) -> Outputs:
    pc = _physical(cfg)
    sec = cfg.get("regime_map") or {}
    try:
        a1, a2 = sec["axis1"], sec["axis2"]
        n1, n2 = a1["name"], a2["name"]
    except (KeyError, TypeError) as exc:
        raise io.ConfigError("regime_map needs axis1 and axis2, each with a name and a grid") from exc
    g1, g2 = _grid(a1, "regime_map.axis1"), _grid(a2, "regime_map.axis2")
    try:
        rows = prm.sweep_regime_map(pc, (n1, g1), (n2, g2))
    except ValueError as exc:
        raise io.ConfigError(f"regime_map: {exc}") from exc
    out = Outputs()
    header = ["axis1", "axis2", "sideband_margin", "blockade_margin", "valid"]
    data = [(r.axis1, r.axis2, r.sideband, r.blockade, r.valid) for r in rows]
    out.add("csv", "regime_map.csv", lambda path: io.write_csv(path, header, data))
    sb = np.array([r.sideband for r in rows]).reshape(len(g1), len(g2))
    bl = np.array([r.blockade for r in rows]).reshape(len(g1), len(g2))
    out.add("svg", "regime_sideband.svg", lambda path: io.svg_heatmap(
        path, g1, g2, sb, n1, n2, "log10(omega_m / kappa)"))
    out.add("svg", "regime_blockade.svg", lambda path: io.svg_heatmap(
        path, g1, g2, bl, n1, n2, "log10(g^2 / (kappa omega_m))"))
    out.summary = {"axis1": n1, "axis2": n2, "points": len(rows),
                   "invalid": sum(not r.valid for r in rows)}
    return out


def cmd_g2_sweep(cfg: dict, args) -> Outputs:
    mp, sim = _model(cfg)
    dims, ctrl = _dims(sim), _ctrl(sim)
    grid = np.linspace(float(sim.get("delta_min", -2.0)), float(sim.get("delta_max", 1.5)),
                       int(sim.get("delta_points", 60)))
    engine = sim.get("engine", "weak_drive")
    rows = dyn.detuning_sweep(mp, grid, dims, ctrl, engine=engine,
                              method=sim.get("method", "time_march"))
    header = ["delta_L_over_omega_m", "g2_zero", "n_photon", "converged"]
    data = [(r.delta_L, r.g2_zero, r.n_photon, r.converged) for r in rows]
    out = Outputs()
    out.add("csv", "g2_sweep.csv", lambda path: io.write_csv(path, header, data))
    out.add("svg", "g2_sweep.svg", lambda path: io.svg_lines(
        path, [("g2(0)", grid, [r.g2_zero for r in rows])], "delta_L / omega_m", "g2(0)",
        f"g/omega_m={mp.g:.3g}, kappa/omega_m={mp.kappa:.3g}", hline=1.0))
    g2v = np.array([r.g2_zero for r in rows])
    i = int(np.nanargmin(g2v)) if np.any(np.isfinite(g2v)) else -1
    out.summary = {"engine": engine, "minus_G": -mp.G, "failed_points": sum(not r.converged for r in rows),
                   "global_min": {"delta_L": float(grid[i]), "g2_zero": float(g2v[i])} if i >= 0 else None}
    return out


def cmd_g2_tau(cfg: dict, args) -> Outputs:
    mp, sim = _model(cfg)
    dims = _dims(sim)
    tau_kappa = float(sim.get("tau_max_kappa", 40.0))
    tau = np.linspace(0.0, tau_kappa / mp.kappa, int(sim.get("tau_points", 600)))
    engine = sim.get("engine", "weak_drive")
    if engine == "weak_drive":
        series = dyn.g2_tau_weak(mp, dims, tau)
    elif engine == "master_equation":
        ctrl = _ctrl(sim)
        L = dyn.model_liouvillian(mp, dims)
        rho = dyn.steady_state(L, ctrl, method=sim.get("method", "time_march"))
        series = dyn.g2_tau(rho, L, tau, ctrl)
    else:
        raise io.ConfigError("simulation.engine must be weak_drive or master_equation")
    out = Outputs()
    data = list(zip(series.tau, series.values))
    out.add("csv", "g2_tau.csv", lambda path: io.write_csv(path, ["tau_omega_m", "g2"], data))
    out.add("svg", "g2_tau.svg", lambda path: io.svg_lines(
        path, [("g2(tau)", series.tau, series.values)], "tau omega_m", "g2(tau)",
        f"delta_L/omega_m = {mp.delta_L:.4g}", hline=1.0))
    try:
        freq = dyn.dominant_frequency(series)
    except ValueError:
        freq = math.nan
    out.summary = {"engine": engine, "delta_L": mp.delta_L, "g2_0": series.g2_0,
                   "long_time_limit": series.long_time_limit, "dominant_frequency_over_omega_m": freq}
    return out


def cmd_spectrum(cfg: dict, args) -> Outputs:
    mp, sim = _model(cfg)
    dims = _dims(sim)
    count = int((cfg.get("spectrum") or {}).get("count", 12))
    p0 = mp.replace(Omega=0.0, g2=0.0)
    try:
        ev = spectrum_undriven(p0, dims, count)
    except ValueError as exc:
        raise io.ConfigError(f"spectrum: {exc}") from exc
    # polaron reference values of the untruncated model, sorted the same way
    ref = sorted(polaron_level(p0, n1, n2) for n1 in range(dims.photon) for n2 in range(dims.phonon))
    data = [(i, float(e), float(r)) for i, (e, r) in enumerate(zip(ev, ref[:count]))]
    out = Outputs()
    out.add("csv", "spectrum.csv", lambda path: io.write_csv(
        path, ["index", "energy_over_omega_m", "polaron_over_omega_m"], data))
    for i, e, r in data:
        print(f"{i:4d}  {e: .10f}  {r: .10f}")
    out.summary = {"delta_L": p0.delta_L, "G": p0.G, "levels": [d[1] for d in data]}
    return out


def cmd_trajectories(cfg: dict, args) -> Outputs:
    mp, sim = _model(cfg)
    dims = _dims(sim)
    sec = dict(cfg.get("trajectories") or {})
    sec["seed"] = args.seed if args.seed is not None else int(sec.get("seed", 0))
    tc = io.build_dataclass(trj.TrajectoryConfig, sec, "trajectories")
    if tc.t_max < 30:
        raise io.ConfigError("trajectories.t_max must be >= 30 (units of 1/kappa)")
    est = trj.steady_estimates(mp, dims, tc)
    res = est["result"]
    data = list(zip(res.times, res.mean("n_photon"), res.stderr("n_photon")))
    out = Outputs()
    out.add("csv", "trajectories.csv", lambda path: io.write_csv(
        path, ["t_kappa", "obs_mean", "obs_stderr"], data))
    out.add("svg", "trajectories.svg", lambda path: io.svg_lines(
        path, [("<a'a>", res.times, res.mean("n_photon"))], "t kappa", "<a'a>", "MCWF ensemble"))
    summary = {"seed": tc.seed, "n_traj": tc.n_traj,
               "n_photon": est["n_photon"], "g2_zero": est["g2"]}
    out.summary = summary
    out.seed = tc.seed
    out.add("json", "trajectories.json", lambda path: io.write_json(path, summary))
    return out


def _lattice_spec(cfg: dict) -> lat.LatticeSpec:
    sec = dict(cfg.get("lattice") or {})
    allowed = {"nx", "ny", "a_over_lambda", "wavelength", "w_over_a", "dipole", "gamma", "k_points"}
    _check_keys(sec, allowed, "lattice")
    lam = io.parse_quantity(sec.get("wavelength", 800e-9), "lattice.wavelength")
    a = float(sec.get("a_over_lambda", 0.6)) * lam
    try:
        return lat.LatticeSpec(nx=int(sec.get("nx", 60)), ny=int(sec.get("ny", sec.get("nx", 60))),
                               a=a, wavelength=lam, w=float(sec.get("w_over_a", 6.0)) * a,
                               dipole=tuple(sec.get("dipole", (1.0, 0.0, 0.0))),
                               gamma=io.parse_quantity(sec.get("gamma", 2 * math.pi * 6e6), "lattice.gamma"))
    except ValueError as exc:
        raise io.ConfigError(f"lattice: {exc}") from exc


def cmd_lattice_band(cfg: dict, args) -> Outputs:
    spec = _lattice_spec(cfg)
    n = int((cfg.get("lattice") or {}).get("k_points", 41))
    # Gamma -> X -> M path in units of 1/a
    edge = math.pi
    path = ([(t, 0.0) for t in np.linspace(0, edge, n)] +
            [(edge, t) for t in np.linspace(0, edge, n)[1:]])
    rows = []
    failed = []
    for kx_a, ky_a in path:
        try:
            s = lat.collective_shift_decay(spec, (kx_a / spec.a, ky_a / spec.a))
            rows.append((kx_a, ky_a, s.shift_over_gamma, s.decay_over_gamma, True))
        except lat.LatticeSumError as exc:
            # the shift diverges logarithmically on the light cone, so nearby points may not settle
            log.warning("%s", exc)
            failed.append((kx_a, ky_a))
            rows.append((kx_a, ky_a, math.nan, math.nan, False))
    if len(failed) == len(rows) or not rows[0][4]:
        raise lat.LatticeSumError(f"lattice band: {len(failed)} of {len(rows)} k points failed", [])
    out = Outputs()
    out.add("csv", "lattice_band.csv", lambda p: io.write_csv(
        p, ["kx_a", "ky_a", "shift_over_gamma", "decay_over_gamma", "converged"], rows))
    idx = np.arange(len(rows))
    out.add("svg", "lattice_band.svg", lambda p: io.svg_lines(
        p, [("shift/gamma", idx, [r[2] for r in rows]), ("decay/gamma", idx, [r[3] for r in rows])],
        "k index along Gamma-X-M", "units of gamma", f"a/lambda = {spec.a / spec.wavelength:.3g}"))
    out.summary = {"gamma0_over_gamma": rows[0][3],
                   "gamma0_diffraction_oracle": lat.diffraction_order_decay(spec, (0.0, 0.0)),
                   "shift0_over_gamma": rows[0][2], "failed_points": [list(f) for f in failed]}
    return out


def cmd_disorder_scan(cfg: dict, args) -> Outputs:
    spec = _lattice_spec(cfg)
    sec = dict(cfg.get("disorder") or {})
    sec.setdefault("eta_grid", [0.05, 0.075, 0.1, 0.15, 0.2])
    sec["eta_grid"] = tuple(float(e) for e in sec["eta_grid"])
    sec["seed"] = args.seed if args.seed is not None else int(sec.get("seed", 0))
    dc = io.build_dataclass(lat.DisorderConfig, sec, "disorder")
    try:
        scan = lat.disorder_scattering_scan(spec, dc)
    except ValueError as exc:
        raise io.ConfigError(f"disorder: {exc}") from exc
    data = list(zip(scan.eta, scan.mean, scan.stderr))
    out = Outputs()
    out.add("csv", "disorder_scan.csv", lambda p: io.write_csv(p, ["eta", "scatter_fraction", "stderr"], data))
    fit = scan.summary()
    out.add("json", "disorder_fit.json", lambda p: io.write_json(p, fit))
    out.add("svg", "disorder_scan.svg", lambda p: io.svg_lines(
        p, [("log10 fraction", np.log10(scan.eta), np.log10(scan.mean))], "log10 eta",
        "log10 scatter fraction", f"slope {scan.exponent:.3f}"))
    out.summary = fit
    out.seed = dc.seed
    return out


COMMANDS = {
    "map-params": cmd_map_params,
    "regime-map": cmd_regime_map,
    "g2-sweep": cmd_g2_sweep,
    "g2-tau": cmd_g2_tau,
    "spectrum": cmd_spectrum,
    "trajectories": cmd_trajectories,
    "lattice-band": cmd_lattice_band,
    "disorder-scan": cmd_disorder_scan,
}


def _formats(text: str) -> set:
    fm = {f.strip() for f in text.split(",") if f.strip()}
    bad = fm - set(FORMATS)
    if bad:
        raise argparse.ArgumentTypeError(f"unknown format(s): {', '.join(sorted(bad))}")
    return fm


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="atomarray-om", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("config", help="YAML or JSON config file")
        sp.add_argument("--out", default=".", help="output directory (created if missing)")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--format", type=_formats, default=set(FORMATS),
                        help="comma-separated subset of csv,json,svg")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = io.load_config(args.config)
        out = COMMANDS[args.command](cfg, args)
    except io.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (dyn.NonConvergenceError, lat.LatticeSumError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2

    outdir = Path(args.out)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"config error: output directory {outdir}: {exc}", file=sys.stderr)
        return 1
    written = []
    for name, (kind, fn) in out.writers.items():
        if kind in args.format:
            written.append(fn(outdir / name))
    seed = out.seed if out.seed is not None else args.seed
    man = io.manifest(args.command, cfg, seed, written)
    man["summary"] = out.summary
    io.write_json(outdir / "manifest.json", man)
    return 0


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
