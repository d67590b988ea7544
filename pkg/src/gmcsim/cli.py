"""Command line front end: ``gmcsim <command> --config run.yaml --seed N``.

Every command writes ``<command>-<seed>.csv`` and/or ``.json`` into the
output directory, each starting with a header that records the config
digest, seed and library versions, and prints a one-line summary.

Exit codes: 0 ok, 1 a check failed, 2 invalid input, 3 budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import platform
import sys

import numpy as np
import scipy

from . import __version__
from .analysis import (
    disk_transform,
    envelope_fit,
    fourier_decay,
    holder_exponent,
    line_distance,
    local_dimension,
    mean_length_oracle,
    projection_field,
    quantum_length,
)
from .config import RunConfig, load_config
from .criteria import ThresholdInput, threshold_report
from .domain import DISK, Curve, Line, chord_length
from .errors import BudgetError, GmcError
from .gff.exact import FieldSample, sample_values
from .gff.grid import Lattice, calibrate_grid, circle_weights, sample_lattice, target_variance
from .gff.nodes import NodeSet, build_covariance
from .gmc import GmcApproximant, GridLadder, _reweight, convergence_report, gmc_weight, grid_mass_ladder, mass_ladder
from .measures import AtomList, IfsSpec, chord_atoms, curve_atoms, growth_exponent, ifs_atoms, lebesgue_atoms

COMMANDS = ("thresholds", "simulate", "dimension", "project", "fourier", "holder", "quantum-length", "calibrate-grid")


class CheckFailed(Exception):
    pass


# ------------------------------------------------------------------ output

def header(cfg: RunConfig, command, seed, overrides):
    return {
        "command": command, "config_digest": cfg.digest, "seed": seed, "overrides": overrides,
        "versions": {"gmcsim": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
    }


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_outputs(cfg, command, seed, head, columns=None, rows=None, report=None):
    os.makedirs(cfg.out, exist_ok=True)
    stem = os.path.join(cfg.out, f"{command}-{seed if seed is not None else 'none'}")
    paths = []
    if columns is not None:
        with open(stem + ".csv", "w") as fh:
            fh.write("# " + json.dumps(head, sort_keys=True) + "\n")
            fh.write(",".join(columns) + "\n")
            for r in rows:
                fh.write(",".join(_fmt(v) for v in r) + "\n")
        paths.append(stem + ".csv")
    if report is not None:
        with open(stem + ".json", "w") as fh:
            json.dump({"header": head, "report": report}, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")
        paths.append(stem + ".json")
    return paths


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    return str(o)


# ---------------------------------------------------------------- builders

def _need_seed(cfg):
    if cfg.seed is None:
        raise GmcError("bad-config", "seed: missing (give it in the config or with --seed)")
    return cfg.seed


def build_curve(d):
    if not isinstance(d, dict):
        raise GmcError("bad-config", "measure.curve: expected a mapping")
    kind = d.get("type", "segment")
    try:
        if kind == "segment":
            return Curve.segment(d["p0"], d["p1"])
        if kind == "arc":
            return Curve.arc(d["center"], d["radius"], d.get("start", 0.0), d["sweep"])
        if kind == "polyline":
            return Curve.polyline(d["nodes"])
    except KeyError as exc:
        raise GmcError("bad-config", f"measure.curve.{exc.args[0]}: missing") from None
    raise GmcError("bad-config", f"measure.curve.type: unknown curve {kind!r}")


def build_ifs(m):
    try:
        return IfsSpec(tuple(m["ratios"]), tuple(m.get("angles", [0.0] * len(m["ratios"]))),
                       tuple(tuple(t) for t in m["translations"]), tuple(m["probs"]), int(m.get("depth", 8)))
    except KeyError as exc:
        raise GmcError("bad-config", f"measure.{exc.args[0]}: missing") from None


def build_atoms(cfg: RunConfig):
    m = cfg.measure
    kind = m["kind"]
    if kind == "lebesgue":
        return lebesgue_atoms(cfg.domain, float(m.get("h", 1 / 32)))
    if kind == "chord":
        return chord_atoms(cfg.domain, Line(float(m.get("theta", 0.0)), float(m.get("u", 0.0))), float(m.get("h", 1 / 64)))
    if kind == "curve":
        c = build_curve(m.get("curve"))
        return curve_atoms(c, c.interval[1], float(m.get("h", 1 / 64)))
    return ifs_atoms(build_ifs(m), cfg.domain)


def base_alpha(cfg):
    m = cfg.measure
    if "alpha1" in m:
        return float(m["alpha1"])
    return {"lebesgue": 2.0, "chord": 1.0, "curve": 1.0}.get(m["kind"]) or growth_exponent(build_ifs(m))


def _interior(atoms: AtomList, domain):
    return atoms.subset(domain.contains(atoms.points))


# ---------------------------------------------------------------- commands

def cmd_thresholds(cfg, args, head):
    t = cfg.section("thresholds")
    inp = ThresholdInput(float(t.get("alpha1", 1.0)), float(t.get("alpha2", 1.0)), float(t.get("alpha2prime", 0.5)),
                         int(t.get("k", 2)), cfg.gamma if cfg.gamma else 0.0)
    rep = threshold_report(inp)
    print(json.dumps(rep, sort_keys=True))
    if args.out is not None or cfg.sections.get("write"):
        write_outputs(cfg, "thresholds", cfg.seed, head, report=rep)
    return True, f"thresholds: mcond {'holds' if rep['mcond'] else 'fails'} (margin {rep['margin']:.6g})"


def cmd_simulate(cfg, args, head):
    seed = _need_seed(cfg)
    if cfg.backend == "lattice":
        if cfg.measure["kind"] != "lebesgue":
            raise GmcError("bad-config", "backend: the lattice backend supports the lebesgue measure only")
        lad = grid_mass_ladder(cfg.domain, cfg.cells, cfg.gamma, cfg.n0, cfg.n1, cfg.replicates, seed, cfg.M, args.jobs)
    else:
        atoms = _interior(build_atoms(cfg), cfg.domain)
        lad = mass_ladder(atoms, cfg.domain, cfg.gamma, cfg.n0, cfg.n1, cfg.replicates, seed, cfg.M, jobs=args.jobs)
    rows = [(r, n, lad.Y[r, j]) for r in range(lad.reps) for j, n in enumerate(lad.levels)]
    means = lad.Y.mean(axis=0)
    se = lad.Y.std(axis=0, ddof=1) / math.sqrt(lad.reps) if lad.reps > 1 else np.zeros_like(means)
    report = {"levels": lad.levels.tolist(), "mean": means.tolist(), "se": se.tolist(), "provenance": lad.provenance}
    ok, summary = True, "simulate: ladder written"
    if lad.levels.size >= 4 and lad.reps >= 100 or cfg.gamma == 0:
        cr = convergence_report(lad, cfg.tolerances["p"], base_alpha(cfg), cfg.tolerances["slack"],
                                min_reps=1 if cfg.gamma == 0 else 100, min_levels=2 if cfg.gamma == 0 else 4)
        report["convergence"] = cr.to_dict()
        ok = cr.passed
        tag = "degenerate " if cr.degenerate else ""
        summary = (f"simulate: slope {cr.slope_hat:.3f} vs threshold {-cr.bound + cr.slack:.3f}, "
                   f"{tag}{'PASS' if ok else 'FAIL'}")
    write_outputs(cfg, "simulate", seed, head, ["replicate", "level", "mass"], rows, report)
    return ok, summary


def _dimension_approx(cfg, seed, r, gl=None):
    n = cfg.n1
    if gl is not None:
        if cfg.gamma == 0:
            base = gl.node_atoms()
            return GmcApproximant(n, 0.0, base, base)
        f = gl.field(seed, r)
        base = gl.node_atoms()
        v = gl.node_values(f)[0]
        w = _reweight(base.weights, v, n, cfg.gamma)
        return GmcApproximant(n, cfg.gamma, AtomList(base.points, w, base.provenance), base)
    atoms = _interior(build_atoms(cfg), cfg.domain)
    if cfg.gamma == 0:
        return GmcApproximant(n, 0.0, atoms, atoms)
    nodes = NodeSet(atoms.points, np.full(len(atoms), 2.0**-n), cfg.domain)
    vals = sample_values(build_covariance(nodes, cfg.M), 1, seed, start=r)[0]
    return gmc_weight(atoms, FieldSample(vals, seed, r, nodes), n, cfg.gamma)


def cmd_dimension(cfg, args, head):
    seed = _need_seed(cfg)
    sec = cfg.section("dimension")
    lo, hi = sec.get("radii", [4, 7])
    radii = 2.0 ** -np.arange(int(lo), int(hi) + 1)
    npts = int(sec.get("points", 200))
    collar = float(sec.get("collar", 0.0))
    gl = GridLadder(cfg.domain, cfg.cells, [cfg.n1], cfg.M) if cfg.backend == "lattice" else None
    alpha = base_alpha(cfg)
    means, rows = [], []
    for r in range(cfg.replicates):
        ap = _dimension_approx(cfg, seed, r, gl)
        mesh = gl.h if gl else ap.base.provenance.get("h")
        rep = local_dimension(ap, radii, npts, seed, r, alpha, collar, cfg.domain, mesh=mesh)
        means.append(rep.mean)
        rows += [(r, p.real, p.imag, s) for p, s in zip(rep.points, rep.slopes)]
    mean = float(np.mean(means))
    se = float(np.std(means, ddof=1) / math.sqrt(len(means))) if len(means) > 1 else 0.0
    target = alpha - cfg.gamma**2 / 2
    band = cfg.tolerances["dimension_band"]
    ok = abs(mean - target) <= band
    report = {"replicate_means": means, "mean": mean, "se": se, "target": target, "band": band, "pass": ok}
    write_outputs(cfg, "dimension", seed, head, ["replicate", "x", "y", "slope"], rows, report)
    return ok, f"dimension: mean slope {mean:.2f} ± {se:.2f}, target {target:.3f} ± {band}, {'PASS' if ok else 'FAIL'}"


def _theta_u(sec, default_t, default_u, closed):
    nt = int(sec.get("thetas", default_t))
    nu = int(sec.get("us", default_u))
    th = np.arange(nt) * np.pi / nt
    u = np.linspace(-1, 1, nu) if closed else -1 + (np.arange(nu) + 0.5) * 2 / nu
    return th, u


def _disk_only(cfg):
    if cfg.domain.kind != DISK:
        raise GmcError("bad-config", "domain.kind: this command needs the disk")
    if cfg.domain.center != 0:
        raise GmcError("bad-config", "domain.offset: this command needs a disk centred at the origin")


def cmd_project(cfg, args, head):
    seed = _need_seed(cfg)
    _disk_only(cfg)
    sec = cfg.section("project")
    th, u = _theta_u(sec, 16, 257, closed=True)
    u = u * cfg.domain.scale
    h = float(sec.get("h", 2.0**-8))
    pf = projection_field(cfg.domain, cfg.gamma, th, u, h, seed, cfg.n1, cfg.cells, M=cfg.M)
    rows = list(pf.rows())
    if cfg.gamma == 0:
        err = float(np.max(np.abs(pf.Y - chord_length(cfg.domain, th[:, None], u[None, :]))))
        ok = err < cfg.tolerances["exact"]
        report = {"max_abs_error": err, "integrated": pf.integrated().tolist(), "pass": ok}
        summary = f"project: max |Y - chord length| = {err:.3g}, {'PASS' if ok else 'FAIL'}"
    else:
        fe = pf.fubini_errors()
        ok = bool(np.all(fe <= cfg.tolerances["fubini"]))
        report = {"planar_mass": pf.planar_mass, "integrated": pf.integrated().tolist(),
                  "relative_gap": fe.tolist(), "pass": ok}
        summary = f"project: max Fubini gap {fe.max():.3%} over {th.size} directions, {'PASS' if ok else 'FAIL'}"
    write_outputs(cfg, "project", seed, head, ["theta", "u", "Y"], rows, report)
    return ok, summary


def cmd_fourier(cfg, args, head):
    seed = _need_seed(cfg)
    _disk_only(cfg)
    sec = cfg.section("fourier")
    dirs = np.arange(int(sec.get("directions", 8))) * np.pi / int(sec.get("directions", 8))
    fr = (float(sec.get("freq_min", 2 * np.pi)), float(sec.get("freq_max", 64 * np.pi)))
    nf = int(sec.get("n_freqs", 256))
    bins = int(sec.get("bins", 8))
    gl = GridLadder(cfg.domain, cfg.cells, [cfg.n1], cfg.M)
    base = gl.node_atoms()
    betas, rows = [], []
    for r in range(cfg.replicates if cfg.gamma else 1):
        if cfg.gamma:
            w = _reweight(base.weights, gl.node_values(gl.field(seed, r))[0], cfg.n1, cfg.gamma)
        else:
            w = base.weights
        rep = fourier_decay(base.points, w, dirs, fr, nf, bins)
        betas.append(rep.pooled_beta)
        rows += [(r, phi, b) for phi, b in zip(rep.directions, rep.beta_hat)]
    k = np.geomspace(fr[0], fr[1], nf)
    oracle = envelope_fit(k, disk_transform(k, cfg.domain.scale), bins)[0]
    if cfg.gamma == 0:
        ok = abs(betas[0] - oracle) <= cfg.tolerances["fourier_control"]
        summary = f"fourier: pooled beta {betas[0]:.3f} vs disk oracle {oracle:.3f}, {'PASS' if ok else 'FAIL'}"
    else:
        ok = min(betas) > cfg.tolerances["fourier_min_beta"]
        summary = f"fourier: pooled beta min {min(betas):.3f} over {len(betas)} replicates, {'PASS' if ok else 'FAIL'}"
    report = {"pooled_beta": betas, "disk_oracle_beta": oracle, "pass": ok}
    write_outputs(cfg, "fourier", seed, head, ["replicate", "direction", "beta_hat"], rows, report)
    return ok, summary


def cmd_holder(cfg, args, head):
    seed = _need_seed(cfg)
    _disk_only(cfg)
    sec = cfg.section("holder")
    th, u = _theta_u(sec, 32, 64, closed=False)
    u = u * cfg.domain.scale
    h = float(sec.get("h", 2.0**-7))
    gl = GridLadder(cfg.domain, cfg.cells, [cfg.n1], cfg.M) if cfg.gamma else None
    P = np.stack(np.meshgrid(th, u, indexing="ij"), -1).reshape(-1, 2)
    betas, rows = [], []
    for r in range(cfg.replicates):
        pf = projection_field(cfg.domain, cfg.gamma, th, u, h, seed, cfg.n1, cfg.cells, replicate=r, ladder=gl, M=cfg.M)
        rep = holder_exponent(P, pf.Y.ravel(), metric=line_distance)
        betas.append(rep.beta_hat)
        rows += [(r, s, v) for s, v in zip(rep.scales, rep.sup_increments)]
    frac = float(np.mean(np.array(betas) > 0))
    ok = frac >= cfg.tolerances["holder_fraction"]
    report = {"beta_hat": betas, "positive_fraction": frac, "pass": ok}
    write_outputs(cfg, "holder", seed, head, ["replicate", "scale", "sup_increment"], rows, report)
    return ok, f"holder: beta_hat > 0 in {int(round(frac * len(betas)))}/{len(betas)} replicates, {'PASS' if ok else 'FAIL'}"


def cmd_quantum_length(cfg, args, head):
    seed = _need_seed(cfg)
    sec = cfg.section("quantum_length")
    m = cfg.measure if cfg.measure.get("kind") == "curve" else {}
    curve = build_curve(sec.get("curve") or m.get("curve") or {"type": "segment", "p0": [-0.5, 0], "p1": [0.5, 0]})
    a, b = curve.interval
    t = np.linspace(a, b, int(sec.get("t_points", 65)))
    h = float(sec.get("h", m.get("h", 1 / 128)))
    L = quantum_length(curve, cfg.gamma, t, h, seed, cfg.domain, cfg.n1, cfg.replicates, cfg.M)
    inc = bool(np.all(np.diff(L, axis=1) > 0))
    oracle = mean_length_oracle(curve, cfg.gamma, cfg.domain)
    mean = float(L[:, -1].mean())
    report = {"strictly_increasing": inc, "mean_total": mean, "oracle": oracle}
    ok = inc
    if cfg.gamma == 0:
        err = float(np.max(np.abs(L - (t - a))))
        ok = ok and err <= h
        report["max_error"] = err
    elif L.shape[0] > 1:
        se = float(L[:, -1].std(ddof=1) / math.sqrt(L.shape[0]))
        report["se"] = se
        ok = ok and abs(mean - oracle) <= cfg.tolerances["se_multiple"] * se
    report["pass"] = ok
    rows = [(r, tt, L[r, i]) for r in range(L.shape[0]) for i, tt in enumerate(t)]
    write_outputs(cfg, "quantum-length", seed, head, ["replicate", "t", "L"], rows, report)
    return ok, f"quantum-length: E[L(b)] = {mean:.4f} vs {oracle:.4f}, increasing={inc}, {'PASS' if ok else 'FAIL'}"


def cmd_calibrate_grid(cfg, args, head):
    seed = _need_seed(cfg)
    sec = cfg.section("calibrate_grid")
    N = int(sec.get("N", 63))
    eps = float(sec.get("eps", 0.125))
    method = sec.get("method", "exact")
    reps = int(sec.get("reps", max(cfg.replicates, 2000)))
    recheck = int(sec.get("recheck_reps", reps))
    dom = cfg.domain if cfg.domain.kind != DISK else None
    c = calibrate_grid(N, eps, reps, seed, cfg.M, method, store=True, domain=dom)
    lat = Lattice.square(N, dom)
    w = circle_weights(lat, lat.domain.center, eps, cfg.M)
    fresh = (seed + 1) % 2**64
    vals = np.array([np.sum(w * sample_lattice(lat, fresh, i, c).values) for i in range(recheck)])
    target = target_variance(lat.domain, lat.domain.center, eps)
    ratio = float(np.mean(vals**2) / target)
    ok = abs(ratio - 1) <= cfg.tolerances["calibration"]
    report = {"N": N, "eps": eps, "method": method, "factor": c, "recheck_ratio": ratio, "recheck_reps": recheck,
              "pass": ok}
    write_outputs(cfg, "calibrate-grid", seed, head, ["N", "eps", "factor", "recheck_ratio"], [(N, eps, c, ratio)], report)
    return ok, f"calibrate-grid: factor {c:.6f}, recheck ratio {ratio:.4f}, {'PASS' if ok else 'FAIL'}"


HANDLERS = {
    "thresholds": cmd_thresholds, "simulate": cmd_simulate, "dimension": cmd_dimension, "project": cmd_project,
    "fourier": cmd_fourier, "holder": cmd_holder, "quantum-length": cmd_quantum_length,
    "calibrate-grid": cmd_calibrate_grid,
}


def parser():
    p = argparse.ArgumentParser(prog="gmcsim", description="Simulate Gaussian multiplicative chaos and check its predicted behaviour.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", metavar="PATH", help="YAML run configuration")
    p.add_argument("--seed", type=int, metavar="U64", help="random seed (overrides the config)")
    p.add_argument("--out", metavar="DIR", help="output directory (overrides the config)")
    p.add_argument("--reps", type=int, metavar="N", help="replicate count (overrides the config)")
    p.add_argument("--jobs", type=int, default=1, metavar="N", help="worker threads (results do not depend on it)")
    return p


def main(argv=None):
    args = parser().parse_args(argv)
    try:
        text = b""
        if args.config:
            try:
                with open(args.config, "rb") as fh:
                    text = fh.read()
            except OSError as exc:
                raise GmcError("bad-config", f"cannot read {args.config}: {exc.strerror}") from None
        overrides = {"seed": args.seed, "out": args.out, "replicates": args.reps}
        cfg = load_config(text, overrides)
        if args.jobs < 1:
            raise GmcError("bad-config", "jobs: must be at least 1")
        head = header(cfg, args.command, cfg.seed, 
                      {k: v for k, v in overrides.items() if v is not None and k != "out"})
        ok, summary = HANDLERS[args.command](cfg, args, head)
    except BudgetError as exc:
        print(f"error [{exc.code}]: {exc.message}", file=sys.stderr)
        return exc.exit_code
    except GmcError as exc:
        print(f"error [{exc.code}]: {exc.message}", file=sys.stderr)
        return exc.exit_code
    print(summary)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
