"""Command-line experiment runner.

    weylstrip run CONFIG [--out DIR] [--threads N]
    weylstrip verify [--suite quick|full] [--seed N] [--out DIR] [--threads N]

Each run writes ``report.json`` (schema in ``docs/report.schema.json``),
``<kind>.csv`` and ``timings.json``.  Wall-clock timings are kept out of the
report so that identical configurations give byte-identical reports.

Exit codes: 0 all checks passed, 1 some check failed, 2 configuration error,
3 numerical failure (the failing stage is printed).
"""
import argparse
import contextlib
import csv
import json
import logging
import math
import os
import sys
import time
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .dirac import DiracPotential, propagate_u
from .disks import estimate_weyl
from .dnls import CWSolution, evolution_consistency
from .exceptions import ConfigError, NumericalFailure, WeylStripError
from .jets import QuasiClass, XJet, quasianalytic_check, t_derivatives, taylor_boundary
from .matkernel import opnorm
from .nwave import (
    NWaveConfig,
    NWavePotential,
    build_zeta,
    evolve_nwave,
    is_normalized,
    normalize_gw,
    nwave_weyl_grid,
    propagate_Rhat,
    propagate_w_scaled,
    psi_evolution_bound,
    psi_from_phi,
    psi_k,
    weyl_columns,
)
from .oracles import PlaneWaveNWave, constant_weyl, cw_slice_weyl

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_CHECKS, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

DEFAULT_Z_GRID = [[0.0, 0.5], [0.0, 1.0], [0.0, 2.0], [1.0, 1.0], [-1.0, 2.0]]


class StageFailure(NumericalFailure):
    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}': {type(cause).__name__}: {cause}")


def load_schema(name):
    return json.loads(resources.files("weylstrip.schemas").joinpath(name).read_text())


def validate_config(cfg):
    schema = load_schema("config.schema.json")
    kinds = {b["properties"]["kind"]["const"]: b for b in schema["oneOf"]}
    kind = cfg.get("kind") if isinstance(cfg, dict) else None
    if kind not in kinds:
        raise ConfigError(f"unknown kind {kind!r}; expected one of {sorted(kinds)}")
    # validate against the matching branch only, for readable messages
    branch = dict(kinds[kind], **{"$defs": schema["$defs"]})
    try:
        jsonschema.validate(cfg, branch, cls=jsonschema.Draft202012Validator)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {path}: {exc.message}") from None
    return cfg


def load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return validate_config(cfg)


# encoding helpers ---------------------------------------------------------
def cplx(z):
    z = complex(z)
    return [z.real, z.imag]


def cmat(a):
    a = np.asarray(a, dtype=complex)
    return [[cplx(v) for v in row] for row in a]


def parse_cplx(p):
    return complex(p[0], p[1])


def parse_cmat(rows):
    return np.array([[parse_cplx(v) for v in row] for row in rows], dtype=complex)


def flat_columns(prefix, shape):
    names = [f"{prefix}_re_{i}_{j}" for i in range(shape[0]) for j in range(shape[1])]
    return names + [f"{prefix}_im_{i}_{j}" for i in range(shape[0]) for j in range(shape[1])]


def flat_values(a):
    a = np.asarray(a, dtype=complex).ravel()
    return list(a.real) + list(a.imag)


def check(name, passed, value=None, threshold=None):
    def num(v):
        if v is None or isinstance(v, str):
            return v
        v = float(v)
        return v if math.isfinite(v) else str(v)
    return {"name": name, "passed": bool(passed), "value": num(value), "threshold": num(threshold)}


@contextlib.contextmanager
def stage(name, timings):
    t0 = time.perf_counter()
    try:
        yield
    except StageFailure:
        raise
    except NumericalFailure as exc:
        raise StageFailure(name, exc) from exc
    finally:
        timings[name] = timings.get(name, 0.0) + time.perf_counter() - t0


# experiments ---------------------------------------------------------------
def _dirac_potential(entry):
    fam = entry["family"]
    if fam == "zero":
        return DiracPotential.zero(entry.get("m1", 1), entry.get("m2", 1)), lambda z: np.zeros(
            (entry.get("m2", 1), entry.get("m1", 1)), dtype=complex)
    if fam == "constant":
        value = parse_cmat(entry["value"])
        return DiracPotential.constant(value), lambda z: constant_weyl(value, z)
    t = entry.get("t", 0.0)
    cw = CWSolution(entry["A"], entry["k"])
    return cw.slice_at(t), lambda z: cw_slice_weyl(cw.A, cw.k, z, phase=-cw.omega * t)


def run_weyl_estimate(cfg, threads, timings):
    pot, oracle = _dirac_potential(cfg["potential"])
    zs = sorted((parse_cplx(p) for p in cfg["z_grid"]), key=lambda z: (z.real, z.imag))
    tol = cfg.get("tol", 1e-10)
    results, rows, checks = [], [], []
    shape = (pot.split.bottom, pot.split.top)
    header = ["z_re", "z_im"] + flat_columns("phi", shape) + ["error_bound", "x_max_used"]
    with stage("estimate", timings):
        ests = _pool_map(lambda z: estimate_weyl(pot, z, x_max=cfg.get("x_max"), tol=tol), zs, threads)
    with stage("oracle", timings):
        for z, est in zip(zs, ests):
            ref = oracle(z)
            dev = opnorm(est.value - ref)
            allowed = max(1e-6, 2 * est.error_bound)
            results.append({"z": cplx(z), "value": cmat(est.value), "error_bound": est.error_bound,
                            "x_max_used": est.x_max, "oracle_deviation": dev})
            rows.append([z.real, z.imag] + flat_values(est.value) + [est.error_bound, est.x_max])
            checks.append(check(f"contractive z={z}", opnorm(est.value) <= 1 + est.error_bound + 1e-8,
                                opnorm(est.value), 1 + est.error_bound))
            checks.append(check(f"oracle z={z}", dev <= allowed, dev, allowed))
    return results, header, rows, checks, {}


def run_dnls_evolve(cfg, threads, timings):
    sol = cfg["solution"]
    cw = CWSolution(sol["A"], sol["k"])
    zs = [parse_cplx(p) for p in cfg.get("z_grid", DEFAULT_Z_GRID)]
    tols = cfg.get("tols", [1e-6, 1e-8, 1e-10])
    limit = cfg.get("max_deviation", 1e-5)
    t = cfg["t"]
    results, rows, levels = [], [], []
    header = ["z_re", "z_im", "tol", "deviation", "bound_direct", "bound_initial"]
    for tol in tols:
        with stage(f"consistency tol={tol:g}", timings):
            rep = evolution_consistency(cw, zs, t, tol=tol, threads=threads)
        levels.append(rep.max_deviation)
        for p in rep.points:
            results.append({"z": cplx(p.z), "tol": tol, "deviation": p.deviation,
                            "phi_direct": cmat(p.phi_direct), "phi_evolved": cmat(p.phi_evolved),
                            "bound_direct": p.bound_direct, "bound_initial": p.bound_initial})
            rows.append([p.z.real, p.z.imag, tol, p.deviation, p.bound_direct, p.bound_initial])
    final = levels[-1]
    checks = [check("max_deviation", final <= limit, final, limit)]
    if len(levels) > 1:
        mono = all(b < a for a, b in zip(levels, levels[1:]))
        checks.append(check("monotone refinement", mono, None, None))
    summary = {"max_deviation": final, "refinement": levels, "omega": cw.omega}
    return results, header, rows, checks, summary


def _initial_jet(entry, order):
    fam = entry["family"]
    if fam == "cw":
        return XJet.exponential(entry["A"], entry["k"], order)
    if fam == "constant":
        return XJet.constant(entry["A"], order)
    coeffs = [parse_cplx(c) for c in entry["coeffs"]]
    return XJet(coeffs[: order + 1])


def run_recover_boundary(cfg, threads, timings):
    entry = cfg["initial"]
    r = cfg["r"]
    order = cfg.get("order", 2 * r + 1)
    if entry["family"] == "jet":
        order = min(order, len(entry["coeffs"]) - 1)
    init = _initial_jet(entry, order)
    with stage("recursion", timings):
        jets = t_derivatives(init, r, cfg.get("trust_radius"))
    qc = None
    if "quasi" in cfg:
        q = cfg["quasi"]
        qc = QuasiClass(sequence=q.get("sequence"), gevrey=q.get("gevrey"), c=q.get("c", 1.0))
    results, rows, checks = [], [], []
    header = ["k", "b_re", "b_im", "bx_re", "bx_im"]
    for k in range(r + 1):
        b, bx = jets.b[k, 0, 0], jets.bx[k, 0, 0]
        results.append({"k": k, "b": cmat(jets.b[k]), "bx": cmat(jets.bx[k])})
        rows.append([k, b.real, b.imag, bx.real, bx.imag])
    if entry["family"] in ("cw", "constant"):
        A = entry["A"]
        kk = entry.get("k", 0.0)
        w = (kk * kk + 2 * A * A) / 2
        ref = np.array([A * (-1j * w) ** n for n in range(r + 1)])
        scale = np.maximum(np.abs(ref), 1e-300)
        rel_b = float(np.max(np.abs(jets.b[:, 0, 0] - ref) / scale)) if A else float(np.abs(jets.b).max())
        rel_bx = float(np.max(np.abs(jets.bx[:, 0, 0] - 1j * kk * ref) / scale)) if A else float(np.abs(jets.bx).max())
        checks.append(check("b_k closed form", rel_b <= 1e-8, rel_b, 1e-8))
        checks.append(check("bx_k closed form", rel_bx <= 1e-8, rel_bx, 1e-8))
    evals = []
    for t in cfg.get("t_eval", []):
        with stage("taylor", timings):
            tb = taylor_boundary(jets, t, qc)
        evals.append({"t": t, "v": cmat(tb.v), "vx": cmat(tb.vx), "remainder": tb.remainder})
    summary = {"taylor": evals}
    if qc is not None:
        summary["quasi_verdict"] = quasianalytic_check(qc).value
    return results, header, rows, checks, summary


def run_nwave_evolve(cfg, threads, timings):
    D = np.array(cfg["D"], dtype=float)
    Dh = np.array(cfg["Dhat"], dtype=float)
    sol = cfg["solution"]
    m = D.size
    if sol["family"] == "plane-wave":
        if m != 2:
            raise ConfigError("the plane-wave family needs m = 2")
        a = parse_cplx(sol["a"])
        pw = PlaneWaveNWave(a, sol["kappa"], tuple(D), tuple(Dh))
        pot = NWavePotential(pw.rho)
        M0, Mhat = abs(a) * abs(D[0] - D[1]), abs(a) * abs(Dh[0] - Dh[1])
    else:
        pw = None
        pot = NWavePotential.zero(m)
        M0 = Mhat = 0.0
    ncfg = NWaveConfig(D, Dh, M0, cfg.get("M"), Mhat)
    zs = sorted((parse_cplx(p) for p in cfg["z_grid"]), key=lambda z: (z.real, z.imag))
    for z in zs:
        if not z.imag < -ncfg.M:
            raise ConfigError(f"z={z} must satisfy Im z < -M = {-ncfg.M:g}")
    tol = cfg.get("tol", 1e-8)
    limit = cfg.get("max_deviation", 1e-6)
    t = cfg["t"]
    results, rows, checks = [], [], []
    header = ["z_re", "z_im", "deviation", "growth_bound_max"]
    with stage("initial weyl", timings):
        initial = nwave_weyl_grid(ncfg, pot, zs, 0.0, tol, threads)
    with stage("direct weyl", timings):
        direct = nwave_weyl_grid(ncfg, pot, zs, t, tol, threads)
    worst_dev, worst_bound = 0.0, 0.0
    for z, e0, e1 in zip(zs, initial, direct):
        with stage("evolution", timings):
            R = propagate_Rhat(ncfg, pot, t, z)
            evolved = evolve_nwave(ncfg, e0.phi, R)
            bounds = [psi_evolution_bound(ncfg, R, psi_from_phi(e0.phi, k), k) for k in range(1, m)]
        dev = opnorm(evolved - e1.phi)
        if pw is not None:
            dev = max(dev, opnorm(evolved - pw.weyl(z, t)))
        worst_dev, worst_bound = max(worst_dev, dev), max(worst_bound, max(bounds))
        results.append({"z": cplx(z), "phi_initial": cmat(e0.phi), "phi_direct": cmat(e1.phi),
                        "phi_evolved": cmat(evolved), "deviation": dev, "growth_bounds": bounds,
                        "converged": bool(e0.converged and e1.converged)})
        rows.append([z.real, z.imag, dev, max(bounds)])
    checks.append(check("max_deviation", worst_dev <= limit, worst_dev, limit))
    checks.append(check("growth bound", worst_bound <= 2 + 1e-8, worst_bound, 2 + 1e-8))
    checks.append(check("normalized", all(is_normalized(parse_cmat(r["phi_evolved"])) for r in results)))
    summary = {"max_deviation": worst_dev, "M": ncfg.M, "M0": M0, "Mhat": Mhat}
    return results, header, rows, checks, summary


def _random_potential(rng, m1, m2, bound=2.0, terms=4):
    amps = rng.normal(size=(terms, m1, m2)) + 1j * rng.normal(size=(terms, m1, m2))
    ks = rng.uniform(-3, 3, size=terms)
    phases = rng.uniform(0, 2 * np.pi, size=terms)
    amps *= bound * rng.uniform(0.3, 1.0) / sum(opnorm(a) for a in amps)

    def v(x):
        return np.tensordot(np.exp(1j * (ks * x + phases)), amps, axes=1)

    def vx(x):
        return np.tensordot(1j * ks * np.exp(1j * (ks * x + phases)), amps, axes=1)

    return DiracPotential((m1, m2), v, vx, bound=bound)


def _random_hermitian(rng, m, scale):
    a = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    a = a + a.conj().T
    return scale * a / opnorm(a)


def _random_normalized(rng, m):
    phi = np.triu(rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m)), 1)
    return phi + np.eye(m)


def run_verify(cfg, threads, timings):
    seed = cfg.get("seed", 0)
    full = cfg.get("suite", "quick") == "full"
    rng = np.random.default_rng(seed)
    checks, results = [], []
    summary_extra = {}
    header = ["check", "passed", "value", "threshold"]

    with stage("j-conservation", timings):
        # relative to |u|^2: in a spectral gap u grows and the absolute
        # defect is bounded below by rounding, eps * |u|^2
        worst = worst_abs = 0.0
        for i in range(20 if full else 3):
            m1, m2 = (2, 1) if i == 0 else (1, 1)
            pot = _random_potential(rng, m1, m2)
            j = pot.split.j()
            for z in (0.7, -0.7, 2.0):
                u = propagate_u(pot, 10.0, z).u
                d = opnorm(u.conj().T @ j @ u - j)
                worst_abs = max(worst_abs, d)
                worst = max(worst, d / max(1.0, opnorm(u) ** 2))
        checks.append(check("j-conservation (relative)", worst <= 1e-12, worst, 1e-12))
        summary_extra["j_defect_absolute"] = worst_abs

    with stage("constant oracle", timings):
        est = estimate_weyl(DiracPotential.constant(1.0), 1j, x_max=15.0)
        dev = abs(est.value[0, 0] - 1j * (math.sqrt(2) - 1))
        lim = max(1e-6, 2 * est.error_bound)
        checks.append(check("constant-potential weyl", dev <= lim, dev, lim))

    with stage("psi contractivity", timings):
        worst = 0.0
        for i in range(20 if full else 4):
            m = 2 + i % 2
            D = np.arange(m, 0, -1, dtype=float)
            rho = _random_hermitian(rng, m, 0.2)
            zeta = build_zeta(D, rho)
            ncfg = NWaveConfig(D, D, opnorm(zeta))
            z = complex(rng.uniform(-1, 1), -ncfg.M - rng.uniform(0.5, 2))
            prop = propagate_w_scaled(ncfg, NWavePotential.constant(rho), 2.0, z)
            for k in range(1, m):
                worst = max(worst, opnorm(psi_k(ncfg, prop, k)))
        checks.append(check("psi contractivity", worst <= 1 + 1e-10, worst, 1 + 1e-10))

    with stage("roundtrip", timings):
        worst = 0.0
        for i in range(100 if full else 20):
            phi = _random_normalized(rng, 3 + i % 2)
            m = phi.shape[0]
            back = weyl_columns([psi_from_phi(phi, k) for k in range(1, m)])
            worst = max(worst, np.abs(back - phi).max())
        checks.append(check("columns roundtrip", worst <= 1e-12, worst, 1e-12))

    with stage("normalization", timings):
        ok = True
        for _ in range(20 if full else 5):
            raw = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
            ok &= is_normalized(normalize_gw(raw))
        checks.append(check("gw normalization", ok))

    with stage("jets", timings):
        A, k = 0.5, 1.0
        w = (k * k + 2 * A * A) / 2
        jets = t_derivatives(XJet.exponential(A, k, 13), 6)
        ref = np.array([A * (-1j * w) ** n for n in range(7)])
        rel = float(np.max(np.abs(jets.b[:, 0, 0] - ref) / np.abs(ref)))
        checks.append(check("cw boundary jets", rel <= 1e-8, rel, 1e-8))

    with stage("denjoy-carleman", timings):
        verdicts = {s: quasianalytic_check(QuasiClass(gevrey=s)).value for s in (0.5, 1.0, 1.5, 2.0)}
        ok = [verdicts[0.5], verdicts[1.0]] == ["quasi-analytic"] * 2 and \
            [verdicts[1.5], verdicts[2.0]] == ["not-quasi-analytic"] * 2
        checks.append(check("gevrey classification", ok))

    for c in checks:
        results.append(dict(c))
    rows = [[c["name"], c["passed"], c["value"], c["threshold"]] for c in checks]
    return results, header, rows, checks, {"suite": cfg.get("suite", "quick"), **summary_extra}


RUNNERS = {
    "weyl-estimate": run_weyl_estimate,
    "dnls-evolve": run_dnls_evolve,
    "recover-boundary": run_recover_boundary,
    "nwave-evolve": run_nwave_evolve,
    "verify": run_verify,
}


def _pool_map(fn, items, threads):
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def execute(cfg, out_dir, threads=1):
    """Run a validated config and write the output files; returns the report."""
    kind = cfg["kind"]
    timings = {}
    try:
        results, header, rows, checks, summary = RUNNERS[kind](cfg, threads, timings)
    except WeylStripError as exc:
        if isinstance(exc, (NumericalFailure, ConfigError)):
            raise
        raise ConfigError(str(exc)) from exc
    csv_name = f"{kind}.csv"
    report = {
        "tool": "weylstrip",
        "version": __version__,
        "kind": kind,
        "config": cfg,
        "seed": cfg.get("seed", 0),
        "results": results,
        "checks": checks,
        "summary": summary,
        "passed": all(c["passed"] for c in checks),
        "csv": csv_name,
    }
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    with open(out / csv_name, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    (out / "timings.json").write_text(json.dumps(
        {k: round(v, 6) for k, v in sorted(timings.items())}, indent=2) + "\n")
    return report


def _threads(arg):
    if arg is not None:
        return arg
    env = os.environ.get("WEYLSTRIP_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"WEYLSTRIP_THREADS must be an integer, got {env!r}") from None
    return 1


def build_parser():
    p = argparse.ArgumentParser(prog="weylstrip", description="Weyl-function experiments.")
    p.add_argument("--version", action="version", version=f"weylstrip {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=".", help="output directory (default: current)")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: $WEYLSTRIP_THREADS or 1)")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", parents=[common], help="run an experiment config")
    r.add_argument("config")
    v = sub.add_parser("verify", parents=[common], help="run a built-in verification suite")
    v.add_argument("--suite", choices=["quick", "full"], default="quick")
    v.add_argument("--seed", type=int, default=0)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        threads = _threads(args.threads)
        if threads < 1:
            raise ConfigError("--threads must be at least 1")
        if args.command == "run":
            cfg = load_config(args.config)
        else:
            cfg = validate_config({"kind": "verify", "suite": args.suite, "seed": args.seed})
        report = execute(cfg, args.out, threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageFailure as exc:
        print(f"numerical failure in {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for c in report["checks"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}")
    return EXIT_OK if report["passed"] else EXIT_CHECKS


if __name__ == "__main__":
    sys.exit(main())
