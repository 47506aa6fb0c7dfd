"""Command-line front end: ``potlab {eval,capacity,criteria,solve,verify}``.

Every command reads an optional JSON config (``--config``), writes JSON and
CSV reports into ``--out`` and encodes its verdict in the exit status:
0 pass/converged, 2 fail/diverged, 3 divergent integral, 1 error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from . import config as cfgmod
from .axisym import AxisGridSpec
from .capacity import BoundarySet, CapacityConfig, clear_cache, riesz_capacity, riesz_capacity_dual, \
    riesz_capacity_primal
from .criteria import _plain, capacity_compare_test, doubling_verify, level_specs, measure_battery, \
    pointwise_test, quasi_metric_verify, run_criterion, sandwich_report, solvability_test
from .errors import DivergenceError, PotlabError
from .kernels import KernelSpec
from .model import BoundaryMeasure, UniformBallDensity
from .potentials import green_potential, n_measure_potential, poisson_potential
from .solver import SolveConfig, bisect_amplitude, fixedpoint_gradient, hardy_model, picard_kernel_model, \
    picard_pure, pure_power_model

EXIT_OK, EXIT_ERROR, EXIT_FAIL, EXIT_DIVERGENT = 0, 1, 2, 3
VERDICT_EXIT = {"pass": EXIT_OK, "fail": EXIT_FAIL, "inconclusive": EXIT_FAIL, "divergent": EXIT_DIVERGENT}


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_plain(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_eval(run: cfgmod.RunConfig, out):
    """Potential values at probe points, one CSV row per probe."""
    sec = run.section()
    domain, sigma = run.domain, run.measure
    kind = sec.get("potential", "poisson")
    probes = np.asarray(sec.get("probes", []), float).reshape(-1, domain.N)
    header = [f"x{i + 1}" for i in range(domain.N)] + ["value"]
    rows, status = [], EXIT_OK
    for x in probes:
        try:
            if kind == "poisson":
                v = poisson_potential(sigma, x)
            elif kind == "n":
                v = n_measure_potential(cfgmod.kernel_from(sec.get("kernel")), sigma, x)
            else:
                q = float(sec.get("q", 3.0))
                atoms = [a.location for a in sigma.atoms()]
                v = green_potential(lambda y: np.asarray(poisson_potential(sigma, y)) ** q, x, domain,
                                    atoms=atoms)
        except DivergenceError:
            v, status = math.inf, EXIT_DIVERGENT
        rows.append([_fmt(c) for c in x] + [_fmt(v)])
    _write_csv(os.path.join(out, "eval.csv"), header, rows)
    return status


def cmd_capacity(run: cfgmod.RunConfig, out):
    """Riesz capacity of a boundary set: primal and/or dual values."""
    sec = run.section()
    K = cfgmod.set_from(sec.get("set"))
    q = float(sec.get("q", 3.0))
    gamma = float(sec.get("gamma", 2.0 / q))
    s = float(sec.get("s", q / (q - 1.0)))
    ccfg = cfgmod.capacity_config_from(sec)
    if run.quick:
        ccfg = CapacityConfig(n_res=min(ccfg.n_res, 6), box=ccfg.box)
    program = sec.get("program", "both")
    report = {"set": K.to_dict(), "gamma": gamma, "s": s, "program": program, "n_res": ccfg.n_res}
    if program == "both":
        report.update(riesz_capacity(K, gamma, s, ccfg).to_dict())
    elif program == "primal":
        report["primal"] = riesz_capacity_primal(K, gamma, s, ccfg)
    else:
        report["dual"] = riesz_capacity_dual(K, gamma, s, ccfg)
    _write_json(os.path.join(out, "capacity.json"), report)
    _write_csv(os.path.join(out, "capacity.csv"), ["quantity", "value"],
               [[k, _fmt(report[k])] for k in ("primal", "dual", "gap", "relative_gap") if k in report])
    return EXIT_OK


def cmd_criteria(run: cfgmod.RunConfig, out):
    """One criterion by id; the verdict decides the exit status."""
    sec = run.section()
    crit = sec.get("criterion", "pointwise")
    kw = {"q": float(sec.get("q", 3.0)), "threads": run.threads, "seed": run.seed, "domain": run.domain}
    if "kappa" in sec:
        kw["kappa"] = float(sec["kappa"])
    if "eps" in sec:
        kw["eps"] = float(sec["eps"])
    if "density" in sec:
        kw["density"] = cfgmod.component_from(sec["density"])
        kw["N"] = run.domain.N
    if "alpha0" in sec:
        kw["alpha0"] = float(sec["alpha0"])
    if "kernel" in sec:
        kw["spec"] = cfgmod.kernel_from(sec["kernel"])
    if "samples" in sec:
        kw["samples"] = int(sec["samples"])
    elif run.quick and crit == "doubling":
        kw["samples"] = 4
    if "probes" in sec:
        kw["probes"] = np.asarray(sec["probes"], float)
    base = cfgmod.grid_from(sec.get("grid"), AxisGridSpec(L=4.0, h=0.5, levels=6))
    kw["specs"] = level_specs(base)
    if "n_res" in sec or run.quick:
        kw["capacity"] = CapacityConfig(n_res=int(sec.get("n_res", 6)))
    sigma = run.measure if crit not in ("fefferman-phong", "quasi-metric", "doubling") else None
    rep = run_criterion(crit, sigma, **kw)
    _write_json(os.path.join(out, "criteria.json"), rep.to_dict())
    with open(os.path.join(out, "criteria.csv"), "w", newline="", encoding="utf-8") as fh:
        fh.write(rep.to_csv())
    return VERDICT_EXIT[rep.verdict]


def cmd_solve(run: cfgmod.RunConfig, out):
    """Monotone iteration (or the gradient fixed point), optionally with amplitude bisection."""
    sec = run.section()
    sigma = run.measure
    model = sec.get("model", "pure")
    q = float(sec.get("q", 3.0))
    grid = cfgmod.grid_from(sec.get("grid"), AxisGridSpec(L=4.0, h=0.5, levels=6 if run.quick else 8))
    scfg = SolveConfig(q=q, q2=float(sec.get("q2", 0.0)), eps=float(sec.get("eps", 1.0)), grid=grid,
                       tol=float(sec.get("tol", 1e-4)), max_iter=int(sec.get("max_iter", 2000)),
                       cap=float(sec.get("cap", 1e3)), threads=run.threads)

    def solve(eps):
        c = SolveConfig(scfg.q, scfg.q2, eps, scfg.grid, scfg.max_iter, scfg.tol, scfg.cap, scfg.threads)
        if model == "pure":
            return picard_pure(sigma, c)
        if model == "gradient":
            return fixedpoint_gradient(sigma, q, scfg.q2, c)
        spec = hardy_model(float(sec.get("kappa", 0.0)), q) if model == "hardy" else \
            cfgmod.kernel_from(sec.get("kernel"), pure_power_model(q))
        return picard_kernel_model(spec, sigma, c)

    report = {"model": model, "q": q, "q2": scfg.q2, "grid": vars(grid)}
    if sec.get("bisect", False):
        search = bisect_amplitude(solve)
        report["search"] = search.to_dict()
        result = search.certified
        if result is None:
            report["status"] = "diverged"
            _write_json(os.path.join(out, "solve.json"), report)
            return EXIT_FAIL
    else:
        result = solve(scfg.eps)
    report.update(result.to_dict())
    _write_json(os.path.join(out, "solve.json"), report)
    result.u.to_csv(os.path.join(out, "u.csv"))
    if result.grad is not None:
        result.grad.to_csv(os.path.join(out, "grad.csv"))
    return EXIT_OK if result.converged else EXIT_FAIL


# ---------------------------------------------------------------------------
# verify: the invariant suite
# ---------------------------------------------------------------------------


def _entry(name, ok, **data):
    return {"name": name, "hard": True, "passed": bool(ok), **data}


def verify_suite(seed=0, quick=False, threads=1, opts=None):
    """Run the structural invariants and the equivalence battery; return report entries."""
    opts = opts or {}
    H = cfgmod.domain_from({"kind": "halfspace", "N": 3})
    B = cfgmod.domain_from({"kind": "ball", "N": 3})
    out = []

    # Poisson normalization: a unit density on a huge disc plus the exact outer remainder
    x = np.array([0.3, -0.2, 0.7])
    big = BoundaryMeasure.from_components(H, [UniformBallDensity((0.3, -0.2), 1e4, 1.0)])
    val = float(poisson_potential(big, x)) + 0.7 / math.hypot(1e4, 0.7)
    out.append(_entry("poisson-normalization", abs(val - 1.0) < 1e-3, value=val))

    pairs = int(opts.get("pairs", 2000 if quick else 10_000))
    for dom in (H, B):
        rep = sandwich_report(dom, pairs, seed)
        out.append(_entry(f"sandwich-{dom.kind}", rep.passed, **rep.to_dict()))
    triples = int(opts.get("triples", 10_000))
    for spec in (KernelSpec(2.0, 2.0), KernelSpec(1.0, 1.0)):
        rep = quasi_metric_verify(spec, H, triples, seed)
        out.append(_entry(f"quasi-metric-{spec.alpha:g}-{spec.beta:g}", rep.passed, **rep.to_dict()))
    ds = int(opts.get("doubling_samples", 4 if quick else 16))
    for dom in ((H,) if quick else (H, B)):
        rep = doubling_verify(4.0, dom, ds, KernelSpec(2.0, 2.0), seed)
        out.append(_entry(f"doubling-{dom.kind}", rep.passed, **rep.to_dict()))

    # capacity: weak duality and dilation scaling
    ccfg = CapacityConfig(n_res=6 if quick else 8)
    q = float(opts.get("q", 3.0))
    gamma, s = 2.0 / q, q / (q - 1.0)
    est = [riesz_capacity(BoundarySet.ball((0.0, 0.0), r), gamma, s, ccfg) for r in (0.5, 1.0)]
    target = 2.0 ** (2 - gamma * s)
    rp, rd = est[1].primal / est[0].primal, est[1].dual / est[0].dual
    ok = all(e.dual <= e.primal and e.relative_gap < 0.25 for e in est) and \
        abs(rp / target - 1) < 0.05 and abs(rd / target - 1) < 0.05
    out.append(_entry("capacity-duality-scaling", ok, primal_ratio=rp, dual_ratio=rd, target=target,
                      estimates=[e.to_dict() for e in est]))

    # equivalence battery: the three solvability routes agree
    names = ("atom", "uniform-1", "power-1.3", "power-0.5") if quick else None
    specs = level_specs(AxisGridSpec(L=4.0, h=0.5, levels=6))
    rows = []
    for name, sigma in measure_battery(3):
        if names and name not in names:
            continue
        cap = capacity_compare_test(sigma, q, cfg=ccfg)
        pw = pointwise_test(sigma, q, specs=specs, threads=threads)
        sv = solvability_test(sigma, q, specs=specs, threads=threads)
        cert = sv.details.get("certified")
        verdicts = [cap.verdict == "pass", pw.verdict == "pass", sv.verdict == "pass"]
        good = len(set(verdicts)) == 1
        if cert is not None and cert.converged:
            good = good and cert.c_high < 100 and cert.residual <= 3 * 1e-6
        rows.append({"measure": name, "capacity": cap.verdict, "pointwise": pw.verdict,
                     "solvable": sv.verdict, "agree": good})
    out.append(_entry("equivalence-battery", all(r["agree"] for r in rows), rows=rows))
    clear_cache()
    return out


def cmd_verify(run: cfgmod.RunConfig, out):
    entries = verify_suite(run.seed, run.quick, run.threads, run.section())
    _write_json(os.path.join(out, "verify.json"), {"seed": run.seed, "quick": run.quick, "checks": entries})
    _write_csv(os.path.join(out, "verify.csv"), ["check", "passed"],
               [[e["name"], "pass" if e["passed"] else "fail"] for e in entries])
    return EXIT_OK if all(e["passed"] for e in entries if e["hard"]) else EXIT_FAIL


COMMAND_FUNCS = {"eval": cmd_eval, "capacity": cmd_capacity, "criteria": cmd_criteria, "solve": cmd_solve,
                 "verify": cmd_verify}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="potlab", description="Boundary-measure solvability experiments.")
    p.add_argument("command", choices=cfgmod.COMMANDS)
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--out", default=".", help="output directory (created if missing)")
    p.add_argument("--seed", type=int, default=None, help="random seed (overrides the config)")
    p.add_argument("--threads", type=int, default=None, help="worker cap for kernel assembly")
    p.add_argument("--quick", action="store_true", help="smaller grids and samples")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        data = cfgmod.read(args.config) if args.config else cfgmod.validate({})
        seed = args.seed if args.seed is not None else int(data.get("seed", 0))
        if seed < 0 or seed >= 2 ** 64:
            raise cfgmod.ConfigError("--seed must be an unsigned 64-bit integer")
        threads = args.threads if args.threads is not None else int(data.get("threads", 1))
        if threads < 1:
            raise cfgmod.ConfigError("--threads must be at least 1")
        run = cfgmod.RunConfig(args.command, data, seed, threads, args.quick)
        os.makedirs(args.out, exist_ok=True)
        return COMMAND_FUNCS[args.command](run, args.out)
    except (PotlabError, ValueError, KeyError, OSError) as exc:
        print(f"potlab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
