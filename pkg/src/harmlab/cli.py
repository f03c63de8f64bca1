"""Command-line experiment driver.

    harmlab <subcommand> [--config FILE] [--seed N] [--threads N] [--out DIR]

Every subcommand writes CSV tables and a JSON manifest into the output
directory; the exit status is 0 iff every hard check passed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .checks import InequalityViolation
from .config import SUBCOMMANDS, ConfigError, ExperimentConfig, float_list, int_list
from .entropy import entropy_profile
from .environment.io import dumps
from .harmonic import dirichlet_candidates, estimate_corrector, gram_dimension_probe, proper_cover
from .heatkernel import annealed_gradient_estimate, fit_gaussian, ols
from .models import ensemble, parallel_map
from .report import report
from .suite import default_suite
from .walk import displacement_profile


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _g(x) -> str:
    return "%.12g" % x


def result(name, value=None, passed=True, hard=False, band=None, **extra) -> dict:
    """One manifest entry; ``band`` is (centre, half-width) for fitted quantities."""
    out = {"name": name, "pass": bool(passed), "hard": hard}
    if value is not None:
        out["value"] = float(value)
    if band is not None:
        out["band"] = [float(band[0]), float(band[1])]
        out["pass"] = bool(passed and abs(value - band[0]) <= band[1])
    out.update(extra)
    return out


def cmd_generate(cfg, seed, threads):
    ens = ensemble(cfg.model("generate"), cfg.get("generate", "replicas"), seed, threads)
    files = {}
    for i, env in enumerate(ens.envs):
        files[f"env_{i:03d}.env"] = dumps(env)
    rows = [[i, e.n_vertices, e.kernel.nnz, e.root, _g(w)] for i, (e, w) in enumerate(zip(ens.envs, ens.weights))]
    files["environments.csv"] = _csv(["replica", "vertices", "arcs", "root", "weight"], rows)
    return files, [result("generated", len(ens.envs))]


def cmd_entropy(cfg, seed, threads):
    n_max = cfg.get("entropy", "n_max")
    prof = entropy_profile(cfg.model("entropy"), n_max, cfg.get("entropy", "replicas"), seed, threads)
    slack, se = prof.slack()
    worst = float(np.nanmin(slack[1:]))
    return {"entropy.csv": prof.to_csv()}, [result("entropy_theorem_min_slack", worst, note="annealed, reported")]


def cmd_sdb(cfg, seed, threads):
    n_max = cfg.get("sdb", "n_max")
    rows = displacement_profile(cfg.model("sdb"), n_max, cfg.get("sdb", "replicas"), seed,
                                cfg.get("sdb", "metric"), threads)
    table = [[r.n, _g(r.mean), _g(r.stderr), _g(r.mean / r.n) if r.n else ""] for r in rows]
    ns = np.array([r.n for r in rows[n_max // 4 or 1:]])
    ms = np.array([r.mean for r in rows[n_max // 4 or 1:]])
    slope = ols(np.log(ns), np.log(ms))[0]
    return ({"sdb.csv": _csv(["n", "mean_sq_distance", "stderr", "ratio"], table)},
            [result("sdb_loglog_slope", slope, passed=slope <= 1.0 + 0.1, note="diffusive or slower")])


def cmd_heatkernel(cfg, seed, threads):
    spec = cfg.model("heatkernel")
    ns = int_list("heatkernel.n", cfg.get("heatkernel", "n"))
    scales = float_list("heatkernel.scales", cfg.get("heatkernel", "scales"))
    ens = ensemble(spec, cfg.get("heatkernel", "replicas"), seed, threads)
    d = ens.envs[0].meta.d
    grid = np.unique(np.geomspace(min(ns), max(ns), 9).astype(int))
    fit = fit_gaussian(ens, grid, threads=threads)
    grad = annealed_gradient_estimate(ens, ns, scales, threads=threads)
    gauss = _csv(["n", "diagonal"], [[n, _g(v)] for n, v in zip(fit.n, fit.diagonal)])
    res = [result("diagonal_slope", fit.slope, band=(-d / 2, 0.15))]
    if fit.profile_r2 is not None:
        res.append(result("profile_r2", fit.profile_r2, passed=fit.profile_r2 >= 0.95))
    s_ref = min(scales, key=lambda s: abs(s - 1.0))
    res.append(result("gradient_exponent", grad.exponents[s_ref], band=(-(d + 1), 0.3), scale=s_ref))
    res.append(result("onsets", None, **fit.onset_summary()))
    return {"gaussian.csv": gauss, "heatkernel.csv": grad.to_csv()}, res


def cmd_corrector(cfg, seed, threads):
    spec = cfg.model("corrector")
    R = cfg.get("corrector", "R")
    v = float_list("corrector.v", cfg.get("corrector", "v"))
    radii = int_list("corrector.radii", cfg.get("corrector", "radii"))
    ens = ensemble(spec, cfg.get("corrector", "replicas"), seed, threads)
    profiles = parallel_map(lambda e: estimate_corrector(e, v, R, radii).profile, ens.envs, threads)
    rows = [[i, r, _g(p[r])] for i, p in enumerate(profiles) for r in radii]
    med = [float(np.median([p[r] for p in profiles])) for r in radii]
    rows += [["median", r, _g(m)] for r, m in zip(radii, med)]
    decreasing = bool(np.all(np.diff(med) < 0))
    return ({"corrector.csv": _csv(["replica", "r", "sup_chi_over_r"], rows)},
            [result("median_profile_decreasing", None, passed=decreasing, medians=med)])


def cmd_dimension(cfg, seed, threads):
    spec = cfg.model("dimension")
    n = cfg.get("dimension", "n")
    ens = ensemble(spec, cfg.get("dimension", "replicas"), seed, threads)

    def one(env):
        fields = dirichlet_candidates(env, 4 * n)
        return gram_dimension_probe(env, fields, n)

    reps = parallel_map(one, ens.envs, threads)
    rows = [[i, r.d, r.rank_n, r.rank_4n, _g(r.det_n), _g(r.det_4n), _g(r.ratio), r.verdict]
            for i, r in enumerate(reps)]
    full = sum(r.rank_n == r.d for r in reps)
    return ({"dimension.csv": _csv(["replica", "candidates", "rank_n", "rank_4n", "det_n", "det_4n",
                                    "ratio", "verdict"], rows)},
            [result("full_rank_fraction", full / len(reps))])


def cmd_cover(cfg, seed, threads):
    spec = cfg.model("cover")
    R, r = cfg.get("cover", "R"), cfg.get("cover", "r")
    ens = ensemble(spec, cfg.get("cover", "replicas"), seed, threads)
    covers = parallel_map(lambda e: proper_cover(e, e.root, R, r), ens.envs, threads)
    rows = [[i, c.count, c.overlap] for i, c in enumerate(covers)]
    return ({"cover.csv": _csv(["replica", "balls", "overlap"], rows)},
            [result("max_overlap", max(c.overlap for c in covers))])


def cmd_verify(cfg, seed, threads):
    sec = cfg.sections["verify"]
    tols = {k: cfg.tol(k) for k in ("lemma_xy", "tv_delta", "stationarity", "reverse_poincare", "gradient")}
    checks = default_suite(seed, sec["instances"], sec["n_max"], sec["gradient_triples"], tols, threads)
    table = _csv(["check", "model", "instances", "worst", "tol", "status"], [c.row() for c in checks])
    res = [result(c.name, c.worst, passed=c.passed, hard=True, model=c.model, kind=c.kind) for c in checks]
    return {"verify.csv": table}, res


COMMANDS = {
    "generate": cmd_generate, "entropy": cmd_entropy, "sdb": cmd_sdb, "heatkernel": cmd_heatkernel,
    "corrector": cmd_corrector, "dimension": cmd_dimension, "cover": cmd_cover, "verify": cmd_verify,
}


def run(sub: str, cfg: ExperimentConfig, seed: int | None = None, threads: int | None = None,
        out: str = "out") -> tuple[int, dict]:
    if seed is not None:
        cfg.set("general.seed", int(seed))
        cfg.validate()
    seed = cfg.sections["general"]["seed"]
    threads = threads or cfg.sections["general"]["threads"]
    t0 = time.perf_counter()
    try:
        files, results = COMMANDS[sub](cfg, seed, threads)
    except InequalityViolation as exc:
        files, results = {}, [result(exc.name, exc.slack, passed=False, hard=True, tol=exc.tol)]
    wall = time.perf_counter() - t0
    os.makedirs(out, exist_ok=True)
    for name, text in files.items():
        with open(os.path.join(out, name), "w") as fh:
            fh.write(text)
    ok = all(r["pass"] for r in results if r["hard"])
    manifest = {
        "subcommand": sub,
        "config_hash": cfg.hash(),
        "code_version": __version__,
        "seed": seed,
        "threads": threads,
        "wall_time": round(wall, 3),
        "tolerance_overrides": [p for p in cfg.overrides if p.startswith("tolerances.")],
        "files": sorted(files),
        "results": results,
        "pass": ok,
    }
    with open(os.path.join(out, f"manifest_{sub}.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return (0 if ok else 1), manifest


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="harmlab", description=__doc__.splitlines()[0])
    ap.add_argument("subcommand", choices=SUBCOMMANDS + ("report",))
    ap.add_argument("--config", help="key=value config file with one section per subcommand")
    ap.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    ap.add_argument("--threads", type=int, help="worker threads")
    ap.add_argument("--out", default="out", help="output directory (manifest directory for report)")
    args = ap.parse_args(argv)
    if args.subcommand == "report":
        try:
            print(report(args.out), end="")
        except FileNotFoundError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        return 0
    try:
        cfg = ExperimentConfig.load(args.config)
        code, manifest = run(args.subcommand, cfg, args.seed, args.threads, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    for r in manifest["results"]:
        if r["hard"] and not r["pass"]:
            print(f"FAIL {r['name']} ({r.get('model', '')}): {r.get('value')}", file=sys.stderr)
    print(f"{args.subcommand}: {'pass' if manifest['pass'] else 'FAIL'} -> {args.out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
