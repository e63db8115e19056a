"""Command-line front end.

Every subcommand is a thin mapping onto one library operation; no
numerics live here.  Results print as JSON (floats in shortest
round-trip form), optional --out bundles artifacts with a SHA-256
manifest so seeded runs can be reproduced byte for byte.

Exit codes: 0 success, 2 validation failure or an identity whose
hypothesis does not hold, 1 runtime error (including malformed input
files).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DomainError, InfeasibleError, NoSolutionError
from . import discrete as dc
from . import gauge as gg
from . import lln
from . import qgauss as qg

log = logging.getLogger("dgeo")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_VALIDATION = 2


def _floats(text: str) -> np.ndarray:
    try:
        return np.asarray([float(t) for t in text.split(",") if t.strip() != ""])
    except ValueError as exc:
        raise DomainError(f"could not parse float list {text!r}") from exc


def _matrix(text: str) -> np.ndarray:
    return np.asarray([_floats(row) for row in text.split(";")])


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and math.isinf(obj):
        return "inf" if obj > 0 else "-inf"
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _emit(payload: dict, args) -> None:
    if getattr(args, "format", "json") == "csv":
        lines = ["key,value"]
        for k, v in _jsonable(payload).items():
            lines.append(f"{k},{json.dumps(v)}" if isinstance(v, (list, dict))
                         else f"{k},{v}")
        text = "\n".join(lines)
        name = "result.csv"
    else:
        text = json.dumps(_jsonable(payload), indent=2)
        name = "result.json"
    print(text)
    if getattr(args, "out", None):
        write_bundle(Path(args.out), {name: text + "\n"}, config=_cmd_config(args))


def _cmd_config(args) -> dict:
    skip = {"func"}
    return {k: _jsonable(v) for k, v in vars(args).items()
            if k not in skip and not callable(v)}


def write_bundle(outdir: Path, files: dict, config: dict) -> Path:
    """Write artifacts plus a manifest with SHA-256 per file."""
    outdir.mkdir(parents=True, exist_ok=True)
    entries = []
    for name, content in files.items():
        data = content.encode() if isinstance(content, str) else content
        path = outdir / name
        path.write_bytes(data)
        entries.append({"name": name, "sha256": hashlib.sha256(data).hexdigest(),
                        "bytes": len(data)})
    manifest = {"version": __version__, "config": config,
                "seed": config.get("seed"), "files": entries}
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    log.info("wrote %d artifacts to %s", len(entries), outdir)
    return outdir / "manifest.json"


def _load_json_file(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise _MalformedInput(f"{path}: invalid JSON at line {exc.lineno}, "
                              f"column {exc.colno}: {exc.msg}") from exc


class _MalformedInput(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# gauge verbs
# ---------------------------------------------------------------------------


def _gauge_of(args) -> gg.GaugeTriple:
    try:
        desc = json.loads(args.gauge)
    except json.JSONDecodeError as exc:
        raise _MalformedInput(f"--gauge: invalid JSON at column {exc.colno}: {exc.msg}")
    return gg.gauge_from_json(desc)


def cmd_gauge_eval(args) -> int:
    g = _gauge_of(args)
    if args.fn == "d":
        if args.y is None:
            raise DomainError("--fn d needs both --x and --y")
        val = gg.d_htau(g, args.x, args.y)
    elif args.fn == "exp":
        val = gg.exp_htau(g, args.x)
    else:
        der = gg.derived(g)
        try:
            fn = getattr(der, args.fn)
        except AttributeError:
            raise DomainError(f"unknown function {args.fn!r}")
        val = float(fn.value(args.x))
    print(repr(float(val)))
    return EXIT_OK


def cmd_gauge_conjugate(args) -> int:
    val = gg.legendre_conjugate(_gauge_of(args), args.x)
    print(repr(float(val)))
    return EXIT_OK


def cmd_gauge_equiv_check(args) -> int:
    g = _gauge_of(args)
    tr = gg.EquivalenceTransform(a1=args.a1, a2=args.a2, a3=args.a3, lam=args.lam)
    g2 = gg.apply_equivalence(g, tr)
    rng = np.random.default_rng(args.seed)
    ts = rng.uniform(0.2, 5.0, size=(args.n, 2))
    kernel = float(np.max(np.abs(gg.d_htau(g, ts[:, 0], ts[:, 1])
                                 - gg.d_htau(g2, ts[:, 0], ts[:, 1]))))
    grid = np.geomspace(0.3, 4.0, 64)
    d1, d2 = gg.derived(g), gg.derived(g2)
    payload = {
        "max_kernel_defect": kernel,
        "max_m_defect": float(np.max(np.abs(d1.m.value(grid) - d2.m.value(grid)))),
        "max_gamma_defect": float(np.max(np.abs(d1.gamma.value(grid) - d2.gamma.value(grid)))),
    }
    _emit(payload, args)
    return EXIT_OK


# ---------------------------------------------------------------------------
# discrete verbs
# ---------------------------------------------------------------------------


def _spec_of(args) -> dc.DiscreteFamilySpec:
    return dc.spec_from_json(_load_json_file(args.spec))


def cmd_discrete_normalize(args) -> int:
    psi, p = dc.normalize(_spec_of(args), _floats(args.theta))
    _emit({"psi": psi, "density": p}, args)
    return EXIT_OK


def cmd_discrete_divergence(args) -> int:
    spec = _spec_of(args)
    _, p = dc.normalize(spec, _floats(args.theta))
    _, p2 = dc.normalize(spec, _floats(args.theta2))
    _emit({"divergence": dc.divergence(spec, p, p2)}, args)
    return EXIT_OK


def cmd_discrete_geometry(args) -> int:
    spec = _spec_of(args)
    th = _floats(args.theta)
    _emit({
        "psi_gradient": dc.psi_gradient(spec, th),
        "psi_hessian": dc.psi_hessian(spec, th),
        "metric": dc.metric(spec, th),
        "christoffel_raw": dc.connection_raw(spec, th),
    }, args)
    return EXIT_OK


def cmd_discrete_hessian_check(args) -> int:
    rep = dc.hessian_check(_spec_of(args), _floats(args.theta))
    _emit(rep.to_json(), args)
    return EXIT_OK if rep.status == "ok" else EXIT_VALIDATION


def cmd_discrete_canonical_check(args) -> int:
    defect = dc.canonical_divergence_check(_spec_of(args), _floats(args.theta),
                                           _floats(args.theta2))
    _emit({"defect": defect}, args)
    return EXIT_OK


def cmd_discrete_conformal_check(args) -> int:
    res = dc.conformal_check(_spec_of(args), _floats(args.theta), _floats(args.theta2))
    _emit({"defect": res.defect, "grad_defect": res.grad_defect, "itau": res.itau}, args)
    return EXIT_OK


def cmd_discrete_project(args) -> int:
    res = dc.pythagorean_project(_spec_of(args), _floats(args.rho), tol=args.tol)
    _emit({"theta": res.theta, "p": res.p, "moment_residual": res.moment_residual,
           "itau_residual": res.itau_residual, "iterations": res.iterations}, args)
    return EXIT_OK


def cmd_discrete_entropy_max(args) -> int:
    res = dc.entropy_max_check(_spec_of(args), _floats(args.rho))
    _emit({"entropy_source": res.entropy_source,
           "entropy_projected": res.entropy_projected,
           "maximized": res.maximized}, args)
    return EXIT_OK


# ---------------------------------------------------------------------------
# qgauss verbs
# ---------------------------------------------------------------------------


def _qparams(args, variant: str = "full") -> qg.QGaussianParams:
    d = args.d
    v = _floats(args.v) if args.v else np.zeros(d)
    S = _matrix(args.S) if args.S else np.eye(d)
    return qg.QGaussianParams(args.q, d, v, S, variant)


def cmd_qgauss_density(args) -> int:
    p = _qparams(args)
    _emit({"density": qg.density(p, _floats(args.x))}, args)
    return EXIT_OK


def cmd_qgauss_lambda(args) -> int:
    S = _matrix(args.S) if args.S else np.eye(args.d)
    _emit({"lambda": qg.lambda_q(args.q, args.d, S)}, args)
    return EXIT_OK


def cmd_qgauss_marginal_check(args) -> int:
    p = _qparams(args)
    big = qg.repetition(p, args.k + args.kprime)
    small = qg.repetition(p, args.k)
    xs = None if args.grid is None else _floats(args.grid)
    res = qg.marginal_check(big, small, xs=xs, epsabs=args.tol)
    if args.format == "csv":
        lines = [",".join(f"x_{m + 1}" for m in range(args.k)) + ",defect"]
        for row, defect in zip(res.points, res.defects):
            lines.append(",".join(f"{x:.17g}" for x in row) + f",{defect:.17g}")
        print("\n".join(lines))
        return EXIT_OK
    payload = {"max_defect": res.max_defect, "points": res.points,
               "defects": res.defects}
    _emit(payload, args)
    return EXIT_OK


def cmd_qgauss_sample(args) -> int:
    p = _qparams(args)
    law = qg.repetition(p, args.k)
    draws = qg.sample_joint(law, args.n, seed=args.seed)
    header = ",".join(f"x_{m + 1}_{i + 1}" for m in range(args.k) for i in range(p.d))
    rows = [header]
    flat = draws.reshape(args.n, -1)
    for row in flat:
        rows.append(",".join(f"{x:.17g}" for x in row))
    csv = "\n".join(rows) + "\n"
    if args.out:
        write_bundle(Path(args.out), {"samples.csv": csv}, config=_cmd_config(args))
        print(json.dumps({"written": str(Path(args.out) / "samples.csv"), "n": args.n}))
    else:
        sys.stdout.write(csv)
    return EXIT_OK


def cmd_qgauss_mle(args) -> int:
    if args.data:
        x = np.loadtxt(args.data, delimiter=",", skiprows=1 if args.header else 0)
    else:
        x = _floats(args.x)
    x = np.asarray(x, dtype=float).reshape(args.k, args.d)
    res = qg.mle(args.q, args.d, args.k, x, args.family)
    _emit({"v": res.v, "S": res.S, "defect": res.defect,
           "iterations": res.iterations, "converged": res.converged}, args)
    return EXIT_OK


def cmd_qgauss_moments(args) -> int:
    p = _qparams(args)
    law = qg.repetition(p, max(args.k, 2))
    mom = qg.coordinate_moments(law, args.i)
    ey4, ey22 = qg.fi_pair_moments(law, args.i)
    ez2, ez12 = qg.fij_pair_moments(law, args.i, args.i)
    _emit({"mean": mom.mean, "var": mom.var, "central4": mom.central4,
           "raw2": mom.raw2, "raw4": mom.raw4,
           "pair": {"EY4": ey4, "EY22": ey22, "EZ2": ez2, "EZ12": ez12},
           "nu_dof": law.nu_dof}, args)
    return EXIT_OK


# ---------------------------------------------------------------------------
# lln verbs
# ---------------------------------------------------------------------------


def _sim_config(args) -> lln.SimConfig:
    if args.config:
        obj = _load_json_file(args.config)
        return lln.SimConfig(q=obj["q"], d=obj["d"], v=tuple(obj["v"]),
                             variant=obj.get("variant", "identity"),
                             k_max=obj.get("k_max", 10_000),
                             reps=obj.get("reps", 100),
                             seed=obj.get("seed", 0),
                             eps_grid=tuple(obj.get("eps_grid", (0.25, 0.5, 1.0))),
                             S=obj.get("S"))
    v = _floats(args.v) if args.v else np.zeros(args.d)
    return lln.SimConfig(q=args.q, d=args.d, v=tuple(v), variant=args.variant,
                         k_max=args.k_max, reps=args.reps, seed=args.seed,
                         eps_grid=tuple(_floats(args.eps_grid)))


def cmd_lln_run(args) -> int:
    cfg = _sim_config(args)
    report = lln.run_lln(cfg, workers=args.workers)
    table = lln.verify_bounds(cfg, report) if cfg.reps >= 100 else None
    summary = report.to_json()
    if table is not None:
        summary["bounds_all_pass"] = table.all_pass
    if args.out:
        files = {"averages.csv": report.averages_csv(),
                 "summary.json": json.dumps(_jsonable(summary), indent=2) + "\n"}
        if table is not None:
            files["exceedance.csv"] = table.to_csv()
        write_bundle(Path(args.out), files, config=cfg.to_json())
    if args.format == "csv":
        print(report.averages_csv(), end="")
    else:
        print(json.dumps(_jsonable(summary), indent=2))
    return EXIT_OK


def cmd_lln_bounds(args) -> int:
    cfg = _sim_config(args)
    b = lln.chebyshev_bounds(cfg, args.k, args.eps)
    _emit({"bound_F": b.bound_F, "bound_FF": b.bound_FF}, args)
    return EXIT_OK


def cmd_lln_verify(args) -> int:
    cfg = _sim_config(args)
    report = lln.run_lln(cfg, workers=args.workers)
    table = lln.verify_bounds(cfg, report)
    if args.out:
        write_bundle(Path(args.out), {"exceedance.csv": table.to_csv()},
                     config=cfg.to_json())
    if args.format == "csv":
        print(table.to_csv(), end="")
    else:
        payload = {"all_pass": table.all_pass, "rows": table.to_json()}
        print(json.dumps(_jsonable(payload), indent=2))
    return EXIT_OK if table.all_pass else EXIT_VALIDATION


def cmd_lln_summability(args) -> int:
    cfg = _sim_config(args)
    s = lln.borel_cantelli_summability(cfg, args.eps, k_terms=args.k_terms)
    _emit(s.to_json(), args)
    return EXIT_OK


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------


def validate_spec(path: str) -> list[str]:
    """Diagnostics for a family-spec or simulation-config JSON file."""
    obj = _load_json_file(path)
    problems: list[str] = []
    if "weights" in obj or "T" in obj:
        for key in ("weights", "gauge", "T", "c"):
            if key not in obj:
                problems.append(f"missing field '{key}'")
        if problems:
            return problems
        try:
            spec = dc.spec_from_json(obj)
        except DomainError as exc:
            return [str(exc)]
        grid = np.geomspace(0.1, 5.0, 32)
        grid = grid[(grid > spec.gauge.I.lo) & (grid < spec.gauge.I.hi)]
        if not np.all(np.asarray(spec.gauge.tau.d1(grid)) > 0):
            problems.append("tau' is not positive on the sampled grid")
        tg = spec.gauge.tau.value(grid)
        if not np.all(np.asarray(spec.gauge.h.d2(tg)) > 0):
            problems.append("h'' is not positive on the sampled grid")
        return problems
    if "q" in obj:
        try:
            if "v" in obj:
                lln.SimConfig(q=obj["q"], d=obj.get("d", 1), v=tuple(obj["v"]),
                              variant=obj.get("variant", "identity"),
                              k_max=obj.get("k_max", 100), reps=obj.get("reps", 100),
                              seed=obj.get("seed", 0), S=obj.get("S"))
            else:
                qg.QGaussianParams(obj["q"], obj.get("d", 1),
                                   np.zeros(obj.get("d", 1)),
                                   np.eye(obj.get("d", 1)))
        except DomainError as exc:
            return [str(exc)]
        return []
    return ["unrecognized file: expected a family spec or a simulation config"]


def cmd_validate(args) -> int:
    problems = validate_spec(args.path)
    if problems:
        print("FAIL")
        for p in problems:
            print(f"  - {p}")
        return EXIT_VALIDATION
    print("PASS")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default=None, help="directory for artifact bundle")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--format", choices=("json", "csv"), default="json")


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="dgeo", description=__doc__)
    top.add_argument("--version", action="version", version=__version__)
    sub = top.add_subparsers(dest="verb", required=True)

    g = sub.add_parser("gauge").add_subparsers(dest="action", required=True)
    p = g.add_parser("eval")
    p.add_argument("--gauge", required=True)
    p.add_argument("--fn", required=True,
                   choices=("ell", "m", "gamma", "chi", "s", "s_star", "exp", "d"))
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--y", type=float, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_gauge_eval)
    p = g.add_parser("conjugate")
    p.add_argument("--gauge", required=True)
    p.add_argument("--x", type=float, required=True)
    _add_common(p)
    p.set_defaults(func=cmd_gauge_conjugate)
    p = g.add_parser("equiv-check")
    p.add_argument("--gauge", required=True)
    p.add_argument("--a1", type=float, default=0.0)
    p.add_argument("--a2", type=float, default=0.0)
    p.add_argument("--a3", type=float, default=0.0)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--n", type=int, default=20)
    _add_common(p)
    p.set_defaults(func=cmd_gauge_equiv_check)

    d = sub.add_parser("discrete").add_subparsers(dest="action", required=True)
    for action, func, extra in (
        ("normalize", cmd_discrete_normalize, ("theta",)),
        ("divergence", cmd_discrete_divergence, ("theta", "theta2")),
        ("geometry", cmd_discrete_geometry, ("theta",)),
        ("hessian-check", cmd_discrete_hessian_check, ("theta",)),
        ("canonical-check", cmd_discrete_canonical_check, ("theta", "theta2")),
        ("conformal-check", cmd_discrete_conformal_check, ("theta", "theta2")),
        ("project", cmd_discrete_project, ("rho",)),
        ("entropy-max", cmd_discrete_entropy_max, ("rho",)),
    ):
        p = d.add_parser(action)
        p.add_argument("--spec", required=True, help="family spec JSON file")
        for name in extra:
            p.add_argument(f"--{name}", required=True, help="comma separated floats")
        _add_common(p)
        p.set_defaults(func=func)

    q = sub.add_parser("qgauss").add_subparsers(dest="action", required=True)
    p = q.add_parser("density")
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--v", default=None)
    p.add_argument("--S", default=None, help="rows separated by ';'")
    p.add_argument("--x", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_qgauss_density)
    p = q.add_parser("lambda")
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--S", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_qgauss_lambda)
    p = q.add_parser("marginal-check")
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--kprime", type=int, required=True)
    p.add_argument("--v", default=None)
    p.add_argument("--S", default=None)
    p.add_argument("--grid", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_qgauss_marginal_check, tol=1e-10)
    p = q.add_parser("sample")
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--v", default=None)
    p.add_argument("--S", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_qgauss_sample)
    p = q.add_parser("mle")
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--data", default=None, help="CSV file of shape (k, d)")
    p.add_argument("--x", default=None, help="inline comma separated data")
    p.add_argument("--header", action="store_true")
    p.add_argument("--family", choices=("identity_mean_only", "full"),
                   default="identity_mean_only")
    _add_common(p)
    p.set_defaults(func=cmd_qgauss_mle)
    p = q.add_parser("moments")
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--i", type=int, default=0)
    p.add_argument("--v", default=None)
    p.add_argument("--S", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_qgauss_moments)

    l = sub.add_parser("lln").add_subparsers(dest="action", required=True)
    for action, func, needs in (
        ("run", cmd_lln_run, ()),
        ("bounds", cmd_lln_bounds, ("k", "eps")),
        ("verify", cmd_lln_verify, ()),
        ("summability", cmd_lln_summability, ("eps",)),
    ):
        p = l.add_parser(action)
        p.add_argument("--config", default=None, help="simulation config JSON file")
        p.add_argument("--q", type=float, default=1.5)
        p.add_argument("--d", type=int, default=1)
        p.add_argument("--v", default=None)
        p.add_argument("--variant", choices=("identity", "trace_d"), default="identity")
        p.add_argument("--k-max", dest="k_max", type=int, default=10_000)
        p.add_argument("--reps", type=int, default=100)
        p.add_argument("--eps-grid", dest="eps_grid", default="0.25,0.5,1.0")
        if "k" in needs:
            p.add_argument("--k", type=int, required=True)
        if "eps" in needs:
            p.add_argument("--eps", type=float, required=True)
        if action == "summability":
            p.add_argument("--k-terms", dest="k_terms", type=int, default=100_000)
        _add_common(p)
        p.set_defaults(func=func)

    p = sub.add_parser("validate")
    p.add_argument("path")
    _add_common(p)
    p.set_defaults(func=cmd_validate)
    return top


def main(argv=None) -> int:
    level = os.environ.get("DGEO_LOG", "error").lower()
    logging.basicConfig(
        level={"error": logging.ERROR, "info": logging.INFO,
               "debug": logging.DEBUG}.get(level, logging.ERROR),
        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _MalformedInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except DomainError as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (InfeasibleError, NoSolutionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
