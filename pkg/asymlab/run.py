import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from rich.console import Console
from rich.text import Text

from asymlab.barriers.barrier_profiles import annulus_profile, ode_residual, scherk_profile, singular_profile
from asymlab.config import ExperimentConfig
from asymlab.errors import AsymlabError, InvalidParams
from asymlab.fields.field_synthesis import (BallRegion, DistanceKind, GeodesicBand, Model, compose_field,
                                            convergence_order, sample_points, supersolution_check)
from asymlab.geometry.hyperbolic_geometry import Geodesic, Horosphere, IdealPoint, Point
from asymlab.operators.operator_family import classify, make_operator
from asymlab.report import BlockResult, RunLedger, emit_report, exit_code
from asymlab.solver.elliptic_solver import (max_principle_gap, removability_probe, solve_disk, solve_radial_bvp,
                                            spike_data, spike_width)
from asymlab.solver.grids import DiskGrid, RadialGrid

logger = logging.getLogger(__name__)

# Initialize a Rich console object
console = Console()


def _operator(config, ref):
    op = config.operator(ref)
    return make_operator(op.kind, op.params)


def _geometry(config, params):
    return int(params.get("n", config.geometry["n"])), float(params.get("c", config.geometry["c"]))


def _unit(n, axis=0):
    e = np.zeros(n)
    e[axis] = 1.0
    return e


def _run_classify(result, block, config, out_dir):
    tol = config.tolerances
    rows = []
    expected = block.params.get("expect", {}) or {}
    for ref in block.params["operators"]:
        spec = _operator(config, ref)
        verdict = classify(spec, quad_tol=tol["quad_tol"], band=tol["classify_band"])
        rows.append((ref, verdict.operator_class.value, verdict.k0, verdict.divergence_exponent))
        result.data[ref] = {"class": verdict.operator_class.value, "k0": verdict.k0,
                            "exponent": verdict.divergence_exponent}
        if ref in expected:
            result.check(f"{ref}.class", verdict.operator_class.value, expected[ref],
                         verdict.operator_class.value == expected[ref])
    window = block.params.get("exponent_range")
    if window:
        for ref, _, _, exponent in rows:
            if math.isfinite(exponent):
                result.check(f"{ref}.exponent", exponent, list(window), window[0] <= exponent <= window[1])
    path = out_dir / "classify.csv"
    with open(path, "w", encoding="utf-8") as f:
        f.write("operator,class,k0,exponent\n")
        for ref, cls, k0, exponent in rows:
            f.write(f"{ref},{cls},{k0:.17g},{exponent:.17g}\n")
    result.artifacts.append(path.name)


def _build_profile(spec, params, config):
    """Profile and (for annulus barriers) the barrier constants named by a run block."""
    n, c = _geometry(config, params)
    family = params.get("family", "scherk")
    quad_tol = config.tolerances["quad_tol"]
    nodes = {"n_nodes": int(params["n_nodes"])} if "n_nodes" in params else {}
    if family == "scherk":
        return scherk_profile(spec, float(params.get("delta", 0.0)), c=c, n=n, quad_tol=quad_tol,
                              kind=params.get("distance", "geodesic"), **nodes), None
    if family == "annulus":
        return annulus_profile(spec, float(params.get("delta", 0.0)), b=float(params.get("b", math.sqrt(c))), n=n,
                               rho=float(params.get("rho", 1.0)), K=params.get("K"), quad_tol=quad_tol, **nodes)
    if family == "singular":
        d_range = tuple(params.get("d_range", (-4.0, 4.0)))
        return singular_profile(spec, n=n, d_range=d_range, quad_tol=quad_tol, c=c, **nodes), None
    raise InvalidParams(f"unknown barrier family `{family}` (scherk, annulus, singular)")


def _run_barriers(result, block, config, out_dir):
    params = block.params
    spec = _operator(config, params["operator"])
    profile, barrier = _build_profile(spec, params, config)
    profile.to_csv(out_dir / "profile.csv")
    profile.to_json(out_dir / "profile.json")
    result.artifacts += ["profile.csv", "profile.json"]
    result.data["profile"] = {"label": profile.label, "nodes": profile.size,
                              "range": [profile.grid[0], profile.grid[-1]]}
    if barrier is not None:
        result.data["barrier"] = barrier.to_dict()
        result.check("annulus.chain", [barrier.delta, barrier.h1, barrier.h0, barrier.K / 2 + barrier.delta / 2],
                     "strict", barrier.delta < barrier.h1 < barrier.h0 < barrier.K / 2 + barrier.delta / 2)
    for entry in params.get("check_at", []) or []:
        d, expected = float(entry["d"]), float(entry["value"])
        tol = float(entry.get("tol", config.tolerances["residual_tol"]))
        value = float(profile(d))
        result.check(f"value@{d:g}", value, tol, abs(value - expected) <= tol, f"expected {expected:.17g}")
    if params.get("check_ode", True):
        ode_tol = config.tolerances["ode_tol"]
        residual = ode_residual(profile, spec)
        result.check("ode_residual", residual, ode_tol, residual <= ode_tol)


def _residual_setup(profile, params, n, c):
    """Composed field and sample region for a residual run."""
    model = Model(n, c)
    family = profile.metadata["family"]
    region = params.get("region", {}) or {}
    if family == "scherk":
        geodesic = Geodesic(IdealPoint(tuple(-_unit(n))), IdealPoint(tuple(_unit(n))))
        field = compose_field(profile, DistanceKind.TO_GEODESIC, geodesic, model)
        band = GeodesicBand(geodesic, tuple(region.get("d_range", (0.2, 2.0))), float(region.get("length", 1.5)),
                            IdealPoint(tuple(_unit(n, 1))))
        return field, band
    if family == "annulus":
        field = compose_field(profile, DistanceKind.TO_POINT, Point(tuple(np.zeros(n)), c), model)
        outer = profile.grid[-1]
        ball = BallRegion(tuple(np.zeros(n)), float(region.get("radius", outer - 0.5)),
                          float(region.get("inner", 1.25)))
        return field, ball
    horosphere = Horosphere(IdealPoint(tuple(_unit(n))), Point(tuple(np.zeros(n)), c))
    field = compose_field(profile, DistanceKind.HOROSPHERICAL, horosphere, model)
    return field, BallRegion(tuple(np.zeros(n)), float(region.get("radius", 1.5)))


def _run_residuals(result, block, config, out_dir):
    params = block.params
    tol = config.tolerances
    n, c = _geometry(config, params)
    spec = _operator(config, params["operator"])
    profile, _ = _build_profile(spec, params, config)
    field, region = _residual_setup(profile, params, n, c)
    samples = sample_points(Model(n, c), region, int(params.get("count", 200)), seed=config.seed)
    h = float(params.get("h", 1e-2))
    for level in range(3):
        step = h / 2 ** level
        report = supersolution_check(field, spec, samples, step, tol=tol["residual_tol"])
        name = f"residuals_h{level}"
        report.to_csv(out_dir / f"{name}.csv")
        result.artifacts.append(f"{name}.csv")
        result.check(f"sign_violations@h={step:g}", report.sign_violations, report.tol + report.allowance,
                     report.passed, f"max |Q| = {report.max_abs:.3g}")
    if params.get("exact", profile.metadata["family"] == "singular"):
        count = int(params.get("order_points", 5))
        orders = [convergence_order(field, spec, x, hs=(h, h / 2, h / 4))[0] for x in samples[:count]]
        observed = float(np.median(orders))
        result.data["orders"] = orders
        result.check("convergence_order", observed, tol["order_min"], observed >= tol["order_min"])


def _run_radial_bvp(result, block, config, out_dir):
    params = block.params
    tol = config.tolerances
    n, c = _geometry(config, params)
    spec = _operator(config, params["operator"])
    n_nodes = int(params.get("n_nodes", 512))
    oracle = params.get("oracle")
    if oracle == "annulus":
        profile, barrier = _build_profile(spec, {**params, "family": "annulus"}, config)
        c = barrier.b ** 2
        grid = RadialGrid(profile.grid[0], profile.grid[-1], n_nodes)
        u_lo, u_hi = barrier.delta, barrier.h0
    elif oracle == "singular":
        d_range = tuple(params.get("d_range", (-4.0, 3.0)))
        profile, _ = _build_profile(spec, {**params, "family": "singular",
                                           "d_range": (d_range[0] - 1.0, d_range[1] + 1.0)}, config)
        grid = RadialGrid(d_range[0], d_range[1], n_nodes, horospherical=True)
        u_lo, u_hi = float(profile(d_range[0])), float(profile(d_range[1]))
    elif oracle is None:
        profile = None
        grid = RadialGrid(float(params["r0"]), float(params["r1"]), n_nodes, graded=bool(params.get("graded")))
        u_lo, u_hi = float(params["u_lo"]), float(params["u_hi"])
    else:
        raise InvalidParams(f"unknown radial oracle `{oracle}` (annulus, singular)")
    solution = solve_radial_bvp(spec, n, c, grid, u_lo, u_hi, tol=tol["solver_tol"],
                                max_iter=int(tol["newton_max_iter"]))
    solution.to_csv(out_dir / "solution.csv")
    solution.to_json(out_dir / "solution.json")
    result.artifacts += ["solution.csv", "solution.json"]
    result.data["flux_constant"] = solution.metadata.get("flux_constant")
    result.check("solver_residual", solution.residual_norm, tol["solver_tol"], solution.converged)
    if profile is not None:
        error = float(np.max(np.abs(solution.values - profile(grid.nodes))))
        bound = float(params.get("oracle_tol", tol["oracle_tol"]))
        result.check("oracle_error", error, bound, error <= bound)


def _disk_grid(params, c):
    """Disk grid of a run block, recentred towards the ideal point of spike and singular-trace data."""
    data = params.get("data", {}) or {}
    puncture = None
    if data.get("kind") in ("spike", "singular-trace") and params.get("recentre", True):
        puncture = IdealPoint(tuple(data.get("ideal", (1.0, 0.0))))
    return DiskGrid(float(params.get("R", 2.0)), int(params.get("n_r", 32)), int(params.get("n_theta", 64)), c,
                    puncture)


def _disk_data(spec, grid, data):
    kind = data.get("kind", "constant")
    if kind == "constant":
        return float(data.get("value", 0.0)), None
    if kind == "spike":
        width = float(data.get("width", spike_width(grid.r_trunc, grid.c, data.get("width_rule", "horoball"))))
        return spike_data(grid, IdealPoint(tuple(data.get("ideal", (1.0, 0.0)))), data.get("plateau", 1.0),
                          width), None
    if kind == "singular-trace":
        top = grid.r_trunc + 1.0
        profile = singular_profile(spec, n=2, d_range=(-top, top), c=grid.c, n_nodes=int(data.get("n_nodes", 2048)))
        horosphere = Horosphere(IdealPoint(tuple(data.get("ideal", (1.0, 0.0)))), Point((0.0, 0.0), grid.c))
        exact = compose_field(profile, DistanceKind.HOROSPHERICAL, horosphere, Model(2, grid.c))
        return exact(grid.ball_coords()[-1]), exact
    raise InvalidParams(f"unknown disk data `{kind}` (constant, spike, singular-trace)")


def _run_disk_solve(result, block, config, out_dir):
    params = block.params
    tol = config.tolerances
    _, c = _geometry(config, params)
    spec = _operator(config, params["operator"])
    grid = _disk_grid(params, c)
    data, exact = _disk_data(spec, grid, params.get("data", {}) or {})
    solution = solve_disk(spec, grid, data, tol=tol["solver_tol"], max_iter=int(tol["newton_max_iter"]))
    solution.to_csv(out_dir / "solution.csv")
    solution.to_json(out_dir / "solution.json")
    result.artifacts += ["solution.csv", "solution.json"]
    result.check("solver_residual", solution.residual_norm, solution.tol, solution.converged)
    allowance = grid.h ** 2 * max(1.0, float(np.max(np.abs(solution.values))))
    gap = max_principle_gap(solution, allowance)
    result.check("max_principle", gap, allowance, gap <= 0.0)
    if exact is not None:
        error = float(np.max(np.abs(solution.values - exact(grid.ball_coords()))))
        bound = float(params.get("oracle_tol", tol["oracle_tol"]))
        result.check("oracle_error", error, bound, error <= bound, "sup over the nodes")


def _run_probe(result, block, config, out_dir):
    params = block.params
    tol = config.tolerances
    spec = _operator(config, params["operator"])
    mode = params.get("mode", "spike")
    plateau = float(params.get("plateau", 1.0))
    annulus = tuple(params.get("annulus", (0.5, 1.5)))
    report = removability_probe(spec, IdealPoint(tuple(params.get("p1", (1.0, 0.0)))), plateau,
                                params.get("R_sequence", (2.0, 3.0, 4.0)), grid_params=params.get("grid"),
                                mode=mode, annulus=annulus, tol=tol["solver_tol"],
                                max_workers=params.get("max_workers"),
                                width_rule=params.get("width_rule", "horoball"))
    report.to_json(out_dir / "probe.json")
    report.append_jsonl(out_dir / "probe.jsonl", stamp=config.seed)
    result.artifacts += ["probe.json", "probe.jsonl"]
    result.data["sups"] = report.sups.tolist()
    result.check("converged", sum(e.converged for e in report.entries), len(report.entries),
                 all(e.converged for e in report.entries))
    if mode == "spike":
        sups = report.sups
        result.check("max_principle", [float(np.nanmin(sups)), float(np.nanmax(sups))], [0.0, plateau],
                     bool(np.all((sups >= -tol["solver_tol"]) & (sups <= plateau + tol["solver_tol"]))))
        bound = float(params.get("cauchy_tol", tol["probe_cauchy_tol"]))
        last = float(report.increments()[-1]) if len(report.entries) > 1 else math.nan
        result.check("cauchy_increment", last, bound, report.stabilized(bound),
                     "stabilized" if report.stabilized(bound) else "not stabilized")
    else:
        bound = float(params.get("oracle_tol", tol["probe_oracle_tol"]))
        errors = [e.oracle_error for e in report.entries]
        worst = max((e for e in errors if e is not None), default=math.nan)
        result.check("oracle_error", worst, bound, all(e is not None and e <= bound for e in errors),
                     "sup error on the annulus at every R")


HANDLERS = {
    "classify": _run_classify,
    "barriers": _run_barriers,
    "residuals": _run_residuals,
    "radial-bvp": _run_radial_bvp,
    "disk-solve": _run_disk_solve,
    "removability-probe": _run_probe,
}


def run_block(index, block, config: ExperimentConfig, out_dir):
    """
    Run one block in its own output directory. Errors of the library, and
    parameters the handler cannot use, mark the block incomplete instead of
    propagating.
    """
    result = BlockResult(index, block.kind, block.name)
    block_dir = Path(out_dir) / result.label
    block_dir.mkdir(parents=True, exist_ok=True)
    try:
        HANDLERS[block.kind](result, block, config, block_dir)
    except (AsymlabError, OSError) as e:
        logger.error(f"🔴 {result.label} failed: {e}")
        result.incomplete = True
        result.error = f"{type(e).__name__}: {e}"
    except (KeyError, ValueError, TypeError) as e:
        logger.error(f"🔴 {result.label} has unusable parameters: {e!r}")
        result.incomplete = True
        result.error = f"InvalidParams: {type(e).__name__}: {e}"
    result.artifacts = [f"{result.label}/{a}" for a in result.artifacts]
    return result


def run_experiment(config: ExperimentConfig, out_dir=None, parallel=False, config_path=None, timestamp=None):
    """
    Execute every run block of a config and write the report.

    Returns:
        int: 0 when every check passed, 2 when a check failed, 1 when a block
        could not complete.
    """
    out_dir = Path(out_dir or config.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    console.log(f"Running: [bold green]{config_path or 'config'}[/bold green] "
                f"({len(config.runs)} blocks, seed {config.seed}) -> [bold]{out_dir}[/bold]")
    start_time = time.time()

    results = []
    if parallel and len(config.runs) > 1:
        with ProcessPoolExecutor() as pool:
            futures = [pool.submit(run_block, i, block, config, out_dir) for i, block in enumerate(config.runs)]
            results = [f.result() for f in futures]
    else:
        for i, block in enumerate(config.runs):
            block_start = time.time()
            results.append(run_block(i, block, config, out_dir))
            console.log(Text(f"{results[-1].label}: {time.time() - block_start:.2f}s", style="italic dim"))

    for r in results:
        status = "[yellow]incomplete[/yellow]" if r.incomplete else (
            "[green]pass[/green]" if r.passed else "[bold red]fail[/bold red]")
        console.log(f"{r.label}: {status} ({sum(c.passed for c in r.checks)}/{len(r.checks)} checks)")

    code = exit_code(results)
    try:
        emit_report(results, out_dir, config, timestamp=timestamp)
    except OSError as e:
        console.log(f"[bold red]Error writing the report to {out_dir} > {e}[/bold red]")
        code = 1
    console.log(Text(f"Total: {time.time() - start_time:.2f}s, exit code {code}", style="italic dim"))

    try:
        RunLedger().record(config_path, config.seed, "incomplete" if code == 1 else ("pass" if code == 0 else "fail"),
                           code, out_dir)
    except OSError as e:
        logger.warning(f"🔴 run ledger not updated: {e}")
    return code
