"""The percoz subcommands.

Each Command checks its spec and options in `precondition` (every problem becomes one
'field: message' line of a UsageError) and computes an Outcome in `effect`.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from asymptotics import (
    DecaySeries,
    TauSurface,
    cap_grid,
    compare_tau_models,
    convexity_check,
    curvature_check,
    dual_directions,
    equidecay_surface,
    oz_fit,
    oz_series,
    polar_support_check,
    rate_profile,
    tau_sanity,
)
from combinatorics import (
    DEFAULT_BUDGET,
    auto_volume,
    check_invariants,
    phi_bar_estimate,
    phi_exact,
    phi_t_exact,
    psi_table,
    staircase_bound,
    subadditivity_table,
    surface_count_table,
)
from command import (
    Command,
    Option,
    Outcome,
    as_bool,
    as_edge,
    as_float,
    as_floats,
    as_int,
    as_ints,
    as_record,
    choice,
    choices,
    require,
)
from console import get_logger
from errors import DomainError, FitError, PercozError, SingularCovarianceError
from events import EVENT_KINDS, Direction, Event, check_margin, classifier_for
from exact import (
    derivative_sign_check,
    enumerate_event,
    is_monotone,
    lower_bound_check,
    non_monotone_witness,
    verify_estimator,
)
from experiment import ExperimentSpec
from kernel import Kernel
from lattice import BondConfig, cluster_indices, l1_norm, origin, scale, unit
from records import dumps
from renewal import (
    SYNTHETIC_KERNELS,
    TILT_TOLERANCE,
    build_model,
    finite_difference_check,
    generating_value,
    mass_gap_check,
    mean_cov,
    phi_prefactor,
    ray_window,
    renewal_consistency,
    renewal_residual,
    series_solve,
    solve_grid,
    solve_tilt_boundary,
    supermultiplicativity_check,
    synthetic_kernel,
    tail_certificate,
    tau_at,
    tilt,
    trace_tilt_surface,
)
from report import Plot
from sampler import MAX_TABLE_EDGES, decay_profile, estimate_kernels, event_table, sample_config, surface_tail

log = get_logger(__name__)

EVENT_CHOICES = ("tautology", "edge-open", "isolated-edge", "connect", "finite-two-point") + EVENT_KINDS
ORACLE_QUANTITIES = ("phi", "psi-table", "phi-t", "subadditivity", "phi-bar", "surface-count")
SURFACE_CHECKS = ("convexity", "curvature", "polar", "dual")


def _fmt(x: Sequence[int]) -> str:
    return ",".join(str(int(c)) for c in x)


# ----------------------------------------------------------------------
# Kernel sources: a kernel file, an inline record, or a synthetic name
# ----------------------------------------------------------------------
class SyntheticSource(NamedTuple):
    name: str
    params: Dict[str, float]


def as_kernel_source(value: Any):
    """'kernel.json', a kernel record, or 'three-atom:q=0.4,q2=0.3'."""
    if isinstance(value, dict):
        return Kernel.from_record(value)
    text = str(value)
    if Path(text).is_file():
        return Kernel.load(text)
    name, _, params = text.partition(":")
    if name not in SYNTHETIC_KERNELS:
        raise ValueError(f"{text!r} is neither a kernel file nor one of {sorted(SYNTHETIC_KERNELS)}")
    pairs = [kv.split("=", 1) for kv in params.split(",") if kv.strip()]
    return SyntheticSource(name, {k.strip(): float(v) for k, v in pairs})


def _kernel(source, dim: int) -> Kernel:
    if isinstance(source, Kernel):
        return source
    try:
        return synthetic_kernel(source.name, dim, **source.params)
    except TypeError as exc:
        raise ValueError(f"{source.name}: {exc}") from None


def _kernel_problems(name: str, source, dim: int) -> List[str]:
    if source is None:
        return []
    try:
        _kernel(source, dim)
    except (ValueError, PercozError) as exc:
        return [f"{name}: {exc}"]
    return []


def _direction_for(spec: ExperimentSpec, dim: int) -> Direction:
    if spec.t is None:
        return Direction.axis(dim, 0)
    if len(spec.t) != dim:
        raise DomainError(f"t has {len(spec.t)} components but the kernel lives in dimension {dim}")
    return Direction.of(spec.t)


def _point_problems(spec: ExperimentSpec, points: Sequence[Sequence[int]], field: str = "displacements") -> List[str]:
    box = spec.make_box()
    problems = []
    for x in points:
        try:
            check_margin(box, x, spec.margin)
        except DomainError as exc:
            problems.append(f"{field}: {exc}")
    return problems


def _directed_problems(spec: ExperimentSpec) -> List[str]:
    t = spec.direction()
    return [
        f"displacements: <t,x> must be positive, x={list(x)}"
        for x in spec.displacements
        if not t.gt(t.level(x), 0)
    ]


# ----------------------------------------------------------------------
# sample
# ----------------------------------------------------------------------
CONFIG_COLUMNS = ("stream_id", "n_open", "cluster_size", "cluster_edges", "finite", "file")
EVENT_COLUMNS = ("stream_id", "x", "finite_connect") + EVENT_KINDS


def _sample_pre(spec: ExperimentSpec, opts) -> List[str]:
    problems = _point_problems(spec, [origin(spec.dim)], "box")
    if spec.displacements:
        problems += _point_problems(spec, spec.displacements) + _directed_problems(spec)
    return problems


def _sample(spec: ExperimentSpec, opts) -> Outcome:
    box = spec.make_box()
    start = box.index(origin(box.dim))
    clf = classifier_for(box, spec.direction(), spec.margin) if spec.displacements else None
    rows, event_rows, defects, artifacts = [], [], [], {}
    for stream in range(spec.samples):
        config = sample_config(box, spec.p, spec.seed, stream)
        blob = config.to_bytes()
        restored = BondConfig.from_bytes(blob)
        if restored != config or (restored.seed, restored.stream_id) != (config.seed, config.stream_id):
            defects.append(f"stream {stream}: binary round trip changed the configuration")
        order, edges = cluster_indices(config, start)
        name = ""
        if stream < opts["keep"]:
            name = f"configs/config_{stream:06d}.pcz"
            artifacts[name] = blob
        rows.append({
            "stream_id": stream,
            "n_open": config.n_open,
            "cluster_size": len(order),
            "cluster_edges": len(edges),
            "finite": not bool(box.shell[order].any()),
            "file": name,
        })
        if clf is None:
            continue
        cluster = clf.origin_cluster(config)
        for x in spec.displacements:
            record = clf.classify(config, x, cluster=cluster)
            defects.extend(f"stream {stream}: {msg}" for msg in record.implication_failures())
            event_rows.append(dict(
                {"stream_id": stream, "x": _fmt(x), "finite_connect": record.finite_connect},
                **{kind: record.flag(kind) for kind in EVENT_KINDS},
            ))
    tables = {"configs": (rows, CONFIG_COLUMNS)}
    if event_rows:
        tables["events"] = (event_rows, EVENT_COLUMNS)
    record = {
        "box": {"lo": list(box.lo), "hi": list(box.hi)},
        "n_edges": box.n_edges,
        "n_configs": spec.samples,
        "mean_open_fraction": float(np.mean([r["n_open"] for r in rows]) / box.n_edges),
        "finite_fraction": float(np.mean([r["finite"] for r in rows])),
        "files": sorted(artifacts),
    }
    return Outcome(record, tables, defects=defects, artifacts=artifacts)


# ----------------------------------------------------------------------
# estimate
# ----------------------------------------------------------------------
ESTIMATE_COLUMNS = ("kind", "x", "value", "std_error", "n")
CONSISTENCY_COLUMNS = ("x", "h", "convolution", "sigma", "z")
SUPER_COLUMNS = ("x", "y", "h_sum", "product", "sigma", "holds")
RATE_COLUMNS = ("n", "rate", "std_error")


def _estimate_pre(spec: ExperimentSpec, opts) -> List[str]:
    if not spec.displacements:
        return ["displacements: at least one displacement is required"]
    problems = _point_problems(spec, [origin(spec.dim)], "box")
    return problems + _point_problems(spec, spec.displacements) + _directed_problems(spec)


def _estimate(spec: ExperimentSpec, opts) -> Outcome:
    box, t = spec.make_box(), spec.direction()
    est = estimate_kernels(spec.p, t, spec.displacements, box, spec.samples, spec.seed, spec.margin, spec.threads, spec.quiet)
    record = est.to_record()
    defects = []
    if est.implication_failures:
        defects.append(f"{est.implication_failures} samples broke an event implication")
        defects.extend(est.failure_examples)
    tables = {"estimates": (est.rows(), ESTIMATE_COLUMNS)}
    plots = []
    sigmas = opts["sigmas"]

    if opts["consistency"]:
        rows = renewal_consistency(est.kernels["h"], est.kernels["f"], spec.displacements)
        table = [{"x": _fmt(r.x), "h": r.h, "convolution": r.convolution, "sigma": r.sigma, "z": r.z} for r in rows]
        record["consistency"] = table
        tables["consistency"] = (table, CONSISTENCY_COLUMNS)
        defects.extend(
            f"h{r.x} - (f*h){r.x} is {r.z:.2f} sigma from zero" for r in rows if r.z is not None and abs(r.z) > sigmas
        )
    if opts["supermultiplicativity"]:
        rows = supermultiplicativity_check(est.kernels["h"], spec.displacements, sigmas)
        table = [
            {"x": _fmt(r.x), "y": _fmt(r.y), "h_sum": r.h_sum, "product": r.product, "sigma": r.sigma, "holds": r.holds}
            for r in rows
        ]
        record["supermultiplicativity"] = table
        tables["supermultiplicativity"] = (table, SUPER_COLUMNS)
        defects.extend(f"h({_fmt(r.x)}+{_fmt(r.y)}) below h({_fmt(r.x)}) h({_fmt(r.y)})" for r in rows if not r.holds)
    artifacts = {}
    if opts["n_list"]:
        series = decay_profile(spec.p, t.t, opts["n_list"], box, spec.samples, spec.seed, spec.margin, spec.threads, spec.quiet)
        record["series"] = series.to_record()
        artifacts["series.json"] = dumps(series.to_record())
        tables["decay"] = (rate_profile(series), RATE_COLUMNS)
        plots.append(Plot("decay", "n", "rate", "std_error", title="-log P(0<->n x, finite) / n"))
    return Outcome(record, tables, plots, defects, artifacts)


# ----------------------------------------------------------------------
# exact
# ----------------------------------------------------------------------
PROBABILITY_COLUMNS = ("p", "probability", "value", "derivative")
BOUND_COLUMNS = ("p", "exact", "bound", "holds")


def _event(spec: ExperimentSpec, opts) -> Event:
    kind = opts["event"]
    return Event(
        kind,
        x=spec.x() if kind not in ("tautology", "edge-open", "isolated-edge") else None,
        edge=opts["edge"],
        t=spec.direction().t if kind in EVENT_KINDS else None,
        margin=spec.margin,
    )


def _exact_pre(spec: ExperimentSpec, opts) -> List[str]:
    box = spec.make_box()
    problems = []
    if box.n_edges > MAX_TABLE_EDGES:
        problems.append(f"box: has {box.n_edges} edges; exact enumeration stops at {MAX_TABLE_EDGES}")
    kind = opts["event"]
    if kind in ("edge-open", "isolated-edge"):
        problems += require(opts, "edge")
        if opts["edge"] is not None:
            base, axis = opts["edge"]
            if len(base) != spec.dim or not 0 <= axis < spec.dim:
                problems.append(f"edge: {list(base)}:{axis + 1} is not an edge in dimension {spec.dim}")
            else:
                tip = tuple(c + (1 if k == axis else 0) for k, c in enumerate(base))
                if not (box.contains(base) and box.contains(tip)):
                    problems.append(f"edge: {list(base)}:{axis + 1} is not inside the box")
    elif kind != "tautology":
        problems += _point_problems(spec, [origin(spec.dim), spec.x()])
        if kind in EVENT_KINDS:
            t = spec.direction()
            if not t.gt(t.level(spec.x()), 0):
                problems.append(f"displacements: <t,x> must be positive, x={list(spec.x())}")
    if opts["lower_bound"] and kind != "finite-two-point":
        problems.append("lower-bound: only defined for the finite-two-point event")
    return problems


def _exact(spec: ExperimentSpec, opts) -> Outcome:
    box = spec.make_box()
    event = _event(spec, opts)
    table = event_table(box, event, spec.threads, spec.quiet)
    result = enumerate_event(box, event, table=table)
    p_list = opts["p_list"] or (spec.p,)
    rows = []
    for p in p_list:
        prob = result.probability(p)
        rows.append({"p": p, "probability": str(prob), "value": float(prob), "derivative": float(result.derivative(p))})
    record = {
        "event": event.describe(),
        "box": {"lo": list(box.lo), "hi": list(box.hi)},
        "result": result.to_record(),
        "probabilities": rows,
        "monotone": is_monotone(table),
        "derivative_nonnegative": derivative_sign_check(result),
    }
    tables = {"probabilities": (rows, PROBABILITY_COLUMNS)}
    plots = [Plot("probabilities", "p", "value", title=event.describe())]
    defects = []
    if opts["witness"]:
        up, down = non_monotone_witness(box, event, table=table)
        record["witness"] = {
            "switches_on": up.to_record() if up else None,
            "switches_off": down.to_record() if down else None,
        }
    if opts["verify"]:
        checks = []
        for p in p_list:
            v = verify_estimator(box, event, p, opts["verify"], spec.seed, threads=spec.threads)
            checks.append(dict(v.to_record(), p=p))
            if not v.passed:
                defects.append(f"Monte Carlo at p={p} is {v.sigmas:.1f} sigma from the exact value")
        record["verification"] = checks
    if opts["lower_bound"]:
        bound_rows = lower_bound_check(box, spec.x(), opts["p_list"] or tuple(k / 10 for k in range(1, 10)), margin=spec.margin, threads=spec.threads)
        table_rows = [{"p": r.p, "exact": r.exact, "bound": r.bound, "holds": r.holds} for r in bound_rows]
        record["lower_bound"] = table_rows
        tables["lower_bound"] = (table_rows, BOUND_COLUMNS)
        defects.extend(f"exact probability below p^psi (1-p)^phi at p={r.p}" for r in bound_rows if not r.holds)
    return Outcome(record, tables, plots, defects)


# ----------------------------------------------------------------------
# oracle
# ----------------------------------------------------------------------
def _ball(dim: int, radius: int) -> List[Tuple[int, ...]]:
    return [x for x in itertools.product(range(-radius, radius + 1), repeat=dim) if 0 < l1_norm(x) <= radius]


def _oracle_pre(spec: ExperimentSpec, opts) -> List[str]:
    quantity = opts["quantity"]
    problems = []
    if quantity in ("phi", "psi-table", "phi-t") and not any(spec.x()):
        if quantity != "phi":
            problems.append(f"displacements: {quantity} needs a nonzero x")
    if quantity == "phi-t":
        t = spec.direction()
        if not t.gt(t.level(spec.x()), 0):
            problems.append(f"displacements: <t,x> must be positive, x={list(spec.x())}")
    if opts["max_volume"] is not None and opts["max_volume"] < 1:
        problems.append("max-volume: must be positive")
    return problems


def _oracle(spec: ExperimentSpec, opts) -> Outcome:
    quantity, budget = opts["quantity"], opts["budget"]
    x = spec.x()
    volume = opts["max_volume"]
    if quantity == "phi":
        volume = volume or auto_volume(x)
        result = phi_exact(x, volume, budget, workers=spec.threads)
        record = dict(result.to_record(), x=list(x), max_volume=volume, staircase_bound=staircase_bound(x))
        return Outcome(record, defects=check_invariants(x, result))
    if quantity == "psi-table":
        volume = volume or auto_volume(x)
        table = psi_table(x, volume, budget)
        rows = [{"k": k, "psi": v, "psi_upper": table.psi_upper[k]} for k, v in table.psi.items()]
        record = {"x": list(x), "max_volume": volume, "psi": table.psi, "psi_upper": table.psi_upper, "complete": table.complete}
        return Outcome(record, {"psi": (rows, ("k", "psi", "psi_upper"))}, [Plot("psi", "k", "psi")])
    if quantity == "phi-t":
        volume = volume or auto_volume(x)
        result = phi_t_exact(x, spec.direction(), volume, budget)
        return Outcome(dict(result.to_record(), x=list(x), t=list(spec.direction().t), max_volume=volume))
    if quantity == "subadditivity":
        points = spec.displacements if len(spec.displacements) > 1 else _ball(spec.dim, opts["radius"])
        report = subadditivity_table(points, volume, budget)
        rows = [
            {"x": _fmt(r.x), "y": _fmt(r.y), "phi_x": r.phi_x, "phi_y": r.phi_y, "phi_x_minus_y": r.phi_x_minus_y, "holds": r.holds, "certified": r.certified}
            for r in report.rows
        ]
        record = {
            "points": [list(p) for p in points],
            "pairs": len(rows),
            "violations": len(report.violations),
            "uncertified": sum(1 for r in report.rows if not r.certified),
        }
        columns = ("x", "y", "phi_x", "phi_y", "phi_x_minus_y", "holds", "certified")
        return Outcome(record, {"subadditivity": (rows, columns)}, defects=report.defects)
    if quantity == "phi-bar":
        series = phi_bar_estimate(spec.direction(), opts["n_list"] or (1, 2, 3, 4), volume or 10, budget)
        rows = [{"n": n, "value": v, "certified": c} for n, v, c in zip(series.n, series.values, series.certified)]
        return Outcome(
            {"t": list(spec.direction().t), "series": series},
            {"phi_bar": (rows, ("n", "value", "certified"))},
            [Plot("phi_bar", "n", "value", title="phi(n x)/n")],
        )
    table = surface_count_table(spec.dim, volume or 6, budget)
    rows = [{"k": k, "count": c} for k, c in table.counts.items()]
    return Outcome(asdict(table), {"surface_counts": (rows, ("k", "count"))}, [Plot("surface_counts", "k", "count", logscale_y=True)])


# ----------------------------------------------------------------------
# renewal-check
# ----------------------------------------------------------------------
RAY_COLUMNS = ("n", "h", "series")


def _renewal_pre(spec: ExperimentSpec, opts) -> List[str]:
    problems = require(opts, "f")
    if opts["f"] is not None:
        problems += _kernel_problems("f", opts["f"], spec.dim)
    problems += _kernel_problems("h", opts["h"], spec.dim)
    if opts["window"] < 1:
        problems.append("window: must be positive")
    return problems


def _renewal_check(spec: ExperimentSpec, opts) -> Outcome:
    f = _kernel(opts["f"], spec.dim)
    t = _direction_for(spec, f.dim)
    window = ray_window(f.dim, opts["window"], opts["width"])
    grid = solve_grid(f, window, t)
    residual = renewal_residual(f, grid)
    series_grid, bound = series_solve(f, window, opts["series_k"])
    gap = float(np.max(np.abs(grid.values - series_grid.values)))

    s = solve_tilt_boundary(f, t.t)
    F = generating_value(f, s)
    mu, cov = mean_cov(f, s, allow_singular=True)
    fd = finite_difference_check(f, s)
    tail = tail_certificate(tilt(f, s))
    tilt_record = {
        "s_star": s,
        "F_minus_1": F - 1.0,
        "mu": mu,
        "cov": cov,
        "finite_differences": {"gradient_error": fd.gradient_error, "hessian_error": fd.hessian_error, "ok": fd.ok},
        "tail": {"rate": tail.rate, "boundary_mass": tail.boundary_mass, "certified": tail.certified},
    }
    try:
        model = build_model(f, t.t)
        tilt_record["phi_prefactor"] = phi_prefactor(model)
        tilt_record["tau_along_mu"] = model.tau_along_mu
    except (SingularCovarianceError, PercozError) as exc:
        log.warning("no OZ prefactor for this kernel: %s", exc)
        tilt_record["phi_prefactor"] = None

    u = t.u
    rows = [{"n": n, "h": grid[scale(n, u)], "series": series_grid[scale(n, u)]} for n in range(opts["window"] + 1)]
    record = {
        "kernel": {"dim": f.dim, "kind": f.kind, "mass": f.total_mass, "entries": len(f)},
        "window": {"lo": list(window.lo), "hi": list(window.hi)},
        "residual": residual,
        "series": {"K": opts["series_k"], "max_gap": gap, "tail_bound": bound},
        "tilt": tilt_record,
    }
    defects = []
    if residual >= opts["residual_tol"]:
        defects.append(f"renewal residual {residual:.3g} is not below {opts['residual_tol']:.1g}")
    if gap > bound + opts["residual_tol"]:
        defects.append(f"series differs from the solve by {gap:.3g}, above the tail bound {bound:.3g}")
    if abs(F - 1.0) > TILT_TOLERANCE:
        defects.append(f"|F(s*) - 1| = {abs(F - 1.0):.3g}")
    if not fd.ok:
        defects.append(f"finite differences disagree: gradient {fd.gradient_error:.3g}, Hessian {fd.hessian_error:.3g}")
    if opts["h"] is not None:
        report = mass_gap_check(f, _kernel(opts["h"], spec.dim))
        record["mass_gap"] = report.to_record()
        defects.extend(report.defects)
    tables = {"ray": (rows, RAY_COLUMNS)}
    return Outcome(record, tables, [Plot("ray", "n", "h", logscale_y=True, title="h(n u)")], defects)


# ----------------------------------------------------------------------
# synthetic-oz
# ----------------------------------------------------------------------
DECAY_COLUMNS = ("n", "h", "oz", "ratio")


def as_model(value: Any) -> dict:
    record = as_record(value)
    if "kernel" not in record:
        raise ValueError("model needs a 'kernel' entry")
    return record


def _model_kernel(spec: ExperimentSpec, opts) -> Tuple[Kernel, Optional[Tuple[float, ...]]]:
    model = opts["spec"]
    if model is not None:
        source = as_kernel_source(model["kernel"])
        if isinstance(source, SyntheticSource) and model.get("params"):
            source = SyntheticSource(source.name, dict(source.params, **model["params"]))
        direction = model.get("direction")
        return _kernel(source, int(model.get("dim", spec.dim))), tuple(direction) if direction else None
    source = opts["kernel"] or SyntheticSource("full-rank", {})
    return _kernel(source, spec.dim), tuple(spec.t) if spec.t else None


def _oz_pre(spec: ExperimentSpec, opts) -> List[str]:
    try:
        _model_kernel(spec, opts)
    except (ValueError, TypeError, PercozError) as exc:
        return [f"spec: {exc}"]
    if len(opts["n_list"]) < 4 or min(opts["n_list"]) < 1:
        return ["n-list: needs at least four positive lengths"]
    return []


def _synthetic_oz(spec: ExperimentSpec, opts) -> Outcome:
    f, direction = _model_kernel(spec, opts)
    model = build_model(f, direction)
    n_list = tuple(sorted(set(opts["n_list"])))
    n_max = max(n_list)
    width = opts["width"] or min(n_max, 6 * math.ceil(math.sqrt(n_max)))
    grid = solve_grid(f, ray_window(f.dim, n_max, width))
    step = unit(f.dim, 0)
    series = DecaySeries(tuple(float(c) for c in step), n_list, tuple(grid.ray(step, n_list)), (), "renewal-solve", step)
    fit = oz_fit(series, f.dim, opts["correction_order"])
    phi_closed = phi_prefactor(model)
    rel = abs(fit.phi - phi_closed) / phi_closed
    predicted = oz_series(model.tau_along_mu, phi_closed, f.dim, n_list, step)

    record = fit.to_record()
    record.update({
        "dim": f.dim,
        "model": model.to_record(),
        "Phi_closed_form": phi_closed,
        "Phi_relative_error": rel,
        "tau_predicted": model.tau_along_mu,
        "residuals_decreasing": fit.residuals_decreasing,
        "window": {"lo": list(grid.window.lo), "hi": list(grid.window.hi)},
        "series": series.to_record(),
    })
    rows = [
        {"n": n, "h": h, "oz": o, "ratio": h / o if o > 0 else None}
        for n, h, o in zip(n_list, series.values, predicted.values)
    ]
    defects = []
    if rel > opts["phi_rtol"]:
        defects.append(f"fitted Phi {fit.phi:.5g} is {100 * rel:.2f}% from the closed form {phi_closed:.5g}")
    if not fit.residuals_decreasing:
        defects.append(f"pure OZ residuals do not decrease with n (trend {fit.residual_trend:.3g})")
    plots = [Plot("decay", "n", "h", logscale_y=True, title="h(n u1)"), Plot("decay", "n", "ratio", title="h / OZ")]
    return Outcome(record, {"decay": (rows, DECAY_COLUMNS)}, plots, defects, {"series.json": dumps(series.to_record())})


# ----------------------------------------------------------------------
# oz-fit
# ----------------------------------------------------------------------
def as_series(value: Any) -> DecaySeries:
    return DecaySeries.from_record(as_record(value))


def _oz_fit_pre(spec: ExperimentSpec, opts) -> List[str]:
    problems = require(opts, "series")
    series = opts["series"]
    if series is not None and len(series.direction) != spec.dim:
        problems.append(f"dim: the series lives in dimension {len(series.direction)}, not {spec.dim}")
    return problems


def _oz_fit(spec: ExperimentSpec, opts) -> Outcome:
    series = opts["series"]
    fit = oz_fit(series, spec.dim, opts["correction_order"], opts["sigmas"])
    record = fit.to_record()
    record.update({
        "dim": spec.dim,
        "source": series.source,
        "n_points": len(series.n),
        "tau_models": compare_tau_models(series, spec.dim),
    })
    rows = rate_profile(series)
    return Outcome(record, {"rates": (rows, RATE_COLUMNS)}, [Plot("rates", "n", "rate", "std_error", title="-log h / L")])


# ----------------------------------------------------------------------
# surface
# ----------------------------------------------------------------------
def as_surface(value: Any) -> TauSurface:
    return TauSurface.from_record(as_record(value))


def _surface_pre(spec: ExperimentSpec, opts) -> List[str]:
    if opts["tau"] is None and opts["f"] is None:
        return ["tau: either --tau or --f is required"]
    problems = _kernel_problems("f", opts["f"], spec.dim)
    if "dual" in opts["check"] and opts["dual"] is None:
        problems.append("dual: the dual check needs --dual x_hat")
    return problems


def _traced_surface(f: Kernel, center: np.ndarray, n: int, half_angle: float) -> TauSurface:
    points = trace_tilt_surface(f, cap_grid(center, n, half_angle))
    surface = TauSurface.from_tilt_points(points)
    surface.tau_fn = lambda d: tau_at(f, d)
    return surface


def _surface(spec: ExperimentSpec, opts) -> Outcome:
    checks = opts["check"]
    sigmas = opts["sigmas"]
    f = _kernel(opts["f"], spec.dim) if opts["f"] is not None else None
    dim = f.dim if f is not None else opts["tau"].dim
    center = np.asarray(opts["direction"] or (spec.t if spec.t and len(spec.t) == dim else unit(dim, 0)), dtype=float)
    center = center / np.linalg.norm(center)
    if f is not None:
        surface = _traced_surface(f, center, opts["rays"], opts["half_angle"])
        convex_surface = _traced_surface(f, center, opts["convexity_rays"], opts["half_angle"])
    else:
        surface = convex_surface = opts["tau"]
    points = equidecay_surface(surface)
    record: Dict[str, Any] = {"dim": dim, "n_directions": len(surface.directions), "source": "kernel" if f is not None else "tau"}
    defects: List[str] = []

    sanity = tau_sanity(surface)
    record["tau_sanity"] = {"ratio": sanity.ratio, "ok": sanity.ok}
    if not sanity.ok:
        defects.append(f"max tau / min tau = {sanity.ratio:.3g} is not a norm-like ratio")
    if "convexity" in checks:
        report = convexity_check(convex_surface, sigmas)
        record["convexity"] = report.to_record()
        defects.extend(report.defects)
    if "curvature" in checks:
        try:
            result = curvature_check(points, center)
            record["curvature"] = result.to_record()
            if not result.positive(2.0):
                defects.append(f"principal curvatures {result.curvatures.tolist()} are not positive at 2 sigma")
        except FitError as exc:
            log.warning("curvature: %s", exc)
            record["curvature"] = {"error": str(exc)}
    if "polar" in checks:
        support = polar_support_check(surface)
        record["polar"] = {"support": list(support.support), "max_relative_gap": support.max_relative_gap}
    if "dual" in checks:
        x_hat = np.asarray(opts["dual"], dtype=float)
        x_hat = x_hat / np.linalg.norm(x_hat)
        if f is not None:
            dirs = np.vstack([x_hat, cap_grid(x_hat, 24, opts["half_angle"])])
            table = (dirs, np.array([tau_at(f, d) for d in dirs]))
        else:
            table = (surface.directions, surface.tau)
        record["dual"] = dual_directions(x_hat, table).to_record()

    columns = tuple(f"d{k + 1}" for k in range(dim)) + ("tau", "tau_err") + tuple(f"p{k + 1}" for k in range(dim))
    rows = [
        dict(
            {f"d{k + 1}": d[k] for k in range(dim)},
            tau=tau, tau_err=err,
            **{f"p{k + 1}": p[k] for k in range(dim)},
        )
        for d, tau, err, p in zip(surface.directions, surface.tau, surface.tau_err, points)
    ]
    record["surface"] = surface.to_record()
    return Outcome(record, {"surface": (rows, columns)}, [Plot("surface", "p1", "p2", title="{tau <= 1}")], defects)


# ----------------------------------------------------------------------
# surface-tail
# ----------------------------------------------------------------------
TAIL_COLUMNS = ("delta", "value", "std_error", "conditioning", "n", "status")


def _tail_pre(spec: ExperimentSpec, opts) -> List[str]:
    problems = _point_problems(spec, [origin(spec.dim), spec.x()])
    if not any(spec.x()):
        problems.append("displacements: x must be nonzero")
    if any(d < 0 for d in opts["delta"]):
        problems.append("delta: must be nonnegative")
    return problems


def _surface_tail(spec: ExperimentSpec, opts) -> Outcome:
    box, x = spec.make_box(), spec.x()
    phi = opts["phi"]
    if phi is None:
        oracle = phi_exact(x, auto_volume(x))
        phi = oracle.phi
    rows, defects = [], []
    for delta in sorted(opts["delta"]):
        r = surface_tail(x, delta, spec.p, box, spec.samples, spec.seed, phi, spec.margin, spec.threads, spec.quiet)
        rows.append(dict(r.to_record(), delta=delta, conditioning=r.conditioning))
    values = [r["value"] for r in rows if r["value"] is not None]
    if any(b > a for a, b in zip(values, values[1:])):
        defects.append("tail probability increases with delta")
    record = {"x": list(x), "phi": phi, "results": rows}
    return Outcome(record, {"tail": (rows, TAIL_COLUMNS)}, [Plot("tail", "delta", "value", "std_error", logscale_y=True)], defects)


# ----------------------------------------------------------------------
# Registry
# ----------------------------------------------------------------------
COMMANDS = [
    Command(
        name="sample",
        description="Sample bond configurations, save them in binary form and classify the events",
        effect=_sample,
        precondition=_sample_pre,
        options=(Option("keep", "configurations written as .pcz files", as_int, 8),),
        output_name="sample.json",
    ),

    Command(
        name="estimate",
        description="Monte Carlo estimates of the directed kernels at every displacement",
        effect=_estimate,
        precondition=_estimate_pre,
        options=(
            Option("consistency", "compare h with f*h at every displacement", as_bool, False, flag=True),
            Option("supermultiplicativity", "check h(x+y) >= h(x)h(y)", as_bool, False, flag=True),
            Option("n-list", "also estimate P(0<->n t, finite) for these n", as_ints),
            Option("sigmas", "tolerance in standard errors", as_float, 3.0),
        ),
        output_name="estimate.json",
    ),

    Command(
        name="exact",
        description="Exhaustive enumeration of an event on a tiny box",
        effect=_exact,
        precondition=_exact_pre,
        options=(
            Option("event", "event kind", choice(*EVENT_CHOICES), "finite-two-point"),
            Option("edge", "edge as 'x,y,z:axis' for edge events", as_edge),
            Option("p-list", "probabilities to evaluate (defaults to --p)", as_floats),
            Option("verify", "Monte Carlo samples for estimator verification", as_int),
            Option("witness", "look for a non-monotonicity witness", as_bool, False, flag=True),
            Option("lower-bound", "compare with p^psi (1-p)^phi", as_bool, False, flag=True),
        ),
        output_name="exact.json",
    ),

    Command(
        name="oracle",
        description="Combinatorial quantities by animal enumeration",
        effect=_oracle,
        precondition=_oracle_pre,
        options=(
            Option("quantity", "what to compute", choice(*ORACLE_QUANTITIES), "phi", positional=True),
            Option("max-volume", "largest animal volume scanned", as_int),
            Option("budget", "node budget of the enumeration", as_int, DEFAULT_BUDGET),
            Option("radius", "L1 radius of the subadditivity points", as_int, 2),
            Option("n-list", "n values for phi-bar", as_ints),
        ),
        output_name="oracle.json",
    ),

    Command(
        name="renewal-check",
        description="Solve h = delta + f*h and check residual, series, tilt and moments",
        effect=_renewal_check,
        precondition=_renewal_pre,
        options=(
            Option("f", "direct kernel: file, record or synthetic name", as_kernel_source),
            Option("h", "full kernel for the mass-gap check", as_kernel_source),
            Option("window", "window length along u1", as_int, 40),
            Option("width", "window half-width across u1", as_int),
            Option("series-k", "terms of the brute-force series", as_int, 200),
            Option("residual-tol", "largest accepted residual", as_float, 1e-12),
        ),
        output_name="renewal.json",
    ),

    Command(
        name="synthetic-oz",
        description="OZ fit of renewal-solve data from a synthetic kernel against the closed-form prefactor",
        effect=_synthetic_oz,
        precondition=_oz_pre,
        options=(
            Option("spec", "model file {kernel, dim, params, direction}", as_model),
            Option("kernel", "kernel source when no model file is given", as_kernel_source),
            Option("n-list", "lengths n of h(n u1)", as_ints, tuple(range(20, 121, 10))),
            Option("correction-order", "number of 1/n correction terms", as_int, 1),
            Option("width", "solve window half-width", as_int),
            Option("phi-rtol", "accepted relative error of Phi", as_float, 0.05),
        ),
        output_name="fit.json",
    ),

    Command(
        name="oz-fit",
        description="tau and OZ fits of a decay series",
        effect=_oz_fit,
        precondition=_oz_fit_pre,
        options=(
            Option("series", "series file", as_series),
            Option("correction-order", "number of 1/n correction terms", as_int, 0),
            Option("sigmas", "significance of the log-term probe", as_float, 3.0),
        ),
        output_name="fit.json",
    ),

    Command(
        name="surface",
        description="Convexity, curvature and polar checks of a tau-surface",
        effect=_surface,
        precondition=_surface_pre,
        options=(
            Option("tau", "tau-surface file", as_surface),
            Option("f", "trace the surface of this direct kernel instead", as_kernel_source),
            Option("check", "comma list of checks", choices(*SURFACE_CHECKS), ("convexity", "curvature")),
            Option("direction", "centre direction of traced patches and curvature", as_floats),
            Option("rays", "tilt rays traced for the curvature patch", as_int, 80),
            Option("convexity-rays", "tilt rays traced for the convexity check", as_int, 12),
            Option("half-angle", "angular radius of traced patches (radians)", as_float, 0.5),
            Option("sigmas", "convexity tolerance in standard errors", as_float, 3.0),
            Option("dual", "x_hat for the dual-direction check", as_floats),
        ),
        output_name="surface.json",
    ),

    Command(
        name="surface-tail",
        description="P(external boundary >= (1+delta) phi(x) | finite connection)",
        effect=_surface_tail,
        precondition=_tail_pre,
        options=(
            Option("delta", "comma list of delta values", as_floats, (0.1, 0.25, 0.5)),
            Option("phi", "phi(x) (computed when omitted)", as_int),
        ),
        output_name="surface_tail.json",
    ),
]

COMMAND_DICT = {c.name: c for c in COMMANDS}
