"""Experiment orchestration - callback-based dispatch of manifests to the numerical modules."""

import json
import logging
import math
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from radonbl.core import datasets
from radonbl.core.bl_core import (
    STATUS_MAX_ITERS,
    BLDatum,
    EqualExpDatum,
    bl_constant_alternating,
    bl_constant_gaussian,
    check_scaling_identity,
)
from radonbl.core.config import BL_MAX_ITERS, BL_TOL, KNAPP_SAMPLES_T, get_artifacts_dir
from radonbl.core.errors import ManifestError, NumericalFailure, RadonBLError
from radonbl.core.ift_newton import (
    fiber_measure_lower_bound,
    newton_solve,
    normalize_defining_function,
    sampled_contraction,
    sampled_transverse_bound,
)
from radonbl.core.invariant_poly import (
    check_homogeneity,
    check_sl_invariance,
    contraction_identity_check,
    evaluate,
    eval_phi,
    moment_curve_pi,
    moment_curve_spec,
    render_zero_pattern,
)
from radonbl.core.log_handler import RunLogHandler
from radonbl.core.manifest import Command, Manifest
from radonbl.core.nonconc import (
    QuadraticModel,
    SampleSpace,
    convprop_construct,
    density_K,
    derivative_identity_check,
    minor_condition,
    mustbebig_slack,
    vandermonde_nonconcentration,
)
from radonbl.core.radon_lab import (
    BoxSet,
    KnappExperiment,
    RadonExperimentResult,
    apply_T,
    knapp_sweep,
    model_exponents,
)
from radonbl.core.regress import regress
from radonbl.database import crud
from radonbl.utils.helpers import (
    format_duration,
    fraction_from_json,
    parse_count,
    parse_float_list,
    parse_intervals,
    parse_matrix,
    spawn_rng,
    write_csv,
    write_json,
)

logger = logging.getLogger(__name__)

# thresholds for the identity checks reported by the CLI
VANDERMONDE_RTOL = 1e-8
INVARIANCE_TOL = 1e-8
CONTRACTION_TOL = 1e-9
DERIVATIVE_TOL = 1e-8
SCALING_RTOL = 1e-4
MUSTBEBIG_FLOOR = 1.0 - 1e-9

NAMED_PROBLEM_DEFAULTS = {
    "parabola-zero": ((1.0, 1.1), 0.5),
    "sine": ((0.2, 0.35), 0.1),
}


class RunStatus(Enum):
    """Lifecycle status of one experiment run."""
    PENDING = "pending"
    RUNNING = "running"
    SUCCEEDED = "succeeded"
    FAILED = "failed"
    ERROR = "error"


@dataclass
class RunOutcome:
    """What the CLI needs after a run: exit status, summary line and written files."""
    exit_code: int
    summary: str
    artifacts: list[Path] = field(default_factory=list)
    run_id: Optional[int] = None


@dataclass
class _Report:
    summary: str
    payload: dict
    columns: Optional[tuple[str, ...]] = None
    rows: Optional[list[list[Any]]] = None
    exit_code: int = 0


# --- parameter coercion ---------------------------------------------------------------------


def _floats(value) -> list[float]:
    if isinstance(value, str):
        return parse_float_list(value)
    return [float(v) for v in np.ravel(np.asarray(value, dtype=float))]


def _float(value, default: Optional[float] = None) -> float:
    if value is None:
        if default is None:
            raise ManifestError("missing numeric parameter")
        return default
    if isinstance(value, str) and value.strip().lower() in ("inf", "infinity"):
        return math.inf
    return float(value)


def _count(value, default: int) -> int:
    return default if value is None else parse_count(value)


def _require(manifest: Manifest, key: str):
    value = manifest.get(key)
    if value is None:
        raise ManifestError(f"{manifest.command.value} {manifest.action} needs '{key}'")
    return value


def _partition(value) -> list[list[int]]:
    if isinstance(value, str):
        groups = [parse_float_list(g) for g in value.split(";") if g.strip()]
    else:
        groups = [np.atleast_1d(np.asarray(g, dtype=float)).tolist() for g in value]
    return [[int(i) for i in g] for g in groups]


def _operator(manifest: Manifest):
    lam = manifest.get("lambda")
    return datasets.build_operator(
        str(_require(manifest, "model")),
        n=manifest.get("n"),
        k=manifest.get("k"),
        lam=None if lam is None else parse_matrix(lam),
    )


def _quadratic(manifest: Manifest) -> QuadraticModel:
    n, k = int(_require(manifest, "n")), int(_require(manifest, "k"))
    lam = manifest.get("lambda")
    lam = np.ones((n - k, k)) if lam is None else parse_matrix(lam).reshape(n - k, k)
    return QuadraticModel(n, k, lam)


def _bl_datum(manifest: Manifest) -> BLDatum:
    name, path = manifest.get("datum"), manifest.get("datum_file")
    if (name is None) == (path is None):
        raise ManifestError("give exactly one of 'datum' and 'datum_file'")
    if name is not None:
        return datasets.named_datum(str(name)).to_bl_datum()
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return BLDatum.from_json(json.load(handle))
    except (OSError, KeyError, json.JSONDecodeError) as e:
        raise ManifestError(f"cannot read datum file {path}: {e}") from e


def _equal_datum(manifest: Manifest) -> EqualExpDatum:
    d = _bl_datum(manifest)
    if len(set(d.dims)) != 1 or len(set(d.exps)) != 1:
        raise ManifestError("scaling check needs equal dimensions and exponents")
    return EqualExpDatum(d.n, d.n - d.dims[0], d.maps)


# --- handlers -------------------------------------------------------------------------------


def _bl_compute(manifest: Manifest) -> _Report:
    d = _bl_datum(manifest)
    method = manifest.get("method", "alternating")
    max_iters = _count(manifest.get("max_iters"), BL_MAX_ITERS)
    tol = _float(manifest.get("tol"), BL_TOL)
    if method == "alternating":
        result = bl_constant_alternating(d, max_iters=max_iters, tol=tol)
    elif method == "gaussian":
        result = bl_constant_gaussian(d, max_iters=max_iters, tol=tol)
    else:
        raise ManifestError(f"unknown method {method!r}; use alternating or gaussian")
    summary = (
        f"BL^-1 = {result.value:.10g} ({result.status}, {result.iterations} iterations)"
    )
    exit_code = 2 if result.status == STATUS_MAX_ITERS else 0
    payload = {"datum": d.to_json(), "method": method, "result": result}
    return _Report(summary, payload, exit_code=exit_code)


def _bl_verify_scaling(manifest: Manifest) -> _Report:
    d = _equal_datum(manifest)
    trials = _count(manifest.get("trials"), 5)
    rtol = _float(manifest.get("rtol"), SCALING_RTOL)
    gaps = []
    for trial in range(trials):
        rng = spawn_rng(manifest.seed, trial)
        m_list = [np.eye(d.codim) + 0.5 * rng.standard_normal((d.codim, d.codim)) for _ in d.maps]
        gaps.append(check_scaling_identity(d, m_list))
    worst = max(gaps) if gaps else 0.0
    summary = f"scaling identity: max relative gap {worst:.3e} over {trials} trials"
    return _Report(
        summary,
        {"gaps": gaps, "max_gap": worst, "rtol": rtol},
        exit_code=2 if worst > rtol else 0,
    )


def _poly_eval(manifest: Manifest) -> _Report:
    op = _operator(manifest)
    spec = datasets.model_spec(op)
    maps = datasets.model_maps(op, _floats(_require(manifest, "t")))
    result = evaluate(spec, maps, seed=manifest.seed, budget=_count(manifest.get("budget"), 1000))
    payload = {"spec": spec.to_json(), "result": result}
    summary = (
        f"Phi = {result.value:.10g}, |||Phi||| >= {result.norm_estimate:.6g}, "
        f"weight bound {result.lower_bound:.6g}"
    )
    if manifest.get("pattern"):
        payload["pattern"] = render_zero_pattern(spec)
        summary += "\n" + payload["pattern"]
    return _Report(summary, payload)


def _poly_vandermonde(manifest: Manifest) -> _Report:
    n = int(_require(manifest, "n"))
    ts = _floats(_require(manifest, "t"))
    if len(ts) != n:
        raise ManifestError(f"need {n} parameters, got {len(ts)}")
    value = abs(eval_phi(moment_curve_spec(n), [moment_curve_pi(t, n) for t in ts]))
    expected = math.factorial(n) * math.prod(
        abs(ts[j] - ts[i]) for i in range(n) for j in range(i + 1, n)
    )
    gap = abs(value - expected) / expected if expected > 0 else abs(value)
    return _Report(
        f"|Phi| = {value:.12g}",
        {"n": n, "t": ts, "value": value, "expected": expected, "relative_gap": gap},
        exit_code=2 if gap > VANDERMONDE_RTOL else 0,
    )


def _poly_invariance(manifest: Manifest) -> _Report:
    op = _operator(manifest)
    spec = datasets.model_spec(op)
    maps = datasets.model_maps(op, _floats(_require(manifest, "t")))
    trials = _count(manifest.get("trials"), 50)
    sl_gap = check_sl_invariance(spec, maps, manifest.seed, trials)
    rng = spawn_rng(manifest.seed, trials)
    scalars = list(rng.uniform(0.5, 2.0, spec.m))
    hom_gap = check_homogeneity(spec, maps, scalars)
    worst = max(sl_gap, hom_gap)
    return _Report(
        f"SL violation {sl_gap:.3e}, homogeneity violation {hom_gap:.3e}",
        {"sl_violation": sl_gap, "homogeneity_violation": hom_gap, "trials": trials},
        exit_code=2 if worst > INVARIANCE_TOL else 0,
    )


def _poly_contraction(manifest: Manifest) -> _Report:
    groups_i = _partition(_require(manifest, "partition_i"))
    groups_j = _partition(_require(manifest, "partition_j"))
    width = len(groups_j[0]) if groups_j else 0
    sizes = {lam: len(g) for g in groups_i for lam in g}
    rng = spawn_rng(manifest.seed, 0)
    family = [rng.standard_normal((sizes[lam], width)) for lam in sorted(sizes)]
    gap = contraction_identity_check(family, groups_i, groups_j)
    return _Report(
        f"contraction vs polarization: {gap:.3e}",
        {"partition_i": groups_i, "partition_j": groups_j, "difference": gap},
        exit_code=2 if gap > CONTRACTION_TOL else 0,
    )


def _nonconc_convprop(manifest: Manifest) -> _Report:
    path = manifest.get("space_file")
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as handle:
                space = SampleSpace.from_json(json.load(handle))
        except (OSError, KeyError, json.JSONDecodeError) as e:
            raise ManifestError(f"cannot read sample space {path}: {e}") from e
    else:
        space = datasets.polynomial_space(
            _count(manifest.get("degree"), 3), _count(manifest.get("points"), 50)
        )
    delta = _float(manifest.get("delta"), 0.1)
    cert = convprop_construct(space, delta, seed=manifest.seed)
    checks = _count(manifest.get("checks"), 200)
    rng = spawn_rng(manifest.seed, 1)
    slacks = [mustbebig_slack(space, cert, rng.standard_normal(space.d)) for _ in range(checks)]
    worst = min(slacks) if slacks else math.inf
    valid = cert.check(space)
    ratio = cert.selected_mass(space) / space.total_mass
    summary = (
        f"kept {ratio:.4f} of the mass (need >= {1 - delta:.4f}), j0 = {cert.j0}, "
        f"min slack {worst:.4g}"
    )
    return _Report(
        summary,
        {"certificate": cert, "mass_fraction": ratio, "valid": valid, "min_slack": worst},
        exit_code=0 if valid and worst >= MUSTBEBIG_FLOOR else 2,
    )


def _nonconc_separate(manifest: Manifest) -> _Report:
    intervals = parse_intervals(_require(manifest, "intervals"))
    n = int(_require(manifest, "n"))
    points, product, guarantee = vandermonde_nonconcentration(intervals, n)
    return _Report(
        f"prod |t_i - t_j| = {product:.6g} >= {guarantee:.6g}",
        {"points": points, "product": product, "guarantee": guarantee},
        exit_code=0 if product >= guarantee * (1 - 1e-12) else 2,
    )


def _nonconc_density(manifest: Manifest) -> _Report:
    model = _quadratic(manifest)
    minors = minor_condition(model)
    value = density_K(model)
    holds = all(abs(v) > 0 for v in minors)
    return _Report(
        f"K = {value:.10g}, periodic minors {'nonzero' if holds else 'vanish'}",
        {"model": model.to_json(), "K": value, "minors": minors, "minor_condition": holds},
    )


def _nonconc_derivative(manifest: Manifest) -> _Report:
    model = _quadratic(manifest)
    u = manifest.get("u")
    if u is None:
        rng = spawn_rng(manifest.seed, 0)
        u = np.triu(rng.standard_normal((model.k, model.k)))
    else:
        u = parse_matrix(u)
    base = manifest.get("base")
    base = np.zeros(model.k) if base is None else _floats(base)
    orders = manifest.get("orders")
    orders = None if orders is None else [int(o) for o in _floats(orders)]
    gap = derivative_identity_check(model, u, base, orders)
    return _Report(
        f"derivative identity discrepancy {gap:.3e}",
        {"model": model.to_json(), "u": u, "base": base, "orders": orders, "discrepancy": gap},
        exit_code=2 if gap > DERIVATIVE_TOL else 0,
    )


def _radon_apply(manifest: Manifest) -> _Report:
    op = _operator(manifest)
    target = BoxSet(
        lo=_floats(_require(manifest, "box_lo")), hi=_floats(_require(manifest, "box_hi"))
    )
    x = manifest.get("x")
    x = np.zeros(op.n) if x is None else _floats(x)
    samples = _count(manifest.get("samples"), 100000)
    estimate = apply_T(op, target, x, samples, manifest.seed)
    return _Report(
        f"T chi_E(x) = {estimate.value:.6g} +- {estimate.stderr:.2g}",
        {"operator": op, "target": target, "x": x, "estimate": estimate},
    )


def _radon_knapp(manifest: Manifest) -> _Report:
    op = _operator(manifest)
    p_default, q_default = model_exponents(op)
    p = fraction_from_json(manifest.get("p", p_default))
    q = fraction_from_json(manifest.get("q", q_default))
    deltas = manifest.get("deltas")
    deltas = [2.0 ** -(i + 1) for i in range(6)] if deltas is None else _floats(deltas)
    samples = _count(manifest.get("samples"), 100000)
    exp = KnappExperiment(
        operator=op,
        exponents=(float(p), float(q)),
        deltas=tuple(deltas),
        samples_x=samples,
        samples_t=_count(manifest.get("samples_t"), min(samples, KNAPP_SAMPLES_T)),
        seed=manifest.seed,
        power_shift=_float(manifest.get("power_shift"), 0.0),
        strata=_count(manifest.get("strata"), 16),
    )
    result: RadonExperimentResult = knapp_sweep(exp)
    summary = (
        f"{op.kind.value}: ratio band {result.ratio_band():.4g}, "
        f"end-to-end growth {result.trend():.4g} "
        f"({'increasing' if result.is_increasing() else 'not monotone'}) "
        f"over {len(result.records)} deltas"
    )
    return _Report(
        summary,
        result.to_dict(),
        columns=RadonExperimentResult.CSV_COLUMNS,
        rows=result.csv_rows(),
    )


def _newton_problem(manifest: Manifest, transverse: bool):
    model = str(_require(manifest, "model"))
    c = manifest.get("c")
    big_c = manifest.get("C")
    if model in datasets.PROBLEM_NAMES:
        x0_default, r_default = NAMED_PROBLEM_DEFAULTS[model]
        x0 = _floats(manifest.get("x0", x0_default))
        r = _float(manifest.get("r"), r_default)

        def build(c_value, big_c_value):
            return datasets.named_problem(model, x0, r, c_value, big_c_value)

    else:
        op = _operator(manifest)
        origin = np.zeros(op.n)
        y = manifest.get("y")
        y = op.graph_points(origin, np.full(op.k, 0.5)) if y is None else _floats(y)
        x0 = _floats(manifest.get("x0", [0.05] * op.n))
        r = _float(manifest.get("r"), 0.1)

        def build(c_value, big_c_value):
            return datasets.incidence_problem(op, x0, y, r, c_value, big_c_value)

    baseline = build(0.0, 0.0)
    if c is None:
        c = min(0.99, 1.1 * sampled_contraction(baseline) + 1e-12)
    if big_c is None:
        big_c = 1.1 * sampled_transverse_bound(baseline) + 1e-12 if transverse else 0.0
    return build(_float(c), _float(big_c))


def _ift_solve(manifest: Manifest) -> _Report:
    problem = _newton_problem(manifest, transverse=False)
    root, cert = newton_solve(problem)
    return _Report(
        f"root after {cert.iterations} steps, |phi| = {cert.residuals[-1]:.3e}, "
        f"distance {cert.distance:.4g} <= {cert.distance_bound:.4g}",
        {"x0": problem.x0, "r": problem.r, "c": problem.c, "root": root, "certificate": cert},
    )


def _ift_fiber(manifest: Manifest) -> _Report:
    problem = _newton_problem(manifest, transverse=True)
    result = fiber_measure_lower_bound(problem, grid=_count(manifest.get("grid"), 8))
    return _Report(
        f"fiber measure {result.measure:.6g} >= guaranteed {result.guaranteed_bound:.6g}",
        {"x0": problem.x0, "r": problem.r, "c": problem.c, "C": problem.C, "result": result},
    )


def _ift_normalize(manifest: Manifest) -> _Report:
    op = _operator(manifest)
    origin = np.zeros(op.n)
    x = manifest.get("x")
    x = origin if x is None else _floats(x)
    y = manifest.get("y")
    y = op.graph_points(origin, np.full(op.k, 0.5)) if y is None else _floats(y)
    result = normalize_defining_function(op.incidence(), x, y)
    if result.gram_residual is None:
        summary = f"|rho~| = {np.max(np.abs(result.value)):.6g} (off the zero set)"
    else:
        summary = (
            f"gram residual {result.gram_residual:.3e}, "
            f"det ratio residual {result.det_ratio_residual:.3e}"
        )
    return _Report(summary, {"x": x, "y": y, "normalized": result})


def _regress_compare(manifest: Manifest) -> _Report:
    report = regress(
        _require(manifest, "baseline"),
        _require(manifest, "current"),
        _float(manifest.get("rtol"), 1e-9),
    )
    if report.differences:
        summary = f"{len(report.differences)} differences, first: {report.differences[0]}"
    else:
        summary = f"no differences in {report.compared} values"
    return _Report(summary, report.to_dict(), exit_code=report.exit_code)


HANDLERS: dict[tuple[Command, str], Callable[[Manifest], _Report]] = {
    (Command.BL, "compute"): _bl_compute,
    (Command.BL, "verify-scaling"): _bl_verify_scaling,
    (Command.POLY, "eval"): _poly_eval,
    (Command.POLY, "vandermonde"): _poly_vandermonde,
    (Command.POLY, "invariance"): _poly_invariance,
    (Command.POLY, "contraction"): _poly_contraction,
    (Command.NONCONC, "convprop"): _nonconc_convprop,
    (Command.NONCONC, "separate"): _nonconc_separate,
    (Command.NONCONC, "density-k"): _nonconc_density,
    (Command.NONCONC, "derivative-id"): _nonconc_derivative,
    (Command.RADON, "apply"): _radon_apply,
    (Command.RADON, "knapp"): _radon_knapp,
    (Command.IFT, "solve"): _ift_solve,
    (Command.IFT, "fiber"): _ift_fiber,
    (Command.IFT, "normalize"): _ift_normalize,
    (Command.REGRESS, "compare"): _regress_compare,
}


class ExperimentRunner:
    """
    Runs manifests and records them in the ledger.

    Uses callback functions so a front end can follow status changes.
    """

    def __init__(self):
        self._statuses: dict[int, RunStatus] = {}
        self._lock = threading.Lock()
        self._local_ids = 0

        # Callbacks (set by the front end)
        self.on_status_changed: Optional[Callable[[int, RunStatus], None]] = None
        self.on_summary: Optional[Callable[[int, str], None]] = None

    def get_status(self, run_id: int) -> RunStatus:
        with self._lock:
            return self._statuses.get(run_id, RunStatus.PENDING)

    def _emit_status(self, run_id: int, status: RunStatus):
        with self._lock:
            self._statuses[run_id] = status
        if self.on_status_changed:
            self.on_status_changed(run_id, status)

    def _next_local_id(self) -> int:
        with self._lock:
            self._local_ids -= 1
            return self._local_ids

    @staticmethod
    def default_output(manifest: Manifest) -> Path:
        tabular = (manifest.command, manifest.action) == (Command.RADON, "knapp")
        suffix = ".csv" if tabular else ".json"
        name = f"{manifest.command.value}_{manifest.action}_{manifest.seed}{suffix}"
        return get_artifacts_dir() / name

    def _write(self, manifest: Manifest, report: _Report) -> list[Path]:
        if manifest.command == Command.REGRESS and manifest.output_path is None:
            return []
        path = self.default_output(manifest)
        if manifest.output_path:
            path = Path(manifest.output_path)
        payload = {"manifest": manifest.to_dict(), **report.payload}
        if report.columns is not None and path.suffix.lower() == ".csv":
            return [write_csv(path, report.columns, report.rows or [])]
        return [write_json(path, payload)]

    def run(self, manifest: Manifest, ledger: bool = True) -> RunOutcome:
        """Execute one manifest; never raises for failures inside the handler."""
        # pylint: disable=logging-fstring-interpolation
        handler = HANDLERS[(manifest.command, manifest.action)]
        log_handler: Optional[RunLogHandler] = None
        if ledger:
            record = crud.create_run(
                manifest.command.value, manifest.action, manifest.seed, manifest.parameters
            )
            run_id = record.id
            log_handler = RunLogHandler(run_id)
            log_handler.start_logging(f"{manifest.command.value} {manifest.action}")
            log_handler.attach()
        else:
            run_id = self._next_local_id()

        self._emit_status(run_id, RunStatus.RUNNING)
        logger.info(f"[Runner] {manifest.command.value} {manifest.action} seed={manifest.seed}")
        started = time.monotonic()
        artifacts: list[Path] = []
        try:
            report = handler(manifest)
            artifacts = self._write(manifest, report)
            outcome = RunOutcome(report.exit_code, report.summary, artifacts, run_id)
            status = RunStatus.SUCCEEDED if report.exit_code == 0 else RunStatus.FAILED
        except NumericalFailure as e:
            logger.warning(f"[Runner] numerical failure: {e}")
            outcome = RunOutcome(2, f"numerical failure: {e}", artifacts, run_id)
            status = RunStatus.FAILED
        except (RadonBLError, ValueError, OSError) as e:
            logger.warning(f"[Runner] usage error: {e}")
            outcome = RunOutcome(1, f"error: {e}", artifacts, run_id)
            status = RunStatus.ERROR
        except Exception as e:  # pylint: disable=broad-exception-caught
            logger.exception(f"[Runner] unexpected failure in {manifest.command.value}")
            outcome = RunOutcome(2, f"internal error: {type(e).__name__}: {e}", artifacts, run_id)
            status = RunStatus.ERROR

        logger.info(
            f"[Runner] finished with exit {outcome.exit_code} "
            f"in {format_duration(time.monotonic() - started)}"
        )
        if log_handler is not None:
            log_handler.stop_logging()
            crud.finish_run(
                run_id,
                status.value,
                outcome.exit_code,
                summary=outcome.summary,
                artifact_path=str(artifacts[0]) if artifacts else None,
                log_path=str(log_handler.get_current_log_path()),
            )
        self._emit_status(run_id, status)
        if self.on_summary:
            self.on_summary(run_id, outcome.summary)
        return outcome
