"""Model Radon-like operators and their Monte Carlo laboratory.

Three families of averaging operators T f(x) = int f(gamma(x, t)) dt are
covered: translates of the moment curve, quadratic submanifolds with
coefficient matrix lambda, and the non-translation-invariant quadratic
family of maximal codimension. The surface measure on every fiber equals
dt, so no density correction enters :func:`apply_T`.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from radonbl.core import config
from radonbl.core.bl_core import STATUS_ZERO_WEIGHT, EqualExpDatum, bl_weight_root
from radonbl.core.errors import EmptySpaceError, ShapeError
from radonbl.core.ift_newton import IncidenceModel
from radonbl.core.invariant_poly import eval_phi, quadratic_model_spec
from radonbl.core.linops import as_matrix, det
from radonbl.core.nonconc import QuadraticModel, minor_condition, separated_points
from radonbl.utils.helpers import spawn_rng

logger = logging.getLogger(__name__)

Indicator = Callable[[np.ndarray], np.ndarray]

DEFAULT_STRATA = 16
PROBE_TRIALS = 64
PROBE_SOLVES = 4


class ModelKind(str, Enum):
    MOMENT_CURVE = "moment_curve"
    QUADRATIC = "quadratic"
    MAX_CODIM = "max_codim"


@dataclass(frozen=True)
class BoxSet:
    """Closed axis-aligned box [lo, hi]; infinite bounds are allowed."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).ravel()
        hi = np.asarray(self.hi, dtype=float).ravel()
        if lo.shape != hi.shape:
            raise ShapeError(f"box bounds disagree: {lo.shape} vs {hi.shape}")
        if np.any(lo > hi):
            raise ShapeError("box has lo > hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def symmetric(cls, half_widths: Sequence[float], center: Optional[Sequence[float]] = None):
        half = np.asarray(half_widths, dtype=float)
        mid = np.zeros_like(half) if center is None else np.asarray(center, dtype=float)
        return cls(mid - half, mid + half)

    @classmethod
    def full(cls, dim: int) -> "BoxSet":
        return cls(np.full(dim, -np.inf), np.full(dim, np.inf))

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def measure(self) -> float:
        return float(np.prod(self.hi - self.lo))

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return np.all((pts >= self.lo) & (pts <= self.hi), axis=-1)

    __call__ = contains

    def shifted(self, offset: Sequence[float]) -> "BoxSet":
        v = np.asarray(offset, dtype=float)
        return BoxSet(self.lo + v, self.hi + v)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return self.lo + (self.hi - self.lo) * rng.random((count, self.dim))

    def to_dict(self) -> dict:
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist()}


@dataclass(frozen=True)
class ModelOperator:
    """One of the three model operators with its parameter box and domain box."""

    kind: ModelKind
    n: int
    k: int
    model: Optional[QuadraticModel] = None
    t_box: Optional[BoxSet] = None
    domain_box: Optional[BoxSet] = None

    def __post_init__(self):
        kind = ModelKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind == ModelKind.MOMENT_CURVE and (self.k != 1 or self.n < 2):
            raise ShapeError(f"moment curve needs k = 1 and n >= 2, got n={self.n}, k={self.k}")
        if kind == ModelKind.QUADRATIC:
            if self.model is None:
                raise ShapeError("quadratic operator needs a QuadraticModel")
            if (self.model.n, self.model.k) != (self.n, self.k):
                raise ShapeError("quadratic operator dimensions disagree with its model")
        if kind == ModelKind.MAX_CODIM and self.n != self.k + self.k * self.k:
            raise ShapeError(f"max codim operator needs n = k + k^2, got n={self.n}, k={self.k}")
        if self.t_box is None:
            object.__setattr__(self, "t_box", BoxSet.symmetric(np.ones(self.k)))
        if self.domain_box is None:
            object.__setattr__(self, "domain_box", BoxSet.full(self.n))
        if self.t_box.dim != self.k or self.domain_box.dim != self.n:
            raise ShapeError("t_box / domain_box dimensions disagree with the operator")

    @classmethod
    def moment_curve(cls, n: int, t_box: Optional[BoxSet] = None) -> "ModelOperator":
        return cls(ModelKind.MOMENT_CURVE, n, 1, t_box=t_box)

    @classmethod
    def quadratic(cls, model: QuadraticModel, t_box: Optional[BoxSet] = None) -> "ModelOperator":
        return cls(ModelKind.QUADRATIC, model.n, model.k, model=model, t_box=t_box)

    @classmethod
    def max_codim(cls, k: int, t_box: Optional[BoxSet] = None) -> "ModelOperator":
        return cls(ModelKind.MAX_CODIM, k + k * k, k, t_box=t_box)

    @property
    def codim(self) -> int:
        return self.n - self.k

    def graph_points(self, x: np.ndarray, t: np.ndarray) -> np.ndarray:
        """gamma(x, t) with broadcasting over leading axes of x (..., n) and t (..., k)."""
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        shape = np.broadcast_shapes(x.shape[:-1], t.shape[:-1])
        x = np.broadcast_to(x, shape + (self.n,))
        t = np.broadcast_to(t, shape + (self.k,))
        out = np.empty(shape + (self.n,))
        k = self.k
        if self.kind == ModelKind.MOMENT_CURVE:
            out[...] = x + t[..., :1] ** np.arange(1, self.n + 1)
        elif self.kind == ModelKind.QUADRATIC:
            out[..., :k] = x[..., :k] + t
            out[..., k:] = x[..., k:] + 0.5 * (t * t) @ self.model.lam.T
        else:
            xp = x[..., :k]
            twist = xp[..., :, None] * (t + xp)[..., None, :]
            out[..., :k] = xp + t
            out[..., k:] = x[..., k:] + twist.reshape(shape + (k * k,))
        return out

    def incidence(self) -> IncidenceModel:
        if self.kind == ModelKind.MOMENT_CURVE:
            return moment_curve_incidence(self.n)
        if self.kind == ModelKind.QUADRATIC:
            return quadratic_incidence(self.model)
        return max_codim_incidence(self.k)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "n": self.n,
            "k": self.k,
            "lambda": self.model.lam.tolist() if self.model is not None else None,
            "t_box": self.t_box.to_dict(),
        }


@dataclass
class MCEstimate:
    value: float
    stderr: float
    samples: int

    def to_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "samples": self.samples}


def apply_T(  # pylint: disable=invalid-name
    op: ModelOperator, indicator: Indicator, x: Sequence[float], samples_t: int, seed: int
) -> MCEstimate:
    """Monte Carlo estimate of T chi_E(x) = int over t_box of chi_E(gamma(x, t)) dt.

    With no hits the standard error is reported as |t_box| / samples_t, the
    resolution of the estimator.
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.shape != (op.n,):
        raise ShapeError(f"x must lie in R^{op.n}, got shape {x.shape}")
    if not op.domain_box.contains(x):
        raise ValueError("x lies outside the operator's domain box")
    if samples_t < 2:
        raise ValueError(f"need at least 2 samples, got {samples_t}")
    volume = op.t_box.measure
    rng = spawn_rng(seed, 0)
    hits = np.asarray(indicator(op.graph_points(x, op.t_box.sample(rng, samples_t))), dtype=bool)
    frac = float(np.mean(hits))
    if not hits.any():
        return MCEstimate(value=0.0, stderr=volume / samples_t, samples=samples_t)
    stderr = volume * math.sqrt(frac * (1 - frac) / samples_t)
    return MCEstimate(value=volume * frac, stderr=stderr, samples=samples_t)


# --- exponents ------------------------------------------------------------------------------


def restricted_type_exponents(n: int, k: int, m: int, s) -> tuple[Fraction, Fraction]:
    """(p, q) = ((m+s)/m, n(m+s)/((n-k)m)) of the restricted strong type inequality."""
    if not 0 < k < n or m < 1:
        raise ValueError(f"invalid exponent data n={n}, k={k}, m={m}")
    s = Fraction(s)
    return (m + s) / m, n * (m + s) / ((n - k) * m)


def model_exponents(op: ModelOperator) -> tuple[Fraction, Fraction]:
    if op.kind == ModelKind.QUADRATIC:
        return restricted_type_exponents(op.n, op.k, op.n, op.n - op.k)
    if op.kind == ModelKind.MOMENT_CURVE:
        return restricted_type_exponents(op.n, 1, op.n, op.n * (op.n - 1) // 2)
    return restricted_type_exponents(op.n, op.k, op.k + 1, op.k)


# --- Knapp sweep ----------------------------------------------------------------------------


@dataclass(frozen=True)
class KnappExperiment:
    """A dyadic sweep of Knapp boxes for one operator at one exponent pair."""

    operator: ModelOperator
    exponents: tuple[float, float]
    deltas: tuple[float, ...]
    samples_x: int
    samples_t: int
    seed: int = 0
    power_shift: float = 0.0
    strata: int = DEFAULT_STRATA

    def __post_init__(self):
        deltas = tuple(float(d) for d in self.deltas)
        object.__setattr__(self, "deltas", deltas)
        object.__setattr__(self, "exponents", tuple(float(e) for e in self.exponents))
        if not deltas:
            raise ValueError("need at least one delta")
        if any(not 0 < d < 1 for d in deltas):
            raise ValueError("deltas must lie in (0, 1)")
        if any(b >= a for a, b in zip(deltas, deltas[1:])):
            raise ValueError("deltas must be strictly decreasing")
        if min(self.samples_x, self.samples_t) < config.MIN_SAMPLES:
            raise ValueError(f"sample counts must be at least {config.MIN_SAMPLES}")
        if min(self.exponents) <= 0:
            raise ValueError(f"exponents must be positive, got {self.exponents}")
        if not 1 <= self.strata <= self.samples_x:
            raise ValueError(f"strata must lie in [1, samples_x], got {self.strata}")

    @classmethod
    def dyadic(
        cls,
        operator: ModelOperator,
        count: int,
        samples_x: int,
        samples_t: int,
        seed: int = 0,
        exponents: Optional[tuple[float, float]] = None,
        power_shift: float = 0.0,
    ) -> "KnappExperiment":
        """deltas 2^-1, ..., 2^-count; exponents default to the operator's own pair."""
        if exponents is None:
            exponents = tuple(float(e) for e in model_exponents(operator))
        return cls(
            operator=operator,
            exponents=exponents,
            deltas=tuple(2.0 ** -(i + 1) for i in range(count)),
            samples_x=samples_x,
            samples_t=samples_t,
            seed=seed,
            power_shift=power_shift,
        )

    @property
    def power(self) -> float:
        return 1.0 / self.exponents[0] + self.power_shift


@dataclass
class KnappRecord:
    delta: float
    norm_estimate: float
    stderr: float
    set_measure: float
    ratio: float
    ratio_stderr: float

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "norm_estimate": self.norm_estimate,
            "stderr": self.stderr,
            "set_measure": self.set_measure,
            "ratio": self.ratio,
            "ratio_stderr": self.ratio_stderr,
        }


@dataclass
class RadonExperimentResult:
    records: list[KnappRecord]
    exponents: tuple[float, float]
    power: float
    kind: str = ""

    CSV_COLUMNS = ("delta", "norm_estimate", "stderr", "set_measure", "ratio")

    @property
    def ratios(self) -> list[float]:
        return [r.ratio for r in self.records]

    def ratio_band(self) -> float:
        """max ratio / min ratio across the sweep."""
        ratios = self.ratios
        return max(ratios) / min(ratios) if min(ratios) > 0 else math.inf

    def trend(self) -> float:
        """Last ratio over first ratio."""
        return self.ratios[-1] / self.ratios[0] if self.ratios[0] > 0 else math.inf

    def is_increasing(self) -> bool:
        """Every ratio strictly exceeds the one before it."""
        ratios = self.ratios
        return all(b > a for a, b in zip(ratios, ratios[1:]))

    def csv_rows(self) -> list[list[float]]:
        return [[getattr(r, col) for col in self.CSV_COLUMNS] for r in self.records]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "exponents": list(self.exponents),
            "power": self.power,
            "records": [r.to_dict() for r in self.records],
        }


def knapp_set(op: ModelOperator, delta: float) -> BoxSet:
    """Symmetric Knapp box adapted to the curvature of the operator's fibers."""
    k = op.k
    if op.kind == ModelKind.MOMENT_CURVE:
        return BoxSet.symmetric([delta**j for j in range(1, op.n + 1)])
    if op.kind == ModelKind.QUADRATIC:
        top = float(np.max(np.abs(op.model.lam)))
        thickness = 0.5 * k * (top if top > 0 else 1.0)
        return BoxSet.symmetric([delta] * k + [thickness * delta**2] * op.codim)
    return BoxSet.symmetric([delta] * k + [delta**2] * (k * k))


def _interval_products(alo, ahi, blo, bhi) -> tuple[np.ndarray, np.ndarray]:
    corners = np.stack(np.broadcast_arrays(alo * blo, alo * bhi, ahi * blo, ahi * bhi))
    return corners.min(axis=0), corners.max(axis=0)


def knapp_parameter_window(
    op: ModelOperator, target: BoxSet, lead: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Parameters t in t_box with x' + t in the leading sides of ``target``.

    Every model kind moves the first k coordinates by t alone, so for each row
    x' of ``lead`` this box holds all t that can put gamma(x, t) in the target.
    """
    k = op.k
    lead = np.atleast_2d(np.asarray(lead, dtype=float))
    lo = np.maximum(op.t_box.lo, target.lo[:k] - lead)
    hi = np.minimum(op.t_box.hi, target.hi[:k] - lead)
    return lo, np.maximum(hi, lo)


def knapp_fiber_box(
    op: ModelOperator, target: BoxSet, lead: np.ndarray, t_lo: np.ndarray, t_hi: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Box of trailing coordinates x'' with gamma(x, t) in ``target`` for some t in [t_lo, t_hi].

    Rows of ``lead`` are the leading coordinates x'; the bounds are exact ranges
    of the trailing part of the graph over the parameter box.
    """
    k = op.k
    lead = np.atleast_2d(np.asarray(lead, dtype=float))
    if op.kind == ModelKind.MOMENT_CURVE:
        powers = np.arange(2, op.n + 1)
        a, b = t_lo[:, :1] ** powers, t_hi[:, :1] ** powers
        straddles = (t_lo[:, :1] < 0) & (t_hi[:, :1] > 0)
        h_lo = np.where(straddles, np.minimum(np.minimum(a, b), 0.0), np.minimum(a, b))
        h_hi = np.where(straddles, np.maximum(np.maximum(a, b), 0.0), np.maximum(a, b))
    elif op.kind == ModelKind.QUADRATIC:
        lam = op.model.lam
        sq_hi = np.maximum(t_lo**2, t_hi**2)
        sq_lo = np.where((t_lo <= 0) & (t_hi >= 0), 0.0, np.minimum(t_lo**2, t_hi**2))
        pos, neg = np.maximum(lam, 0.0), np.minimum(lam, 0.0)
        h_lo = 0.5 * (sq_lo @ pos.T + sq_hi @ neg.T)
        h_hi = 0.5 * (sq_hi @ pos.T + sq_lo @ neg.T)
    else:
        # trailing entry (i, l) moves by x'_i t_l + x'_i x'_l
        ends = np.stack([lead[:, :, None] * t_lo[:, None, :], lead[:, :, None] * t_hi[:, None, :]])
        cross = lead[:, :, None] * lead[:, None, :]
        h_lo = (ends.min(axis=0) + cross).reshape(-1, k * k)
        h_hi = (ends.max(axis=0) + cross).reshape(-1, k * k)
    return target.lo[k:] - h_hi, target.hi[k:] - h_lo


def knapp_x_box(op: ModelOperator, delta: float) -> BoxSet:
    """Bounding box of the support of T chi_E for the Knapp set E at scale ``delta``.

    Derived from t_box and E analytically, so T chi_E vanishes outside it.
    """
    target = knapp_set(op, delta)
    k = op.k
    lead_lo = target.lo[:k] - op.t_box.hi
    lead_hi = target.hi[:k] - op.t_box.lo
    if op.kind == ModelKind.MAX_CODIM:
        t_lo, t_hi = op.t_box.lo[None, :], op.t_box.hi[None, :]
        move_lo, move_hi = _interval_products(lead_lo[:, None], lead_hi[:, None], t_lo, t_hi)
        cross_lo, cross_hi = _interval_products(
            lead_lo[:, None], lead_hi[:, None], lead_lo[None, :], lead_hi[None, :]
        )
        tail_lo = target.lo[k:] - (move_hi + cross_hi).ravel()
        tail_hi = target.hi[k:] - (move_lo + cross_lo).ravel()
    else:
        tail_lo, tail_hi = knapp_fiber_box(
            op, target, np.zeros((1, k)), op.t_box.lo[None, :], op.t_box.hi[None, :]
        )
    return BoxSet(
        np.concatenate([lead_lo, tail_lo.ravel()]), np.concatenate([lead_hi, tail_hi.ravel()])
    )


def _graph_coordinates(
    w: np.ndarray, lo: np.ndarray, hi: np.ndarray, scale: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Inverse CDF of the density proportional to 1 / (scale + |u - c|) on [lo, hi].

    c is the point of [lo, hi] nearest 0, where the graph meets E. Returns the
    samples and their density.
    """
    c = np.clip(0.0, lo, hi)
    total = np.log1p((c - lo) / scale) + np.log1p((hi - c) / scale)
    split = np.log1p((c - lo) / scale) / total
    below = w < split
    dist = scale * np.expm1(np.abs(w - split) * total)
    u = np.where(below, c - dist, c + dist)
    return u, 1.0 / (total * (scale + dist))


def _hit_fraction(
    op: ModelOperator,
    target: BoxSet,
    xs: np.ndarray,
    t_lo: np.ndarray,
    t_hi: np.ndarray,
    rng: np.random.Generator,
    samples_t: int,
) -> np.ndarray:
    chunk = max(1, (config.MC_CHUNK * 256) // samples_t)
    out = np.empty(xs.shape[0])
    for start in range(0, xs.shape[0], chunk):
        stop = start + chunk
        lo, hi = t_lo[start:stop, None, :], t_hi[start:stop, None, :]
        ts = lo + (hi - lo) * rng.random((lo.shape[0], samples_t, op.k))
        pts = op.graph_points(xs[start:stop, None, :], ts)
        out[start:stop] = target.contains(pts).mean(axis=1)
    return out


def _knapp_record(exp: KnappExperiment, index: int, delta: float) -> KnappRecord:
    op = exp.operator
    k = op.k
    q = exp.exponents[1]
    target = knapp_set(op, delta)
    support = knapp_x_box(op, delta)
    scale = 0.5 * (target.hi[:k] - target.lo[:k])
    rng = spawn_rng(exp.seed, index)

    base, extra = divmod(exp.samples_x, exp.strata)
    integral = 0.0
    variance = 0.0
    for s in range(exp.strata):
        count = base + (1 if s < extra else 0)
        w = rng.random((count, k))
        w[:, 0] = (s + w[:, 0]) / exp.strata
        lead, density = _graph_coordinates(w, support.lo[:k], support.hi[:k], scale)
        t_lo, t_hi = knapp_parameter_window(op, target, lead)
        tail_lo, tail_hi = knapp_fiber_box(op, target, lead, t_lo, t_hi)
        tail = tail_lo + (tail_hi - tail_lo) * rng.random(tail_lo.shape)
        xs = np.hstack([lead, tail])
        window = np.prod(t_hi - t_lo, axis=1)
        t_chi = window * _hit_fraction(op, target, xs, t_lo, t_hi, rng, exp.samples_t)
        weight = np.prod(tail_hi - tail_lo, axis=1) / np.prod(density, axis=1)
        values = weight * t_chi**q
        integral += float(np.mean(values)) / exp.strata
        if count > 1:
            variance += float(np.var(values, ddof=1)) / (count * exp.strata**2)

    norm = integral ** (1.0 / q)
    stderr = norm / (q * integral) * math.sqrt(variance) if integral > 0 else 0.0
    reference = target.measure**exp.power
    return KnappRecord(
        delta=delta,
        norm_estimate=norm,
        stderr=stderr,
        set_measure=target.measure,
        ratio=norm / reference,
        ratio_stderr=stderr / reference,
    )


def knapp_sweep(exp: KnappExperiment) -> RadonExperimentResult:
    """Estimate ||T chi_E||_q / |E|^power over the experiment's Knapp boxes.

    The x-integral runs over the whole support of T chi_E, the tube around the
    graph over t_box. Leading coordinates are drawn with density concentrated
    where the graph passes through E and stratified along the first axis;
    trailing coordinates and t are drawn from the exact boxes that can reach E.
    Each delta draws from its own counter-addressed stream, so results do not
    depend on the worker count.
    """
    # pylint: disable=logging-fstring-interpolation
    p_expected, q_expected = (float(e) for e in model_exponents(exp.operator))
    p, q = exp.exponents
    matches_p = math.isclose(p, p_expected, rel_tol=1e-9)
    if not (matches_p and math.isclose(q, q_expected, rel_tol=1e-9)):
        logger.warning(
            f"[Knapp] exponents ({p:g}, {q:g}) differ from the {exp.operator.kind.value} "
            f"pair ({p_expected:g}, {q_expected:g}); proceeding"
        )
    with ThreadPoolExecutor(max_workers=config.get_max_workers()) as pool:
        records = list(pool.map(lambda item: _knapp_record(exp, *item), enumerate(exp.deltas)))
    for rec in records:
        logger.info(
            f"[Knapp] delta={rec.delta:.4g} norm={rec.norm_estimate:.6g}+-{rec.stderr:.2g} "
            f"ratio={rec.ratio:.6g}"
        )
    return RadonExperimentResult(
        records=records, exponents=(p, q), power=exp.power, kind=exp.operator.kind.value
    )


# --- incidence relations --------------------------------------------------------------------


def left_derivative_matrix(model: QuadraticModel, x: Sequence[float], y: Sequence[float]):
    """[I_c | B(x' - y')] with B(w)_ji = w_i lambda_ji.

    Columns follow the reordered convention (x'', x'): the c coordinates of
    the quadratic part come first, then the k linear ones.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != (model.n,) or y.shape != (model.n,):
        raise ShapeError(f"x and y must lie in R^{model.n}")
    return np.hstack([np.eye(model.c), model.b_matrix(x[: model.k] - y[: model.k])])


def quadratic_incidence(model: QuadraticModel) -> IncidenceModel:
    """rho_j(x, y) = -y''_j + x''_j + 1/2 sum_i lambda_ji (y'_i - x'_i)^2, in natural order."""
    k, lam = model.k, model.lam

    def rho(x, y):
        w = y[:k] - x[:k]
        return -y[k:] + x[k:] + 0.5 * lam @ (w * w)

    def d_x(x, y):
        return np.hstack([lam * (x[:k] - y[:k])[None, :], np.eye(model.c)])

    def d_y(x, y):
        return np.hstack([lam * (y[:k] - x[:k])[None, :], -np.eye(model.c)])

    return IncidenceModel(rho=rho, d_x=d_x, d_y=d_y, n=model.n, codim=model.c, name="quadratic")


def moment_curve_incidence(n: int) -> IncidenceModel:
    """rho_j(x, y) = -y_j + x_j + (y_1 - x_1)^j for j = 2, ..., n."""
    powers = np.arange(2, n + 1)

    def rho(x, y):
        return -y[1:] + x[1:] + (y[0] - x[0]) ** powers

    def slope(x, y):
        return powers * (y[0] - x[0]) ** (powers - 1)

    def d_x(x, y):
        return np.hstack([-slope(x, y)[:, None], np.eye(n - 1)])

    def d_y(x, y):
        return np.hstack([slope(x, y)[:, None], -np.eye(n - 1)])

    return IncidenceModel(rho=rho, d_x=d_x, d_y=d_y, n=n, codim=n - 1, degree=n, name="moment")


def max_codim_incidence(k: int) -> IncidenceModel:
    """rho_ij(x, y) = -y''_ij + x''_ij + x'_i y'_j."""
    n = k + k * k

    def rho(x, y):
        return -y[k:] + x[k:] + np.outer(x[:k], y[:k]).ravel()

    def d_x(x, y):
        left = np.zeros((k * k, k))
        for i in range(k):
            left[i * k : (i + 1) * k, i] = y[:k]
        return np.hstack([left, np.eye(k * k)])

    def d_y(x, y):
        left = np.zeros((k * k, k))
        for i in range(k):
            for j in range(k):
                left[i * k + j, j] = x[i]
        return np.hstack([left, -np.eye(k * k)])

    return IncidenceModel(rho=rho, d_x=d_x, d_y=d_y, n=n, codim=k * k, name="max_codim")


def model_zero_points(
    op: ModelOperator, rng: np.random.Generator, count: int, scale: float = 1.0
) -> list[tuple[np.ndarray, np.ndarray]]:
    """``count`` pairs (x, y) on the incidence relation: y = gamma(x, t), t drawn from t_box."""
    xs = scale * rng.standard_normal((count, op.n))
    if math.isfinite(op.t_box.measure):
        ts = op.t_box.sample(rng, count)
    else:
        ts = rng.standard_normal((count, op.k))
    ys = op.graph_points(xs, ts)
    return list(zip(xs, ys))


def measure_identity_check(b) -> float:
    """|det(I + B^T B) - det(I + B B^T)| relative to max(1, det(I + B^T B))."""
    b = as_matrix(b, "B")
    left = det(np.eye(b.shape[1]) + b.T @ b)
    right = det(np.eye(b.shape[0]) + b @ b.T)
    return abs(left - right) / max(1.0, abs(left))


# --- nonconcentration hypothesis ----------------------------------------------------------------


@dataclass(frozen=True)
class FiberSample:
    """Weighted points y on the fiber over x; weights approximate sigma = dt."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        points = as_matrix(self.points, "fiber points")
        weights = np.asarray(self.weights, dtype=float).ravel()
        if points.shape[0] != weights.size:
            raise ShapeError("fiber points and weights disagree")
        if weights.size == 0:
            raise EmptySpaceError("fiber sample is empty")
        if np.any(weights < 0):
            raise ShapeError("fiber weights must be nonnegative")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_parameters(
        cls, op: ModelOperator, x: Sequence[float], ts: np.ndarray, weights: Sequence[float]
    ) -> "FiberSample":
        ts = np.asarray(ts, dtype=float).reshape(-1, op.k)
        return cls(op.graph_points(np.asarray(x, dtype=float), ts), np.asarray(weights))

    @property
    def mass(self) -> float:
        return math.fsum(self.weights)


@dataclass
class ProbeResult:
    sup_estimate: float
    bound: float
    ratio: float
    minor_condition_holds: bool
    flagged: bool
    best_tuple: tuple[int, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "sup_estimate": self.sup_estimate,
            "bound": self.bound,
            "ratio": self.ratio,
            "minor_condition_holds": self.minor_condition_holds,
            "flagged": self.flagged,
            "best_tuple": list(self.best_tuple),
        }


def _farthest_tuple(params: np.ndarray, size: int) -> tuple[int, ...]:
    chosen = [int(np.argmax(np.abs(params).sum(axis=1)))]
    while len(chosen) < size:
        dist = np.min(
            np.abs(params[:, None, :] - params[chosen][None, :, :]).max(axis=2), axis=1
        )
        chosen.append(int(np.argmax(dist)))
    return tuple(chosen)


def _separated_tuple(params: np.ndarray, size: int) -> Optional[tuple[int, ...]]:
    lo, hi = float(params[:, 0].min()), float(params[:, 0].max())
    if hi <= lo:
        return None
    picks = separated_points([(lo, hi)], size)
    return tuple(int(np.argmin(np.abs(params[:, 0] - t))) for t in picks)


def _tuple_weight(maps: list[np.ndarray], n: int, k: int) -> float:
    if np.linalg.matrix_rank(np.vstack(maps)) < n:
        return 0.0
    result = bl_weight_root(EqualExpDatum(n, k, tuple(maps)))
    return 0.0 if result.status == STATUS_ZERO_WEIGHT else result.value


def hypothesis_probe(
    model: QuadraticModel,
    x: Sequence[float],
    fiber: FiberSample,
    s: Optional[float] = None,
    seed: int = 0,
    trials: int = PROBE_TRIALS,
    solves: int = PROBE_SOLVES,
    tolerance: float = 1e-6,
) -> ProbeResult:
    """Compare sup over n-tuples of W^(1/p)(D_x rho(x, y_j)) with sigma(F)^s, s = n - k by default.

    Candidate tuples come from random draws ranked by |Phi| of the quadratic
    layout, a farthest-point tuple and, for k = 1, separated points. Only the
    best few candidates get a full BL solve, so the result is a lower
    estimate of the supremum; a violation is flagged, never raised.
    """
    # pylint: disable=logging-fstring-interpolation
    x = np.asarray(x, dtype=float).ravel()
    n, k = model.n, model.k
    s = float(n - k) if s is None else float(s)
    maps = [left_derivative_matrix(model, x, y) for y in fiber.points]
    params = fiber.points[:, :k] - x[:k]
    npts = len(maps)

    candidates = {_farthest_tuple(params, n)}
    if k == 1:
        sep = _separated_tuple(params, n)
        if sep is not None:
            candidates.add(sep)
    rng = spawn_rng(seed, 0)
    for _ in range(trials):
        candidates.add(tuple(int(i) for i in rng.integers(0, npts, size=n)))

    spec = quadratic_model_spec(model)
    ranked = sorted(
        candidates, key=lambda tup: (-abs(eval_phi(spec, [maps[i] for i in tup])), tup)
    )
    best, best_tuple = 0.0, ranked[0]
    for tup in ranked[:solves]:
        value = _tuple_weight([maps[i] for i in tup], n, k)
        if value > best:
            best, best_tuple = value, tup

    holds = all(abs(m) > 1e-12 for m in minor_condition(model))
    bound = fiber.mass**s
    ratio = best / bound if bound > 0 else math.inf
    flagged = holds and bound > 0 and ratio < tolerance
    if flagged:
        logger.warning(
            f"[Probe] sup estimate {best:.6g} far below sigma(F)^s = {bound:.6g} "
            f"although the minor condition holds"
        )
    return ProbeResult(
        sup_estimate=best,
        bound=bound,
        ratio=ratio,
        minor_condition_holds=holds,
        flagged=flagged,
        best_tuple=best_tuple,
    )
