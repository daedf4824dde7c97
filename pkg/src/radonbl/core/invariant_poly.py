"""Block-determinant invariant polynomials.

A :class:`BlockPolySpec` lays out an ns x ns matrix whose blocks are scalar
multiples of the maps pi_j; its determinant Phi is multi-homogeneous in the
maps and invariant under (pi_j) -> (A_j pi_j A^T) with unit determinants.
"""

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.optimize

from radonbl.core.config import get_max_workers
from radonbl.core.errors import BudgetExceededError, PlacementError, ShapeError
from radonbl.core.linops import as_matrix, det, random_sl
from radonbl.utils.helpers import spawn_rng

logger = logging.getLogger(__name__)

MAX_CONTRACTION = 8
NORM_CHUNK = 256
POLISH_ITERS = 4000


@dataclass(frozen=True)
class Placement:
    """Block (block_row, block_col) of the matrix equals coefficient * pi_map."""

    map_index: int
    block_row: int
    block_col: int
    coefficient: float = 1.0


@dataclass(frozen=True)
class BlockPolySpec:
    """Layout of an ns x ns block matrix with row blocks of height n-k, column blocks of width n.

    Validation happens eagerly: each block row references a single map, holds
    at most n-k nonzero placements, every block column holds at most n, and
    every map owns the same number of block rows.
    """

    n: int
    k: int
    m: int
    s: int
    placements: tuple[Placement, ...]

    def __post_init__(self):
        placements = tuple(
            p if isinstance(p, Placement) else Placement(*p)
            for p in self.placements
        )
        object.__setattr__(self, "placements", placements)
        self._validate()

    @property
    def height(self) -> int:
        """Block-row height n_j = n - k."""
        return self.n - self.k

    @property
    def block_rows(self) -> int:
        return self.n * self.s // self.height

    @property
    def size(self) -> int:
        return self.n * self.s

    def _validate(self):
        if not 0 <= self.k < self.n:
            raise PlacementError(f"need 0 <= k < n, got k={self.k}, n={self.n}")
        if self.m < 1 or self.s < 1:
            raise PlacementError(f"need m, s >= 1, got m={self.m}, s={self.s}")
        if (self.n * self.s) % self.height:
            raise PlacementError(
                f"ns = {self.n * self.s} is not a multiple of the block height {self.height}"
            )
        seen = set()
        owners: dict[int, int] = {}
        row_counts = [0] * self.block_rows
        col_counts = [0] * self.s
        for p in self.placements:
            if not 0 <= p.map_index < self.m:
                raise PlacementError(f"placement {p} references map outside [0, {self.m})")
            if not 0 <= p.block_row < self.block_rows or not 0 <= p.block_col < self.s:
                raise PlacementError(f"placement {p} outside the {self.block_rows}x{self.s} grid")
            if (p.block_row, p.block_col) in seen:
                raise PlacementError(f"block ({p.block_row}, {p.block_col}) placed twice")
            seen.add((p.block_row, p.block_col))
            owner = owners.setdefault(p.block_row, p.map_index)
            if owner != p.map_index:
                raise PlacementError(
                    f"block row {p.block_row} mixes maps {owner} and {p.map_index}"
                )
            if p.coefficient != 0:
                row_counts[p.block_row] += 1
                col_counts[p.block_col] += 1
        for row, count in enumerate(row_counts):
            if count > self.height:
                raise PlacementError(
                    f"block row {row} has {count} nonzero placements, limit {self.height}"
                )
        for col, count in enumerate(col_counts):
            if count > self.n:
                raise PlacementError(f"block column {col} has {count} nonzero placements")
        per_map = [0] * self.m
        for owner in owners.values():
            per_map[owner] += 1
        if len(owners) != self.block_rows or len(set(per_map)) != 1:
            raise PlacementError(
                f"every map must own the same number of block rows, got {per_map} "
                f"over {self.block_rows} rows"
            )

    @property
    def degrees(self) -> tuple[int, ...]:
        """Homogeneity degree of Phi in each map: owned block rows times block height."""
        rows: dict[int, set] = {}
        for p in self.placements:
            rows.setdefault(p.map_index, set()).add(p.block_row)
        return tuple(len(rows.get(j, ())) * self.height for j in range(self.m))

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "m": self.m,
            "s": self.s,
            "placements": [
                [p.map_index, p.block_row, p.block_col, p.coefficient] for p in self.placements
            ],
        }

    @classmethod
    def from_json(cls, payload: dict) -> "BlockPolySpec":
        return cls(
            n=int(payload["n"]),
            k=int(payload["k"]),
            m=int(payload["m"]),
            s=int(payload["s"]),
            placements=tuple(tuple(p) for p in payload["placements"]),
        )


@dataclass
class PolyEval:
    """Phi at a tuple of maps together with the quantities of the weight lower bound."""

    value: float
    norm_estimate: float
    lower_bound: float

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "norm_estimate": self.norm_estimate,
            "lower_bound": self.lower_bound,
        }


def _check_maps(spec: BlockPolySpec, maps: Sequence[np.ndarray]) -> list[np.ndarray]:
    if len(maps) != spec.m:
        raise ShapeError(f"expected {spec.m} maps, got {len(maps)}")
    out = []
    for j, mp in enumerate(maps):
        mp = as_matrix(mp, f"map {j}")
        if mp.shape != (spec.height, spec.n):
            raise ShapeError(f"map {j} has shape {mp.shape}, expected {(spec.height, spec.n)}")
        out.append(mp)
    return out


def assemble(spec: BlockPolySpec, maps: Sequence[np.ndarray]) -> np.ndarray:
    """The ns x ns block matrix of ``spec`` filled with ``maps``."""
    maps = _check_maps(spec, maps)
    h, w = spec.height, spec.n
    out = np.zeros((spec.size, spec.size))
    for p in spec.placements:
        r0, c0 = p.block_row * h, p.block_col * w
        out[r0 : r0 + h, c0 : c0 + w] = p.coefficient * maps[p.map_index]
    return out


def eval_phi(spec: BlockPolySpec, maps: Sequence[np.ndarray]) -> float:
    """Phi(pi_1, ..., pi_m) = det M(pi_1, ..., pi_m)."""
    return det(assemble(spec, maps))


def _batch_phi(spec: BlockPolySpec, batch: np.ndarray) -> np.ndarray:
    """Phi for a batch of stacked maps, shape (B, m, n-k, n)."""
    h, w = spec.height, spec.n
    mats = np.zeros((batch.shape[0], spec.size, spec.size))
    for p in spec.placements:
        r0, c0 = p.block_row * h, p.block_col * w
        mats[:, r0 : r0 + h, c0 : c0 + w] = p.coefficient * batch[:, p.map_index]
    return np.linalg.det(mats)


def render_zero_pattern(spec: BlockPolySpec) -> str:
    """ASCII zero pattern: one character per block, map index or '.'."""
    grid = [["." for _ in range(spec.s)] for _ in range(spec.block_rows)]
    for p in spec.placements:
        if p.coefficient != 0:
            grid[p.block_row][p.block_col] = str(p.map_index % 10)
    return "\n".join("".join(row) for row in grid)


def _staircase_spec(n: int, k: int, m: int) -> BlockPolySpec:
    """Diagonal blocks for maps 0..m-2 and map m-1 repeated along the bottom row."""
    s = m - 1
    placements = [Placement(j, j, j, 1.0) for j in range(s)]
    placements += [Placement(m - 1, s, col, 1.0) for col in range(s)]
    return BlockPolySpec(n=n, k=k, m=m, s=s, placements=tuple(placements))


def moment_curve_spec(n: int) -> BlockPolySpec:
    """Layout whose determinant is n! times the Vandermonde of the parameters."""
    if n < 2:
        raise ShapeError(f"moment curve needs n >= 2, got {n}")
    return _staircase_spec(n, 1, n)


def moment_curve_pi(t: float, n: int) -> np.ndarray:
    """(n-1) x n matrix with first column (2t, -3t^2, ..., (-1)^n n t^(n-1)) and I to the right."""
    if n < 2:
        raise ShapeError(f"moment curve needs n >= 2, got {n}")
    out = np.zeros((n - 1, n))
    for r in range(n - 1):
        out[r, 0] = (-1) ** r * (r + 2) * t ** (r + 1)
    out[:, 1:] = np.eye(n - 1)
    return out


def max_codim_spec(k: int) -> BlockPolySpec:
    """Layout for the maximal-codimension operator: k+1 maps R^(k+k^2) -> R^(k^2)."""
    if k < 1:
        raise ShapeError(f"need k >= 1, got {k}")
    return _staircase_spec(k + k * k, k, k + 1)


def max_codim_pi(y: Sequence[float], k: int) -> np.ndarray:
    """Left derivative matrix [L(y) | I_(k^2)], row (i, j) of L carrying y_j in column i."""
    y = np.asarray(y, dtype=float).ravel()
    if y.shape != (k,):
        raise ShapeError(f"expected a point of R^{k}, got shape {y.shape}")
    left = np.zeros((k * k, k))
    for i in range(k):
        for j in range(k):
            left[i * k + j, i] = y[j]
    return np.hstack([left, np.eye(k * k)])


def _diagonal_blocks(k: int, c: int) -> list[tuple[int, int]]:
    """(i, j) with the diagonal of a kc x kc matrix crossing c x k block (i, j)."""
    out = []
    for i in range(k):
        for j in range(c):
            rows = range(i * c, (i + 1) * c)
            cols = range(j * k, (j + 1) * k)
            if set(rows) & set(cols):
                out.append((i, j))
    return out


def quadratic_model_spec(model) -> BlockPolySpec:
    """Layout for the quadratic model operator with n maps of shape c x n, c = n - k.

    The k upper block rows carry pi_i on the staircase positions of M^UR; the
    c lower rows carry pi_(k+i) on the diagonal. Columns are grouped per
    block column as [A-part | B-part], a column permutation of the
    [M^UL M^UR; M^LL M^LR] layout built by :func:`quadratic_model_matrix`.
    """
    n, k = model.n, model.k
    c = n - k
    if not k < n <= 2 * k:
        raise ShapeError(f"need k < n <= 2k, got n={n}, k={k}")
    placements = [Placement(i, i, j, 1.0) for i, j in _diagonal_blocks(k, c)]
    placements += [Placement(k + i, k + i, i, 1.0) for i in range(c)]
    return BlockPolySpec(n=n, k=k, m=n, s=c, placements=tuple(placements))


def ur_block_matrix(b_blocks: Sequence[np.ndarray], k: int, c: int) -> np.ndarray:
    """M^UR: kc x kc, block (i, j) of size c x k equal to B_i where the diagonal passes."""
    if len(b_blocks) != k:
        raise ShapeError(f"expected {k} B blocks, got {len(b_blocks)}")
    out = np.zeros((k * c, k * c))
    for i, j in _diagonal_blocks(k, c):
        b = as_matrix(b_blocks[i], f"B_{i}")
        if b.shape != (c, k):
            raise ShapeError(f"B_{i} has shape {b.shape}, expected {(c, k)}")
        out[i * c : (i + 1) * c, j * k : (j + 1) * k] = b
    return out


def quadratic_model_matrix(k: int, c: int, maps: Sequence[np.ndarray]) -> np.ndarray:
    """The nc x nc matrix [M^UL M^UR; M^LL M^LR] with A_j, B_j the first c / last k columns."""
    n = k + c
    if len(maps) != n:
        raise ShapeError(f"expected {n} maps, got {len(maps)}")
    maps = [as_matrix(mp, f"map {j}") for j, mp in enumerate(maps)]
    for j, mp in enumerate(maps):
        if mp.shape != (c, n):
            raise ShapeError(f"map {j} has shape {mp.shape}, expected {(c, n)}")
    a_parts = [mp[:, :c] for mp in maps]
    b_parts = [mp[:, c:] for mp in maps]
    out = np.zeros((n * c, n * c))
    width_ul = c * c
    for i, j in _diagonal_blocks(k, c):
        out[i * c : (i + 1) * c, j * c : (j + 1) * c] = a_parts[i]
    out[: k * c, width_ul:] = ur_block_matrix(b_parts[:k], k, c)
    for i in range(c):
        r0 = k * c + i * c
        out[r0 : r0 + c, i * c : (i + 1) * c] = a_parts[k + i]
        out[r0 : r0 + c, width_ul + i * k : width_ul + (i + 1) * k] = b_parts[k + i]
    return out


def _relative_gap(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


def check_homogeneity(
    spec: BlockPolySpec, maps: Sequence[np.ndarray], scalars: Sequence[float]
) -> float:
    """Relative violation of Phi(lambda_j pi_j) = prod lambda_j^d_j Phi(pi_j)."""
    maps = _check_maps(spec, maps)
    if len(scalars) != spec.m:
        raise ShapeError(f"expected {spec.m} scalars, got {len(scalars)}")
    scaled = [lam * mp for lam, mp in zip(scalars, maps)]
    factor = math.prod(lam**d for lam, d in zip(scalars, spec.degrees))
    return _relative_gap(eval_phi(spec, scaled), factor * eval_phi(spec, maps))


def _entry_scale(spec: BlockPolySpec, maps: Sequence[np.ndarray]) -> float:
    return math.prod(float(np.linalg.norm(mp)) ** d for mp, d in zip(maps, spec.degrees))


def check_sl_invariance(
    spec: BlockPolySpec, maps: Sequence[np.ndarray], seed: int, trials: int = 50
) -> float:
    """Max relative violation of Phi(A_j pi_j A^T) = Phi(pi_j) over random SL transforms."""
    maps = _check_maps(spec, maps)
    base = eval_phi(spec, maps)
    worst = 0.0
    for trial in range(trials):
        rng = spawn_rng(seed, trial)
        a = random_sl(rng, spec.n)
        moved = [random_sl(rng, spec.height) @ mp @ a.T for mp in maps]
        moved_value = eval_phi(spec, moved)
        scale = max(abs(base), abs(moved_value))
        # both sides vanish up to rounding of the transformed entries
        if scale <= 1e-10 * max(_entry_scale(spec, maps), _entry_scale(spec, moved)):
            continue
        worst = max(worst, abs(moved_value - base) / scale)
    return worst


def _unit_tuple(raw: np.ndarray) -> np.ndarray:
    norms = np.sqrt(np.sum(raw**2, axis=(-2, -1), keepdims=True))
    return raw / np.where(norms == 0, 1.0, norms)


def phi_norm_upper_bound(spec: BlockPolySpec) -> float:
    """Hadamard bound for max |Phi| over maps with |||pi_j||| <= 1.

    Each block row contributes at most (sum of squared coefficients)^(h/2) h^(-h/2).
    """
    h = spec.height
    row_sq = [0.0] * spec.block_rows
    for p in spec.placements:
        row_sq[p.block_row] += p.coefficient**2
    return math.prod((sq / h) ** (h / 2) for sq in row_sq)


def _polish(spec: BlockPolySpec, start: np.ndarray) -> float:
    shape = start.shape

    def neg_log(theta: np.ndarray) -> float:
        value = abs(_batch_phi(spec, _unit_tuple(theta.reshape(shape))[None])[0])
        return -math.log(value) if value > 0 else 1e6

    res = scipy.optimize.minimize(
        neg_log, start.ravel(), method="Powell", options={"maxfev": POLISH_ITERS, "xtol": 1e-10}
    )
    polished = abs(_batch_phi(spec, _unit_tuple(res.x.reshape(shape))[None])[0])
    return max(polished, abs(_batch_phi(spec, start[None])[0]))


def estimate_phi_norm(spec: BlockPolySpec, seed: int, budget: int) -> float:
    """Lower estimate of |||Phi||| = max |Phi| over tuples in the Hilbert-Schmidt unit ball.

    Random tuples are drawn in fixed-size chunks keyed by (seed, chunk) and
    evaluated in parallel; each new raw record is then polished with a
    coordinate-direction (Powell) search. The result is a running maximum
    over a prefix of one deterministic stream, hence monotone in ``budget``.
    """
    # pylint: disable=logging-fstring-interpolation
    if budget < 1:
        raise ValueError(f"budget must be at least 1, got {budget}")
    if not any(p.coefficient != 0 for p in spec.placements):
        return 0.0

    n_chunks = -(-budget // NORM_CHUNK)
    chunks = [(i, min(NORM_CHUNK, budget - i * NORM_CHUNK)) for i in range(n_chunks)]
    shape = (spec.m, spec.height, spec.n)

    def draw(chunk: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
        index, count = chunk
        rng = spawn_rng(seed, index)
        tuples = _unit_tuple(rng.standard_normal((NORM_CHUNK,) + shape))[:count]
        return tuples, np.abs(_batch_phi(spec, tuples))

    with ThreadPoolExecutor(max_workers=get_max_workers()) as pool:
        results = list(pool.map(draw, chunks))

    raw_best = -1.0
    estimate = 0.0
    for tuples, values in results:
        for sample, value in zip(tuples, values):
            if value > raw_best:
                raw_best = value
                estimate = max(estimate, _polish(spec, sample))
    logger.info(f"[Poly] |||Phi||| estimate {estimate:.9g} from budget {budget}")
    return estimate


def weight_lower_bound(spec: BlockPolySpec, maps: Sequence[np.ndarray], phi_norm: float) -> float:
    """Lower bound (n-k)^(-m(n-k)/2) (|Phi(maps)| / |||Phi|||)^((n-k)/d) for common degree d."""
    if phi_norm <= 0:
        raise ValueError(f"phi_norm must be positive, got {phi_norm}")
    degrees = set(spec.degrees)
    if len(degrees) != 1:
        raise PlacementError(f"degrees differ across maps: {spec.degrees}")
    d = degrees.pop()
    c = spec.height
    value = abs(eval_phi(spec, maps))
    if value == 0:
        return 0.0
    return c ** (-spec.m * c / 2.0) * (value / phi_norm) ** (c / d)


def evaluate(
    spec: BlockPolySpec, maps: Sequence[np.ndarray], seed: int = 0, budget: int = 1000
) -> PolyEval:
    """Phi together with a norm estimate and the resulting weight lower bound."""
    value = eval_phi(spec, maps)
    norm = estimate_phi_norm(spec, seed, budget)
    bound = weight_lower_bound(spec, maps, norm) if norm > 0 and value != 0 else 0.0
    return PolyEval(value=value, norm_estimate=norm, lower_bound=bound)


def _check_partition(
    groups: Sequence[Sequence[int]], size: int, name: str
) -> list[tuple[int, ...]]:
    flat = sorted(i for g in groups for i in g)
    if flat != list(range(size)):
        raise ValueError(f"{name} is not a partition of range({size})")
    return [tuple(sorted(g)) for g in groups]


def _group_sign(perm: Sequence[int]) -> int:
    sign = 1
    seen = [False] * len(perm)
    for start in range(len(perm)):
        if seen[start]:
            continue
        length = 0
        cur = start
        while not seen[cur]:
            seen[cur] = True
            cur = perm[cur]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def contraction_identity_check(
    pi_family: Sequence[np.ndarray],
    partition_i: Sequence[Sequence[int]],
    partition_j: Sequence[Sequence[int]],
) -> float:
    """|direct contraction - polarization| for an antisymmetrized contraction.

    Index lambda carries matrix pi^(lambda) of shape |[lambda]_I| x n. The
    direct side sums sgn(sigma) sgn(tau) prod_lambda pi^(lambda)[r(sigma_lambda), c(tau_lambda)]
    over permutations preserving I and J groups; for each sigma the tau-sum
    factors into one Leibniz determinant per J group. The polarization side
    is the mixed derivative of det sum_lambda t_lambda Pi_lambda, extracted
    exactly by inclusion-exclusion over subsets.
    """
    size = len(pi_family)
    if size > MAX_CONTRACTION:
        raise BudgetExceededError(f"|Lambda| = {size} exceeds {MAX_CONTRACTION}")
    if size == 0:
        raise ValueError("empty family")
    groups_i = _check_partition(partition_i, size, "I")
    groups_j = _check_partition(partition_j, size, "J")
    widths = {len(g) for g in groups_j}
    if len(widths) != 1:
        raise ValueError("J groups must share one size n")
    n = widths.pop()

    group_of_i = {lam: g for g in groups_i for lam in g}
    group_of_j = {lam: g for g in groups_j for lam in g}
    rank_i = {lam: g.index(lam) for g in groups_i for lam in g}
    rank_j = {lam: g.index(lam) for g in groups_j for lam in g}
    mats = []
    for lam, pi in enumerate(pi_family):
        pi = as_matrix(pi, f"pi_{lam}")
        if pi.shape != (len(group_of_i[lam]), n):
            raise ShapeError(
                f"pi_{lam} has shape {pi.shape}, expected {(len(group_of_i[lam]), n)}"
            )
        mats.append(pi)

    direct = 0.0
    perms_per_group = [list(itertools.permutations(range(len(g)))) for g in groups_i]
    for choice in itertools.product(*perms_per_group):
        sign = 1
        sigma = {}
        for g, perm in zip(groups_i, choice):
            sign *= _group_sign(perm)
            for pos, lam in enumerate(g):
                sigma[lam] = g[perm[pos]]
        product = float(sign)
        for g in groups_j:
            # tau-sum restricted to one J group is a determinant
            block = np.array(
                [[mats[lam][rank_i[sigma[lam]], rank_j[other]] for other in g] for lam in g]
            )
            product *= det(block)
            if product == 0.0:
                break
        direct += product

    big = []
    for lam in range(size):
        mat = np.zeros((size, size))
        for row in group_of_i[lam]:
            for col in group_of_j[lam]:
                mat[row, col] = mats[lam][rank_i[row], rank_j[col]]
        big.append(mat)

    polar = 0.0
    for mask in range(1 << size):
        members = [lam for lam in range(size) if mask >> lam & 1]
        total = sum((big[lam] for lam in members), np.zeros((size, size)))
        sign = -1.0 if (size - len(members)) % 2 else 1.0
        polar += sign * det(total)
    return abs(direct - polar)
