"""Kernels, energies and capacities of discrete measures.

Distances are l1 norms. A measure may declare some coordinates periodic
(the unit torus), in which case those coordinates contribute the torus
distance min(|u|, 1 - |u|).
"""
import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
from scipy import integrate, linalg, special
from scipy.spatial.distance import cdist

from ..errors import DomainError
from . import kernels as epsk
from .setkit import CompactSet1D, log_plus

logger = logging.getLogger(__name__)

DIAGONAL_POLICY = "singular self-energy at half the minimum atom gap"
PROJECTION_RTOL = 1e-8
RECORD_HEADER = "# sheetslice record v1"


def riesz_eval(beta: float, x: float | np.ndarray) -> float | np.ndarray:
    """U_beta(x): 1 for beta < 0, log_+(1/|x|) for beta = 0, |x|^-beta for beta > 0."""
    ax = np.abs(np.asarray(x, dtype=float))
    if beta < 0:
        out = np.ones_like(ax)
    else:
        with np.errstate(divide="ignore"):
            out = log_plus(1.0 / ax) if beta == 0 else ax ** (-beta)
        out = np.where(ax == 0, np.inf, out)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Kernel:
    """Radial gauge k(|x|_1), possibly infinite at 0.

    Tags: ``riesz`` (params = (beta,)), ``constant`` ((c,)), ``f_eps``,
    ``F_eps``, ``G_eps`` ((eps, d)) and ``projected`` (a base kernel averaged
    over the unit cube of ``m`` extra coordinates, or over the unit torus
    when ``periodic``).
    """

    tag: str
    params: tuple[float, ...] = ()
    base: Optional["Kernel"] = None
    m: int = 0
    periodic: bool = False

    @classmethod
    def riesz(cls, beta: float) -> "Kernel":
        return cls("riesz", (float(beta),))

    @classmethod
    def constant(cls, value: float = 1.0) -> "Kernel":
        if value < 0:
            raise DomainError(f"kernel must be nonnegative, got constant {value}")
        return cls("constant", (float(value),))

    @classmethod
    def eps_family(cls, tag: str, eps: float, d: int) -> "Kernel":
        if tag not in ("f_eps", "F_eps", "G_eps"):
            raise DomainError(f"unknown eps-kernel tag '{tag}'")
        epsk.EpsKernelParams(eps, d)
        return cls(tag, (float(eps), float(d)))

    def __call__(self, r: float | np.ndarray) -> np.ndarray:
        r = np.abs(np.asarray(r, dtype=float))
        if self.tag == "riesz":
            return np.asarray(riesz_eval(self.params[0], r))
        if self.tag == "constant":
            return np.full_like(r, self.params[0])
        if self.tag in ("f_eps", "F_eps", "G_eps"):
            p = epsk.EpsKernelParams(self.params[0], int(self.params[1]))
            return np.asarray(getattr(epsk, self.tag)(p, r))
        if self.tag == "projected":
            flat = r.ravel()
            unique, inverse = np.unique(flat, return_inverse=True)
            values = np.array([_projected_value(self, float(u)) for u in unique])
            return values[inverse].reshape(r.shape)
        raise DomainError(f"unknown kernel tag '{self.tag}'")

    @property
    def singular(self) -> bool:
        return bool(np.isinf(self(0.0)))

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"tag": self.tag, "params": list(self.params)}
        if self.tag == "projected":
            out.update(m=self.m, periodic=self.periodic, base=self.base.to_dict())
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Kernel":
        if data["tag"] == "projected":
            return cls("projected", (), cls.from_dict(data["base"]), int(data["m"]),
                       bool(data["periodic"]))
        return cls(data["tag"], tuple(float(p) for p in data["params"]))


@dataclass(frozen=True)
class DiscreteMeasure:
    """Atoms in R^n with probability weights; ``torus_axes`` are periodic coordinates."""

    atoms: np.ndarray
    weights: np.ndarray
    torus_axes: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        atoms = np.asarray(self.atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        weights = np.asarray(self.weights, dtype=float)
        if len(atoms) != len(weights) or len(atoms) == 0:
            raise DomainError("measure needs matching, non-empty atoms and weights")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise DomainError(f"weights must be nonnegative and sum to 1 (sum {weights.sum()})")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, atoms: np.ndarray, torus_axes: tuple[int, ...] = ()) -> "DiscreteMeasure":
        atoms = np.asarray(atoms, dtype=float)
        return cls(atoms, np.full(len(atoms), 1.0 / len(atoms)), torus_axes)

    @classmethod
    def normalized(cls, atoms: np.ndarray, weights: np.ndarray,
                   torus_axes: tuple[int, ...] = ()) -> "DiscreteMeasure":
        weights = np.clip(np.asarray(weights, dtype=float), 0.0, None)
        return cls(atoms, weights / weights.sum(), torus_axes)

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    def shifted(self, offset: Sequence[float]) -> "DiscreteMeasure":
        return DiscreteMeasure(self.atoms + np.asarray(offset, dtype=float), self.weights,
                               self.torus_axes)


def pairwise_distances(a: np.ndarray, b: np.ndarray, torus_axes: tuple[int, ...] = ()) -> np.ndarray:
    """l1 distances between two atom sets, torus distance on ``torus_axes``."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if not torus_axes:
        return cdist(a, b, metric="cityblock")
    flat = [i for i in range(a.shape[1]) if i not in torus_axes]
    dist = cdist(a[:, flat], b[:, flat], metric="cityblock") if flat else 0.0
    for axis in torus_axes:
        gap = np.abs(a[:, axis][:, None] - b[:, axis][None, :]) % 1.0
        dist = dist + np.minimum(gap, 1.0 - gap)
    return dist


def _min_positive(dist: np.ndarray) -> float:
    positive = dist[dist > 0]
    return float(positive.min()) if positive.size else math.inf


def kernel_matrix(mu: DiscreteMeasure, k: Kernel) -> np.ndarray:
    """Matrix k(|x_i - x_j|) with the diagonal regularized for singular kernels."""
    dist = pairwise_distances(mu.atoms, mu.atoms, mu.torus_axes)
    with np.errstate(divide="ignore", over="ignore"):
        values = k(dist)
    if k.singular:
        gap = _min_positive(dist)
        diag = k(gap / 2) if math.isfinite(gap) else np.inf
        np.fill_diagonal(values, diag)
    return values


def energy(mu: DiscreteMeasure, k: Kernel) -> float:
    """I_k(mu) = sum_ij w_i w_j k(x_i - x_j); +inf when any charged term is infinite."""
    support = mu.weights > 0
    reduced = DiscreteMeasure(mu.atoms[support], mu.weights[support], mu.torus_axes)
    values = kernel_matrix(reduced, k)
    if not np.all(np.isfinite(values)):
        return math.inf
    w = reduced.weights
    return float(w @ values @ w)


def bilinear_energy(sigma: DiscreteMeasure, rho: DiscreteMeasure, k: Kernel) -> float:
    """Symmetrized mutual energy I_k(sigma, rho); coincident atoms use the diagonal rule."""
    dist = pairwise_distances(sigma.atoms, rho.atoms, sigma.torus_axes)
    with np.errstate(divide="ignore", over="ignore"):
        values = k(dist)
    if k.singular:
        union = np.vstack([sigma.atoms, rho.atoms])
        gap = _min_positive(pairwise_distances(union, union, sigma.torus_axes))
        if math.isfinite(gap):
            values = np.where(dist == 0, k(gap / 2), values)
    charged = np.outer(sigma.weights > 0, rho.weights > 0)
    if not np.all(np.isfinite(values[charged])):
        return math.inf
    return float(sigma.weights @ np.where(charged, values, 0.0) @ rho.weights)


# ----------------------------------------------------------------------------
# Capacity
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class SimplexSolution:
    weights: np.ndarray
    energy: float
    duality_gap: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class CapacityResult:
    capacity: float
    energy: float
    minimizer: DiscreteMeasure
    duality_gap: float
    iterations: int
    converged: bool


def place_atoms(F: CompactSet1D, m: int) -> np.ndarray:
    """Cell midpoints on each interval, in proportion to length (>= 2 each); points get one atom."""
    if F.is_empty:
        raise DomainError("cannot place atoms on the empty set")
    if m < 2:
        raise DomainError(f"need at least 2 atoms, got {m}")
    total = float(F.length)
    atoms: list[np.ndarray] = []
    for a, b in F.intervals:
        if a == b:
            atoms.append(np.array([float(a)]))
            continue
        count = max(2, int(round(m * float(b - a) / total)))
        step = float(b - a) / count
        atoms.append(float(a) + step * (np.arange(count) + 0.5))
    return np.concatenate(atoms)


def _kkt_start(K: np.ndarray) -> Optional[np.ndarray]:
    ones = np.ones(len(K))
    for assume in ("pos", "sym"):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                x = linalg.solve(K, ones, assume_a=assume)
        except (linalg.LinAlgError, ValueError):
            continue
        if np.all(np.isfinite(x)) and np.all(x > 0):
            return x / x.sum()
    return None


def minimize_energy(K: np.ndarray, gap_tol: float = 1e-9, max_iter: int = 100_000) -> SimplexSolution:
    """Minimize w^T K w over the probability simplex.

    Starts from the equality-constrained stationary point when it is strictly
    positive, then runs Frank-Wolfe with away steps and exact line search.
    The duality gap 2 (w^T K w - min_i (K w)_i) bounds the excess energy.
    """
    n = len(K)
    w = _kkt_start(K)
    if w is None:
        w = np.full(n, 1.0 / n)
    q = K @ w
    diag = np.diag(K)
    gap = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        f = float(w @ q)
        s = int(np.argmin(q))
        gap = 2.0 * (f - q[s])
        if gap < gap_tol:
            break
        active = np.flatnonzero(w > 0)
        v = int(active[np.argmax(q[active])])
        if q[v] - f <= f - q[s] or w[v] >= 1.0:
            slope, curvature, gamma_max = q[s] - f, diag[s] - 2 * q[s] + f, 1.0
            away = False
        else:
            slope, curvature = f - q[v], f - 2 * q[v] + diag[v]
            gamma_max = w[v] / (1.0 - w[v])
            away = True
        gamma = gamma_max if curvature <= 0 else min(gamma_max, max(0.0, -slope / curvature))
        if away:
            w *= 1.0 + gamma
            w[v] -= gamma
            q = (1.0 + gamma) * q - gamma * K[:, v]
            if gamma == gamma_max:
                w[v] = 0.0
        else:
            w *= 1.0 - gamma
            w[s] += gamma
            q = (1.0 - gamma) * q + gamma * K[:, s]
        if it % 1000 == 0:
            w = np.clip(w, 0.0, None)
            w /= w.sum()
            q = K @ w
            logger.debug(f"frank-wolfe iteration {it}: gap {gap:.3e}")
    w = np.clip(w, 0.0, None)
    w /= w.sum()
    q = K @ w
    f = float(w @ q)
    gap = 2.0 * (f - float(q.min()))
    return SimplexSolution(w, f, gap, it, gap < gap_tol)


def capacity_of_measure_support(mu: DiscreteMeasure, k: Kernel, gap_tol: float = 1e-9,
                                max_iter: int = 100_000) -> CapacityResult:
    """Capacity of the atom set of ``mu`` (its weights are ignored)."""
    K = kernel_matrix(mu, k)
    if not np.any(np.isfinite(K)):
        return CapacityResult(0.0, math.inf, mu, 0.0, 0, True)
    if not np.all(np.isfinite(K)):
        raise DomainError("kernel is infinite between distinct atoms")
    solution = minimize_energy(K, gap_tol, max_iter)
    minimizer = DiscreteMeasure(mu.atoms, solution.weights, mu.torus_axes)
    return CapacityResult(
        capacity=1.0 / solution.energy if solution.energy > 0 else math.inf,
        energy=solution.energy,
        minimizer=minimizer,
        duality_gap=solution.duality_gap,
        iterations=solution.iterations,
        converged=solution.converged,
    )


def capacity(F: CompactSet1D, k: Kernel, m: int, gap_tol: float = 1e-9,
             max_iter: int = 100_000) -> CapacityResult:
    """Cap_k(F) = 1 / min energy over probability measures on ``m`` atoms placed on F."""
    atoms = place_atoms(F, m)
    result = capacity_of_measure_support(DiscreteMeasure.uniform(atoms), k, gap_tol, max_iter)
    logger.debug(
        f"capacity {k.tag}{k.params} on {F} with {len(atoms)} atoms: {result.capacity:.6g} "
        f"(gap {result.duality_gap:.2e}, {result.iterations} iterations)"
    )
    return result


def hitting_capacities(F: CompactSet1D, d: int, m: int) -> tuple[float, float]:
    """Riesz capacities of orders (d-2)/2 and (d-4)/2 of F.

    Positivity of the first decides whether the slice zero set meets F, of the
    second whether the double-point set does.
    """
    first = capacity(F, Kernel.riesz((d - 2) / 2), m).capacity
    second = capacity(F, Kernel.riesz((d - 4) / 2), m).capacity
    return first, second


# ----------------------------------------------------------------------------
# Projection
# ----------------------------------------------------------------------------

def project_kernel(k: Kernel, m: int, periodic: bool = False) -> Kernel:
    """Pi_m k(x) = int_{[0,1]^m} k(|x| + |y|_1) dy.

    With ``periodic`` the cube is the unit torus and |y|_1 the torus norm; in
    that geometry Cap_k(T^m x F) = Cap_{Pi_m k}(F) holds with the product of
    the uniform measure and the minimizer on F.
    """
    if m < 1:
        raise DomainError(f"m must be >= 1, got {m}")
    if k.tag == "constant":
        return k
    return Kernel("projected", (), k, int(m), bool(periodic))


def _irwin_hall_pdf(v: float, m: int) -> float:
    if v < 0 or v > m:
        return 0.0
    ks = np.arange(0, int(math.floor(v)) + 1)
    terms = (-1.0) ** ks * special.comb(m, ks) * (v - ks) ** (m - 1)
    return float(terms.sum() / math.factorial(m - 1))


@lru_cache(maxsize=65536)
def _projected_value(k: Kernel, x: float) -> float:
    base, m = k.base, k.m
    half = 0.5 if k.periodic else 1.0
    if base.tag == "riesz":
        beta = base.params[0]
        if beta < 0:
            return 1.0
        if x == 0 and beta > 0 and beta >= m:
            return math.inf
        if m == 1 and beta > 0:
            # closed form of int_0^half (x + v)^-beta dv / half
            if beta == 1:
                return math.log((x + half) / x) / half if x > 0 else math.inf
            upper = (x + half) ** (1 - beta)
            lower = x ** (1 - beta) if x > 0 else (0.0 if beta < 1 else math.inf)
            return (upper - lower) / ((1 - beta) * half)

    def integrand(v: float) -> float:
        density = _irwin_hall_pdf(v / half, m) / half
        return density * float(base(x + v))

    total = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for piece in range(m):
            lo, hi = piece * half, (piece + 1) * half
            value, _ = integrate.quad(integrand, lo, hi, epsrel=PROJECTION_RTOL, epsabs=0.0,
                                      limit=200)
            total += value
    return total


def product_measure(mu: DiscreteMeasure, m: int, per_axis: int) -> DiscreteMeasure:
    """Uniform grid measure on the torus T^m times ``mu``; torus coordinates come first."""
    grid = np.arange(per_axis) / per_axis
    cube = np.stack(np.meshgrid(*([grid] * m), indexing="ij"), axis=-1).reshape(-1, m)
    atoms = np.hstack([
        np.repeat(cube, len(mu.atoms), axis=0),
        np.tile(mu.atoms, (len(cube), 1)),
    ])
    weights = np.tile(mu.weights, len(cube)) / len(cube)
    return DiscreteMeasure(atoms, weights, tuple(range(m)))


@dataclass(frozen=True)
class ProjectionCheck:
    relative_gap: float
    product_capacity: float
    projected_capacity: float
    converged: bool


def projection_theorem_check(F: CompactSet1D, k: Kernel, m: int, atoms: int,
                             gap_tol: float = 1e-9) -> ProjectionCheck:
    """Compare Cap_k(T^m x F) on a product grid with Cap_{Pi_m k}(F) on the line.

    Args:
        F: Compact set
        k: Riesz kernel with 0 < beta < m + 1, or a constant kernel
        m: Number of cube coordinates
        atoms: Grid points per cube axis and atom count on F

    Returns:
        ProjectionCheck with |a - b| / max(a, b)
    """
    if k.tag == "riesz" and not 0 < k.params[0] < m + 1:
        raise DomainError(f"riesz order must lie in (0, {m + 1}), got {k.params[0]}")
    if k.tag not in ("riesz", "constant"):
        raise DomainError(f"projection check takes riesz or constant kernels, got {k.tag}")
    line = DiscreteMeasure.uniform(place_atoms(F, atoms))
    if atoms ** m * len(line.atoms) > 16384:
        raise DomainError(f"product grid of {atoms}^{m} x {len(line.atoms)} atoms is too large")
    product = capacity_of_measure_support(product_measure(line, m, atoms), k, gap_tol)
    projected = capacity_of_measure_support(line, project_kernel(k, m, periodic=True), gap_tol)
    a, b = product.capacity, projected.capacity
    gap = abs(a - b) / max(a, b) if max(a, b) > 0 else 0.0
    logger.info(f"projection check on {F}: product {a:.6g}, projected {b:.6g}, gap {gap:.3%}")
    return ProjectionCheck(gap, a, b, product.converged and projected.converged)


# ----------------------------------------------------------------------------
# Frostman ratio and records
# ----------------------------------------------------------------------------

def frostman_ratio(mu: DiscreteMeasure, alpha: float, radii: Sequence[float]) -> float:
    """sup over atoms x and radii r of mu(B(x, r)) / r^alpha (closed l1 balls)."""
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    dist = pairwise_distances(mu.atoms, mu.atoms, mu.torus_axes)
    best = 0.0
    for r in radii:
        mass = (dist <= r * (1 + 1e-12)) @ mu.weights
        best = max(best, float(mass.max()) / r ** alpha)
    return best


@dataclass
class MeasureRecord:
    kernel: Kernel
    measure: DiscreteMeasure
    info: dict[str, Any] = field(default_factory=dict)


def write_record(path: str | Path, record: MeasureRecord) -> Path:
    """Write kernel + measure as a self-describing text record (17 significant digits)."""
    path = Path(path)
    mu = record.measure
    lines = [
        RECORD_HEADER,
        "kernel: " + json.dumps(record.kernel.to_dict(), sort_keys=True),
        "info: " + json.dumps(record.info, sort_keys=True),
        f"atoms: {len(mu.atoms)} dim: {mu.dim} torus_axes: {','.join(map(str, mu.torus_axes))}",
    ]
    for atom, weight in zip(mu.atoms, mu.weights):
        lines.append(" ".join(f"{v:.17g}" for v in (*atom, weight)))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_record(path: str | Path) -> MeasureRecord:
    """Read a record written by ``write_record``."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Record not found: {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != RECORD_HEADER:
        raise DomainError(f"{path}: not a sheetslice record")
    kernel = Kernel.from_dict(json.loads(lines[1].removeprefix("kernel: ")))
    info = json.loads(lines[2].removeprefix("info: "))
    fields = lines[3].split()
    dim = int(fields[3])
    torus = tuple(int(a) for a in fields[5].split(",")) if len(fields) > 5 and fields[5] else ()
    rows = np.array([[float(v) for v in line.split()] for line in lines[4:] if line.strip()])
    rows = rows.reshape(-1, dim + 1)
    measure = DiscreteMeasure(rows[:, :dim], rows[:, dim], torus)
    return MeasureRecord(kernel, measure, info)
