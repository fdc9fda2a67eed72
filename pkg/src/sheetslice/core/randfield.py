"""White noise, Brownian sheets, Brownian paths and slices on grids.

The sheet is B(s,t) = W([0,s] x [0,t]) for a d-dimensional white noise W, so
on an (ns x nt) grid it is the two-dimensional prefix sum of independent
Gaussian cell masses with variance equal to the cell area. Every sampler is a
pure function of its inputs and seed.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Iterator, Optional

import numpy as np

from ..errors import ConfigurationError, DomainError
from ..utils.rng import derive_rng

logger = logging.getLogger(__name__)

NOISE_STREAM = 0
BM_STREAM = 1
ROW_BLOCK = 256
MAX_ELEMENTS = np.iinfo(np.intp).max // 8


@dataclass(frozen=True)
class GridSpec:
    """Rectangular grid [0, s_max] x [0, t_max] with ns x nt cells of d-vectors."""

    s_max: float
    t_max: float
    ns: int
    nt: int
    dim: int
    seed: int = 0

    def __post_init__(self) -> None:
        if not (np.isfinite(self.s_max) and self.s_max > 0):
            raise ConfigurationError(f"s_max must be positive, got {self.s_max}")
        if not (np.isfinite(self.t_max) and self.t_max > 0):
            raise ConfigurationError(f"t_max must be positive, got {self.t_max}")
        if int(self.ns) < 2 or int(self.nt) < 2:
            raise ConfigurationError(f"need at least 2x2 cells, got {self.ns}x{self.nt}")
        if int(self.dim) < 1:
            raise ConfigurationError(f"dim must be >= 1, got {self.dim}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigurationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if (int(self.ns) + 1) * (int(self.nt) + 1) * int(self.dim) > MAX_ELEMENTS:
            raise ConfigurationError(
                f"grid {self.ns}x{self.nt}x{self.dim} overflows the addressable size"
            )

    @property
    def ds(self) -> float:
        return self.s_max / self.ns

    @property
    def dt(self) -> float:
        return self.t_max / self.nt

    def with_seed(self, seed: int) -> "GridSpec":
        return GridSpec(self.s_max, self.t_max, self.ns, self.nt, self.dim, seed)


@dataclass(frozen=True)
class NoiseGrid:
    """Cell masses of a white noise; ``cells[i, j]`` is the mass of cell (i, j)."""

    spec: GridSpec
    cells: np.ndarray


@dataclass(frozen=True)
class SheetSample:
    """Sheet values on grid nodes: ``values[i, j] = B(i*ds, j*dt)``."""

    spec: GridSpec
    values: np.ndarray

    def at(self, s: float, t: float) -> np.ndarray:
        """Value at the grid node nearest to (s, t)."""
        i = _snap_index(s, self.spec.ds, self.spec.ns, "s")
        j = _snap_index(t, self.spec.dt, self.spec.nt, "t")
        return self.values[i, j]

    def rectangle(self, i1: int, j1: int, i2: int, j2: int) -> np.ndarray:
        """White-noise mass of the grid rectangle [i1, i2] x [j1, j2] from its corners."""
        v = self.values
        return v[i2, j2] - v[i1, j2] - v[i2, j1] + v[i1, j1]


@dataclass(frozen=True)
class Path:
    """A path sampled at strictly increasing times."""

    times: np.ndarray
    points: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.times) != len(self.points):
            raise DomainError(
                f"times and points differ in length ({len(self.times)} vs {len(self.points)})"
            )
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise DomainError("path times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)


def _read_only(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def _snap_index(x: float, step: float, n: int, axis: str) -> int:
    if not 0.0 <= x <= n * step * (1 + 1e-12):
        raise DomainError(f"{axis} = {x} outside [0, {n * step}]")
    return int(min(n, np.floor(x / step + 0.5)))


def sample_white_noise(spec: GridSpec) -> NoiseGrid:
    """Draw the white-noise cell masses of a grid.

    Rows of cells are generated in blocks of ROW_BLOCK, each block from the
    stream (seed, NOISE_STREAM, block index), so a grid is reproduced bit for
    bit from its spec.

    Args:
        spec: Grid specification (including the seed)

    Returns:
        NoiseGrid with cells of shape (ns, nt, dim)
    """
    scale = np.sqrt(spec.ds * spec.dt)
    cells = np.empty((spec.ns, spec.nt, spec.dim))
    for block, start in enumerate(range(0, spec.ns, ROW_BLOCK)):
        stop = min(start + ROW_BLOCK, spec.ns)
        rng = derive_rng(spec.seed, NOISE_STREAM, block)
        cells[start:stop] = rng.standard_normal((stop - start, spec.nt, spec.dim)) * scale
    return NoiseGrid(spec=spec, cells=_read_only(cells))


def build_sheet(noise: NoiseGrid) -> SheetSample:
    """Prefix-sum white noise into a sheet.

    Summation is along t within each row first, then accumulated across rows,
    always in this order.
    """
    spec = noise.spec
    values = np.zeros((spec.ns + 1, spec.nt + 1, spec.dim))
    np.cumsum(np.cumsum(noise.cells, axis=1), axis=0, out=values[1:, 1:])
    return SheetSample(spec=spec, values=_read_only(values))


def slice_at(sheet: SheetSample, s: float) -> Path:
    """Slice t -> B(s, t) along the grid line nearest to s.

    Args:
        sheet: Simulated sheet
        s: Slice parameter in [0, s_max]

    Returns:
        Path over the t-grid; ``meta`` records the snapped s and the snap distance
    """
    spec = sheet.spec
    i = _snap_index(s, spec.ds, spec.ns, "s")
    snapped = i * spec.ds
    times = np.arange(spec.nt + 1) * spec.dt
    return Path(
        times=times,
        points=sheet.values[i],
        meta={"s": snapped, "snap_distance": abs(s - snapped)},
    )


def _check_times(times: np.ndarray) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) == 0:
        raise DomainError("times must be a non-empty 1-D array")
    if times[0] < 0:
        raise DomainError(f"times must start at or after 0, got {times[0]}")
    if len(times) > 1 and not np.all(np.diff(times) > 0):
        raise DomainError("times must be strictly increasing")
    return times


def sample_bm(dim: int, times: np.ndarray, seed: int) -> Path:
    """Standard Brownian motion in R^dim started at 0, observed at ``times``."""
    if dim < 1:
        raise DomainError(f"dim must be >= 1, got {dim}")
    times = _check_times(times)
    rng = derive_rng(seed, BM_STREAM)
    gaps = np.diff(times, prepend=0.0)
    steps = rng.standard_normal((len(times), dim)) * np.sqrt(gaps)[:, None]
    return Path(times=times, points=np.cumsum(steps, axis=0))


def sample_bm_batch(dim: int, times: np.ndarray, n_paths: int, seed: int,
                    first_index: int = 0) -> np.ndarray:
    """Independent Brownian paths; path ``i`` uses the stream (seed, BM_STREAM, i).

    Returns:
        Array of shape (n_paths, len(times), dim)
    """
    times = _check_times(times)
    gaps = np.sqrt(np.diff(times, prepend=0.0))[:, None]
    out = np.empty((n_paths, len(times), dim))
    for offset in range(n_paths):
        rng = derive_rng(seed, BM_STREAM, first_index + offset)
        out[offset] = np.cumsum(rng.standard_normal((len(times), dim)) * gaps, axis=0)
    return out


def _strip_widths(values: np.ndarray, name: str) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or len(values) == 0:
        raise DomainError(f"{name} must be a non-empty 1-D array")
    if values[0] < 0 or (len(values) > 1 and not np.all(np.diff(values) > 0)):
        raise DomainError(f"{name} must be non-negative and strictly increasing")
    return np.diff(values, prepend=0.0)


def iter_sheet_blocks(
    s_values: np.ndarray,
    t_values: np.ndarray,
    dim: int,
    rng: np.random.Generator,
    block: int = 64,
) -> Iterator[tuple[int, np.ndarray]]:
    """Stream the sheet on the product of sorted node sets, a block of t-nodes at a time.

    The region below the first node in each direction is a single strip, so
    the joint law at the nodes is exact however coarse the node sets are.

    Yields:
        (index of the first t-node in the block, array of shape (rows, ns, dim))
    """
    widths = _strip_widths(s_values, "s_values")
    heights = _strip_widths(t_values, "t_values")
    current = np.zeros((len(widths), dim))
    col_scale = np.sqrt(widths)[None, :, None]
    for start in range(0, len(heights), block):
        h = heights[start:start + block]
        cells = rng.standard_normal((len(h), len(widths), dim))
        cells *= col_scale * np.sqrt(h)[:, None, None]
        rows = np.cumsum(cells, axis=1)
        rows[0] += current
        np.cumsum(rows, axis=0, out=rows)
        current = rows[-1].copy()
        yield start, rows


def sample_sheet_region(s_values: np.ndarray, t_values: np.ndarray, dim: int,
                        rng: np.random.Generator) -> np.ndarray:
    """Sheet values at every (t, s) node pair, shape (len(t_values), len(s_values), dim)."""
    return np.concatenate([rows for _, rows in iter_sheet_blocks(s_values, t_values, dim, rng)])


def sheet_mixing(s_values: np.ndarray) -> np.ndarray:
    """Lower-triangular L with B(s_k, .) = sum_j L[k, j] W_j(.) for independent BMs W_j."""
    widths = _strip_widths(s_values, "s_values")
    return np.tril(np.broadcast_to(np.sqrt(widths), (len(widths), len(widths))))


def bridge_path(start: np.ndarray, duration: float, n_steps: int,
                rng: np.random.Generator) -> np.ndarray:
    """Brownian path from ``start`` over ``duration`` by dyadic bridge bisection.

    The endpoint is drawn first and midpoints are filled level by level, so the
    path on n_steps nodes is the even-indexed subsequence of the path on
    2 * n_steps nodes drawn from the same generator.

    Args:
        start: Initial values, any shape (e.g. (J, dim) for J independent motions)
        duration: Time span
        n_steps: Number of steps, a power of two
        rng: Generator

    Returns:
        Array of shape (n_steps + 1, *start.shape)
    """
    if n_steps < 1 or n_steps & (n_steps - 1):
        raise DomainError(f"n_steps must be a power of two, got {n_steps}")
    start = np.asarray(start, dtype=float)
    nodes = np.empty((n_steps + 1, *start.shape))
    nodes[0] = start
    nodes[n_steps] = start + np.sqrt(duration) * rng.standard_normal(start.shape)
    half = n_steps // 2
    while half >= 1:
        left = np.arange(0, n_steps, 2 * half)
        tau = duration * (2 * half) / n_steps
        noise = rng.standard_normal((len(left), *start.shape)) * np.sqrt(tau / 4)
        nodes[left + half] = 0.5 * (nodes[left] + nodes[left + 2 * half]) + noise
        half //= 2
    return nodes


def column_minima(
    mixing: np.ndarray,
    dim: int,
    t_lo: float,
    t_hi: float,
    n_coarse: int,
    rng: np.random.Generator,
    threshold: Optional[float] = None,
    dt_min: Optional[float] = None,
    max_intervals: int = 1 << 14,
) -> np.ndarray:
    """Per-column minimum of |sum_j L[k, j] W_j(t)|_1 over t in [t_lo, t_hi].

    W_j are independent standard Brownian motions in R^dim with W_j(0) = 0,
    started from their exact law at t_lo. The coarse path comes from
    ``bridge_path``. With ``threshold`` and ``dt_min`` set, every interval
    whose endpoint norm for some column comes within
    threshold + 4 * dim * sqrt(sigma_k^2 * dt) of the origin is bisected
    again, down to ``dt_min``; other intervals cannot dip below the
    threshold except with probability below 1e-13 per coordinate.

    Args:
        mixing: (K, J) mixing matrix L
        dim: Dimension of each motion
        t_lo: Start of the observation window
        t_hi: End of the observation window
        n_coarse: Coarse steps, a power of two
        rng: Generator
        threshold: Largest radius of interest; enables adaptive refinement
        dt_min: Finest step for adaptive refinement
        max_intervals: Cap on intervals refined per level (closest ones kept)

    Returns:
        Array of shape (K,) with the minima found
    """
    mixing = np.atleast_2d(np.asarray(mixing, dtype=float))
    if not 0 <= t_lo < t_hi:
        raise DomainError(f"need 0 <= t_lo < t_hi, got [{t_lo}, {t_hi}]")
    n_latent = mixing.shape[1]
    start = rng.standard_normal((n_latent, dim)) * np.sqrt(t_lo)
    nodes = bridge_path(start, t_hi - t_lo, n_coarse, rng)

    def norms(w: np.ndarray) -> np.ndarray:
        return np.abs(np.einsum("kj,njd->nkd", mixing, w)).sum(axis=-1)

    node_norms = norms(nodes)
    minima = node_norms.min(axis=0)
    if threshold is None or dt_min is None:
        return minima

    rate = np.sqrt((mixing ** 2).sum(axis=1))
    tau = (t_hi - t_lo) / n_coarse
    left, right = nodes[:-1], nodes[1:]
    closest = np.minimum(node_norms[:-1], node_norms[1:])
    depth = 0
    while tau > dt_min and len(left):
        slack = closest - (threshold + 4.0 * dim * rate * np.sqrt(tau))
        keep = np.flatnonzero((slack <= 0).any(axis=1))
        if len(keep) > max_intervals:
            order = np.argsort(slack[keep].min(axis=1), kind="stable")
            keep = np.sort(keep[order[:max_intervals]])
            logger.debug(f"refinement capped at {max_intervals} intervals (depth {depth})")
        if not len(keep):
            break
        left, right = left[keep], right[keep]
        mid = 0.5 * (left + right) + rng.standard_normal(left.shape) * np.sqrt(tau / 4)
        mid_norms = norms(mid)
        minima = np.minimum(minima, mid_norms.min(axis=0))
        closest_left = np.minimum(closest[keep], mid_norms)
        left = np.concatenate([left, mid])
        right = np.concatenate([mid, right])
        closest = np.concatenate([closest_left, closest_left])
        tau /= 2
        depth += 1
    return minima


def modulus_holds(sheet: SheetSample, k: int, n: float) -> bool:
    """Whether every k-cell of [1, 2]^2 has l1 oscillation at most n * sqrt(log k / k).

    The oscillation of a cell is bounded by the sum over coordinates of the
    value range on the grid nodes of the cell.
    """
    spec = sheet.spec
    if k < 2:
        raise DomainError(f"k must be >= 2, got {k}")
    if spec.s_max < 2 or spec.t_max < 2:
        raise DomainError("modulus check needs a grid covering [1, 2]^2")
    a = (1.0 / k) / spec.ds
    b = (1.0 / k) / spec.dt
    if abs(a - round(a)) > 1e-9 or abs(b - round(b)) > 1e-9 or round(a) < 1 or round(b) < 1:
        raise DomainError(f"k = {k} cells are not aligned with the grid")
    a, b = int(round(a)), int(round(b))
    i0, j0 = int(round(1.0 / spec.ds)), int(round(1.0 / spec.dt))
    bound = n * np.sqrt(np.log(k) / k)
    v = sheet.values
    for i in range(k):
        band = v[i0 + i * a: i0 + (i + 1) * a + 1, j0: j0 + k * b + 1]
        windows = np.lib.stride_tricks.sliding_window_view(band, b + 1, axis=1)[:, ::b]
        spread = windows.max(axis=(0, 3)) - windows.min(axis=(0, 3))
        if np.any(spread.sum(axis=-1) > bound):
            return False
    return True
