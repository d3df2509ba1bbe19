"""Numerical exercises for the slab geometry: the translation/stretch
dichotomy, its iteration, image-volume estimation, the adjacent-cube volume
bound, and the raster checks for image symmetric differences and boundary
neighbourhoods.

Test maps are analytic homeomorphisms (affine, shear, radial bump,
piecewise stretch) plus a grid-sampled kind with multilinear interpolation;
they stand in for the abstract quantification over all maps of bounded
modulus, giving falsifiable coverage at chosen parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import distance_transform_edt
from scipy.spatial import cKDTree

from .errors import ConfigurationError, DomainError, ReliabilityError
from .moduli import FiniteMap, Modulus, bi_l_omega
from .params import upsilon_log


# ---------------------------------------------------------------------------
# test-map library
# ---------------------------------------------------------------------------

class AffineMap:
    """x -> A x + b; exact volumes and inverses."""

    kind = "affine"

    def __init__(self, A, b=None, domain=None):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.d = self.A.shape[0]
        self.b = np.zeros(self.d) if b is None else np.asarray(b, dtype=float)
        self.domain = domain
        self._Ainv = np.linalg.inv(self.A)

    def __call__(self, x):
        return np.atleast_2d(x) @ self.A.T + self.b

    def invert(self, y):
        return (np.atleast_2d(y) - self.b) @ self._Ainv.T

    def volume_factor(self):
        return abs(float(np.linalg.det(self.A)))


def identity_map(d, domain=None) -> AffineMap:
    return AffineMap(np.eye(d), domain=domain)


def shear_map(s, d=2, domain=None) -> AffineMap:
    A = np.eye(d)
    A[0, 1] = s
    return AffineMap(A, domain=domain)


class RadialBump:
    """x -> x + amp * exp(-|x-c|^2/w^2) (x - c): a smooth radial push,
    injective for moderate amplitudes (|amp| < e^{3/2}/2 suffices 1-d
    radially; the sample-grid check guards the rest)."""

    kind = "radial-bump"

    def __init__(self, center, amp, width, domain=None):
        self.center = np.asarray(center, dtype=float)
        self.amp = float(amp)
        self.width = float(width)
        self.d = len(self.center)
        self.domain = domain

    def _profile(self, r):
        return r * (1.0 + self.amp * np.exp(-(r / self.width) ** 2))

    def __call__(self, x):
        x = np.atleast_2d(x)
        v = x - self.center
        r = np.linalg.norm(v, axis=1)
        factor = 1.0 + self.amp * np.exp(-(r / self.width) ** 2)
        return self.center + v * factor[:, None]

    def invert(self, y):
        y = np.atleast_2d(y)
        v = y - self.center
        s = np.linalg.norm(v, axis=1)
        lo = np.zeros_like(s)
        shrink = min(1.0, 1.0 + self.amp)
        if shrink <= 0:
            raise DomainError("bump amplitude below -1 is not injective")
        hi = s / shrink + self.width
        while np.any(self._profile(hi) < s):
            hi = np.where(self._profile(hi) < s, hi * 2, hi)
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            below = self._profile(mid) < s
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        r = 0.5 * (lo + hi)
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(s[:, None] > 0, v / np.maximum(s, 1e-300)[:, None], 0.0)
        return self.center + unit * r[:, None]

    def volume_factor(self):
        return None


class PiecewiseStretch:
    """First coordinate passes through an increasing piecewise-linear map;
    the rest stay fixed.  Breakpoints are (t_k, slope on [t_k, t_{k+1}))."""

    kind = "piecewise-stretch"

    def __init__(self, breaks, slopes, d=1, domain=None):
        self.breaks = np.asarray(breaks, dtype=float)
        self.slopes = np.asarray(slopes, dtype=float)
        if np.any(self.slopes <= 0):
            raise DomainError("slopes must be positive for injectivity")
        if len(self.breaks) != len(self.slopes):
            raise DomainError("need one slope per segment start")
        self.d = d
        self.domain = domain
        self._heights = np.concatenate([
            [0.0], np.cumsum(self.slopes[:-1] * np.diff(self.breaks))])

    def _forward_1d(self, t):
        k = np.clip(np.searchsorted(self.breaks, t, side="right") - 1, 0,
                    len(self.breaks) - 1)
        return self._heights[k] + self.slopes[k] * (t - self.breaks[k]) + self.breaks[0]

    def _inverse_1d(self, y):
        y = y - self.breaks[0]
        k = np.clip(np.searchsorted(self._heights, y, side="right") - 1, 0,
                    len(self.breaks) - 1)
        return self.breaks[k] + (y - self._heights[k]) / self.slopes[k]

    def __call__(self, x):
        x = np.atleast_2d(x).copy()
        x[:, 0] = self._forward_1d(x[:, 0])
        return x

    def invert(self, y):
        y = np.atleast_2d(y).copy()
        y[:, 0] = self._inverse_1d(y[:, 0])
        return y

    def volume_factor(self):
        return None


def two_region_stretch(c, start, width, slope, d=1) -> PiecewiseStretch:
    """Slope ``slope`` on [start, start+width] inside [0, c], compensated
    uniformly elsewhere so the endpoints stay fixed (global ratio 1)."""
    if not (0 <= start and start + width <= c and slope > 0):
        raise DomainError("stretch window must sit inside [0, c]")
    rest = c - width
    comp = (c - slope * width) / rest
    if comp <= 0:
        raise DomainError("stretch too strong to compensate")
    breaks, slopes = [0.0], []
    if start > 0:
        slopes.append(comp)
        breaks.append(start)
    slopes.append(slope)
    if start + width < c:
        breaks.append(start + width)
        slopes.append(comp)
    return PiecewiseStretch(breaks, slopes, d=d)


class GridMap:
    """Values sampled on a regular lattice of the domain box, evaluated by
    multilinear interpolation; inverted by damped Newton from the nearest
    sampled image point."""

    kind = "grid"

    def __init__(self, domain, values):
        from scipy.interpolate import RegularGridInterpolator
        self.domain = tuple((float(lo), float(hi)) for lo, hi in domain)
        self.values = np.asarray(values, dtype=float)
        self.d = self.values.ndim - 1
        axes = [np.linspace(lo, hi, self.values.shape[k])
                for k, (lo, hi) in enumerate(self.domain)]
        self._interp = RegularGridInterpolator(axes, self.values)
        grid_pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.d)
        self._grid_pts = grid_pts
        self._grid_img = self.values.reshape(-1, self.d)
        self._tree = cKDTree(self._grid_img)

    def __call__(self, x):
        return self._interp(np.atleast_2d(x))

    def invert(self, y, tol=1e-10, max_iter=60):
        y = np.atleast_2d(y)
        _, idx = self._tree.query(y)
        x = self._grid_pts[idx].astype(float).copy()
        failures = 0
        h = min(hi - lo for lo, hi in self.domain) * 1e-6
        for row in range(len(y)):
            xi = x[row]
            ok = False
            for _ in range(max_iter):
                fx = self._interp(xi[None, :])[0]
                resid = fx - y[row]
                if np.linalg.norm(resid) < tol:
                    ok = True
                    break
                J = np.empty((self.d, self.d))
                for k in range(self.d):
                    step = np.zeros(self.d)
                    step[k] = h
                    hi_pt = np.clip(xi + step, [lo for lo, _ in self.domain],
                                    [hi for _, hi in self.domain])
                    lo_pt = np.clip(xi - step, [lo for lo, _ in self.domain],
                                    [hi for _, hi in self.domain])
                    J[:, k] = (self._interp(hi_pt[None, :])[0]
                               - self._interp(lo_pt[None, :])[0]) / (hi_pt[k] - lo_pt[k])
                try:
                    delta = np.linalg.solve(J, resid)
                except np.linalg.LinAlgError:
                    break
                xi = np.clip(xi - delta, [lo for lo, _ in self.domain],
                             [hi for _, hi in self.domain])
            if not ok:
                failures += 1
            x[row] = xi
        return x, failures

    def volume_factor(self):
        return None


def injectivity_check(h, box, per_axis: int = 12) -> bool:
    """Pairwise-distinct image samples on a regular grid of the box."""
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in box]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(box))
    img = h(pts)
    tree = cKDTree(img)
    dist, _ = tree.query(img, k=2)
    return bool(dist[:, 1].min() > 0.0)


# ---------------------------------------------------------------------------
# the dichotomy
# ---------------------------------------------------------------------------

def _slab_box(c, N, i, d):
    lam = c / N
    return [((i - 1) * lam, i * lam)] + [(0.0, lam)] * (d - 1)


def _grid_points(box, per_axis):
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass
class Statement1Report:
    omega: list
    margins: dict          # slab index -> max residual - threshold
    threshold: float
    holds: bool            # |Omega| >= (1 - eps)(N - 1)
    N: int
    eps: float


def check_statement1(h, c, N, eps, m: Modulus, test_grid: int = 5, d: int = 1,
                     slack: float = 0.0) -> Statement1Report:
    """Grid test of the near-translation inequality on every slab: slab i
    joins Omega iff the residual
    |h(x + (c/N) e1) - h(x) - (h(c e1) - h(0))/N| stays below
    eps * omega(c/N) (+ slack) at every test point."""
    lam = c / N
    threshold = eps * m.eval(lam) + slack
    e1 = np.zeros(d)
    e1[0] = lam
    base = (h(np.full((1, d), 0.0) + _unit(d, c)) - h(np.zeros((1, d)))) / N
    omega, margins = [], {}
    for i in range(1, N):
        pts = _grid_points(_slab_box(c, N, i, d), test_grid)
        resid = np.linalg.norm(h(pts + e1) - h(pts) - base, axis=1)
        worst = float(resid.max())
        margins[i] = worst - threshold
        if worst <= threshold:
            omega.append(i)
    holds = len(omega) >= (1.0 - eps) * (N - 1)
    return Statement1Report(omega=omega, margins=margins, threshold=threshold,
                            holds=holds, N=N, eps=eps)


def _unit(d, c):
    v = np.zeros((1, d))
    v[0, 0] = c
    return v


@dataclass
class Statement2Result:
    z: np.ndarray | None
    local_ratio: float | None
    global_ratio: float
    margin: float | None   # local - (1 + phi) * global
    coarsened: bool = False


def check_statement2(h, c, N, M, phi, d: int = 1,
                     budget: int = 2_000_000) -> Statement2Result:
    """First lattice point z (lexicographic) of the c/(NM)-grid whose local
    stretch beats (1 + phi) times the base-point stretch, or None."""
    step = c / (N * M)
    base = float(np.linalg.norm(h(_unit(d, c)) - h(np.zeros((1, d))))) / c
    counts = [int(N * M)] + [int(M)] * (d - 1)
    total = 1
    for v in counts:
        total *= v
    coarsen = 1
    while total // coarsen ** d > budget:
        coarsen *= 2
    axes = [np.arange(0, counts[k], coarsen) * step for k in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([v.ravel() for v in mesh], axis=-1)
    e1 = np.zeros(d)
    e1[0] = step
    ratios = np.linalg.norm(h(pts + e1) - h(pts), axis=1) / step
    hits = np.nonzero(ratios > (1.0 + phi) * base)[0]
    if len(hits) == 0:
        return Statement2Result(z=None, local_ratio=None, global_ratio=base,
                                margin=None, coarsened=coarsen > 1)
    k = int(hits[0])  # lexicographic order is the iteration order
    return Statement2Result(
        z=pts[k].copy(), local_ratio=float(ratios[k]), global_ratio=base,
        margin=float(ratios[k] - (1.0 + phi) * base), coarsened=coarsen > 1)


# ---------------------------------------------------------------------------
# the iteration
# ---------------------------------------------------------------------------

@dataclass
class B1Step:
    i: int
    c_i: float
    N_i: int
    M_i: int
    statement1: Statement1Report
    z_next: np.ndarray | None


@dataclass
class B1Trace:
    p: int
    branch: int            # 1 when statement 1 stopped the loop
    offsets: list          # z_1 = 0, z_2, ...
    steps: list
    bi_l_omega: float
    modulus_bound_ok: bool # biL_omega(h) <= 1 on the sample grid


def run_algorithm_b1(h, d, m: Modulus, eps, c, max_iters: int = 8,
                     schedule=None, test_grid: int = 5,
                     grid_check: int = 9) -> B1Trace:
    """Iterate the dichotomy: stop with branch 1 when the near-translation
    statement holds, otherwise recentre at the located stretch point, shrink
    to the next level and repeat.

    ``schedule`` is an optional list of (N_i, M_i); by default the honest
    parameter recursion supplies it (desk-feasible for d = 1).
    """
    from .params import param_sequence, phi as phi_of

    if schedule is None:
        trace = param_sequence(d, m, eps, c, max_iters)
        schedule = [(rec.N, rec.M) for rec in trace.levels]
        ph = trace.phi
    else:
        ph = phi_of(d, m, eps)

    # modulus bound check on a sample grid of the initial domain
    box0 = [(0.0, c)] + [(0.0, c / schedule[0][0])] * (d - 1)
    pts = _grid_points(box0, grid_check)
    fm = FiniteMap(pts, h(pts))
    bil = bi_l_omega(fm, m)
    bound_ok = bil <= 1.0 + 1e-9

    offsets = [np.zeros(d)]
    shift = np.zeros(d)
    c_i = float(c)
    steps = []
    for i in range(1, max_iters + 1):
        if i > len(schedule):
            raise ConfigurationError(f"schedule exhausted at iteration {i}")
        N_i, M_i = schedule[i - 1]

        def g(x, _shift=shift.copy()):
            return h(np.atleast_2d(x) + _shift)

        rep1 = check_statement1(g, c_i, N_i, eps, m, test_grid=test_grid, d=d)
        if rep1.holds:
            steps.append(B1Step(i=i, c_i=c_i, N_i=N_i, M_i=M_i,
                                statement1=rep1, z_next=None))
            return B1Trace(p=i, branch=1, offsets=offsets, steps=steps,
                           bi_l_omega=bil, modulus_bound_ok=bound_ok)
        rep2 = check_statement2(g, c_i, N_i, M_i, ph, d=d)
        if rep2.z is None:
            raise ReliabilityError(
                f"iteration {i}: statement 1 failed but no stretch point was "
                "found (margins and grids are inconsistent)")
        steps.append(B1Step(i=i, c_i=c_i, N_i=N_i, M_i=M_i,
                            statement1=rep1, z_next=rep2.z))
        offsets.append(rep2.z)
        shift = shift + rep2.z
        c_i = c_i / (N_i * M_i)
    return B1Trace(p=max_iters, branch=2, offsets=offsets, steps=steps,
                   bi_l_omega=bil, modulus_bound_ok=bound_ok)


# ---------------------------------------------------------------------------
# image volumes
# ---------------------------------------------------------------------------

@dataclass
class VolumeEstimate:
    value: float
    lower: float
    upper: float
    mode: str
    failures: int = 0


def _box_volume(box):
    return float(np.prod([hi - lo for lo, hi in box]))


def image_volume(h, box, mode: str = "auto", budget: int = 200_000,
                 seed: int = 0) -> VolumeEstimate:
    """Volume of h(box).

    auto: exact via the determinant for affine kinds, else monte_carlo.
    grid: cover counting on a raster of the image with a boundary band;
    the bracket [lower, upper] is a Jordan-style bound up to the sampling
    slack folded into the band width.
    monte_carlo: preimage membership test on bounding-box samples with a
    95 percent binomial interval.
    """
    exact = h.volume_factor() if hasattr(h, "volume_factor") else None
    if mode == "auto":
        if exact is not None:
            v = exact * _box_volume(box)
            return VolumeEstimate(value=v, lower=v, upper=v, mode="exact")
        mode = "monte_carlo"
    d = len(box)
    if not injectivity_check(h, box):
        raise DomainError("map is not injective on the sample grid")

    G = max(4, int(round(budget ** (1.0 / d) / 2)))
    grid = _grid_points(box, G)
    img = h(grid)
    img_grid = img.reshape(*([G] * d), d)
    max_step = 0.0
    for ax in range(d):
        diffs = np.diff(img_grid, axis=ax)
        max_step = max(max_step, float(np.linalg.norm(diffs, axis=-1).max()))
    bbox = [(float(img[:, k].min()) - 2 * max_step,
             float(img[:, k].max()) + 2 * max_step) for k in range(d)]

    if mode == "grid":
        res = max(8, int(round(budget ** (1.0 / d))))
        # cells never finer than the image sampling step, else cover gaps
        cell = max(max(hi - lo for lo, hi in bbox) / res, max_step)
        dil = int(math.ceil(max_step / cell)) + 1

        def cells_of(points):
            return {tuple(int(v) for v in row)
                    for row in np.floor((points - [lo for lo, _ in bbox]) / cell).astype(int)}

        cover = cells_of(img)
        bpts = _boundary_points(box, 4 * G)
        band = cells_of(h(bpts))
        band_dil = _dilate(band, dil, d)
        cover_dil = _dilate(cover, dil, d)
        interior = cover - band_dil
        vol_cell = cell ** d
        lower = len(interior) * vol_cell
        upper = len(cover_dil) * vol_cell
        value = len(cover) * vol_cell
        return VolumeEstimate(value=value, lower=lower, upper=upper, mode="grid")

    if mode != "monte_carlo":
        raise ConfigurationError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(seed)
    samples = rng.uniform([lo for lo, _ in bbox], [hi for _, hi in bbox],
                          size=(budget, d))
    failures = 0
    if hasattr(h, "invert"):
        inv = h.invert(samples)
        if isinstance(inv, tuple):
            inv, failures = inv
    else:
        raise ConfigurationError("map exposes no inverse; use grid mode")
    if failures > 0.001 * budget:
        raise ReliabilityError(
            f"local inversion failed on {failures}/{budget} samples")
    inside = np.ones(budget, dtype=bool)
    for k, (lo, hi) in enumerate(box):
        inside &= (inv[:, k] >= lo) & (inv[:, k] <= hi)
    p_hat = inside.mean()
    vb = _box_volume(bbox)
    half = 1.96 * math.sqrt(max(p_hat * (1 - p_hat), 1e-12) / budget)
    return VolumeEstimate(value=p_hat * vb, lower=(p_hat - half) * vb,
                          upper=(p_hat + half) * vb, mode="monte_carlo",
                          failures=failures)


def _boundary_points(box, per_axis):
    d = len(box)
    pts = []
    for k in range(d):
        for side in (0, 1):
            sub = []
            for j, (lo, hi) in enumerate(box):
                if j == k:
                    sub.append(np.array([box[k][side]]))
                else:
                    sub.append(np.linspace(lo, hi, per_axis))
            mesh = np.meshgrid(*sub, indexing="ij")
            pts.append(np.stack([v.ravel() for v in mesh], axis=-1))
    return np.concatenate(pts, axis=0)


def _dilate(cells, k, d):
    if k <= 0:
        return set(cells)
    offsets = np.stack(np.meshgrid(*([np.arange(-k, k + 1)] * d),
                                   indexing="ij"), axis=-1).reshape(-1, d)
    out = set()
    for c in cells:
        for off in offsets:
            out.add(tuple(int(v) for v in (np.array(c) + off)))
    return out


# ---------------------------------------------------------------------------
# adjacent-cube volume bound
# ---------------------------------------------------------------------------

def default_pi_d(d: int) -> float:
    """A valid covering-count constant for the boundary-collar argument."""
    return 2.0 ** d * d ** (d / 2.0)


@dataclass
class VolumeDiffReport:
    lhs: float
    rhs: float
    lhs_error: float
    hypothesis_ok: bool
    passed: bool | None    # None when the hypothesis fails (not a failure)
    slab: int


def volume_diff_check(h, c, N, i, m: Modulus, eps, pi_d: float | None = None,
                      mode: str = "auto", budget: int = 200_000,
                      test_grid: int = 5, d: int = 2,
                      seed: int = 0) -> VolumeDiffReport:
    """Compare |vol h(S_i) - vol h(S_{i+1})| for the e1-adjacent slab cubes
    against the modulus-composition bound with the covering constant pi(d).

    The near-translation hypothesis is checked on S_i only (matching the
    statement); when it fails the result reports hypothesis_ok=False and no
    pass verdict.
    """
    if pi_d is None:
        pi_d = default_pi_d(d)
    lam = c / N
    rep1 = check_statement1(h, c, N, eps, m, test_grid=test_grid, d=d)
    hyp_ok = i in rep1.omega
    S_i = _slab_box(c, N, i, d)
    S_next = _slab_box(c, N, i + 1, d)
    v1 = image_volume(h, S_i, mode=mode, budget=budget, seed=seed)
    v2 = image_volume(h, S_next, mode=mode, budget=budget, seed=seed + 1)
    lhs = abs(v1.value - v2.value)
    lhs_error = (v1.upper - v1.lower) / 2 + (v2.upper - v2.lower) / 2
    rhs = pi_d * math.exp(upsilon_log(d, m, eps, math.log(lam))) * lam ** d
    passed = (lhs <= rhs + lhs_error) if hyp_ok else None
    return VolumeDiffReport(lhs=lhs, rhs=rhs, lhs_error=lhs_error,
                            hypothesis_ok=hyp_ok, passed=passed, slab=i)


# ---------------------------------------------------------------------------
# raster checks: symmetric difference and boundary neighbourhoods
# ---------------------------------------------------------------------------

@dataclass
class SymdiffReport:
    violations: int
    max_excess: float      # worst distance beyond the certified threshold
    sup_distance: float    # sup |f - g| on the sample grid
    threshold: float
    cells_checked: int


def symdiff_bound_check(f, g, grid_res: int = 64,
                        domain=None) -> SymdiffReport:
    """Rasterized check that the image symmetric difference stays inside the
    sup-distance collar of the image boundary.

    Every raster cell met by exactly one of the two images must lie within
    sup|f-g| (+ raster and sampling slack) of the f-boundary raster.
    """
    if domain is None:
        domain = [(0.0, 1.0), (0.0, 1.0)]
    d = len(domain)
    if d != 2:
        raise ConfigurationError("raster checks are two-dimensional")
    if not injectivity_check(f, domain):
        raise DomainError("f is not injective on the sample grid")
    dense = 4 * grid_res
    pts = _grid_points(domain, dense)
    fi, gi = f(pts), g(pts)
    sup_dist = float(np.linalg.norm(fi - gi, axis=1).max())

    all_img = np.vstack([fi, gi])
    lo = all_img.min(axis=0) - 1e-9
    hi = all_img.max(axis=0) + 1e-9
    cell = float((hi - lo).max()) / grid_res

    def cells_of(points):
        return {tuple(map(int, row)) for row in np.floor((points - lo) / cell).astype(int)}

    Rf, Rg = cells_of(fi), cells_of(gi)
    bpts = _boundary_points(domain, 8 * grid_res)
    Rb = cells_of(f(bpts))

    # sampling slack: the raster of a region from point samples is reliable
    # up to the largest image step between neighbouring samples
    fi_grid = fi.reshape(dense, dense, 2)
    step_x = np.linalg.norm(np.diff(fi_grid, axis=0), axis=-1).max()
    step_y = np.linalg.norm(np.diff(fi_grid, axis=1), axis=-1).max()
    slack = float(max(step_x, step_y)) + 2 * cell * math.sqrt(2)
    threshold = sup_dist + slack

    sym = (Rf - Rg) | (Rg - Rf)
    violations = 0
    max_excess = 0.0
    if sym:
        centers = (np.array(sorted(sym)) + 0.5) * cell + lo
        bcenters = (np.array(sorted(Rb)) + 0.5) * cell + lo
        tree = cKDTree(bcenters)
        dist, _ = tree.query(centers)
        excess = dist - threshold
        violations = int((excess > 0).sum())
        max_excess = float(excess.max())
    return SymdiffReport(violations=violations, max_excess=max_excess,
                         sup_distance=sup_dist, threshold=threshold,
                         cells_checked=len(sym))


@dataclass
class BoundaryMeasureRow:
    eps: float
    measure: float
    raster_slack: float


def boundary_neighborhood_measure(f, eps_list, grid_res: int = 256,
                                  domain=None) -> list:
    """Raster measure of the eps-neighbourhood of the image boundary of the
    domain box, one row per eps (descending eps stays monotone).

    The slack column brackets the raster error: it is the measure of the
    cells whose centre distance sits within one cell diagonal of the eps
    threshold.
    """
    if domain is None:
        domain = [(0.0, 1.0), (0.0, 1.0)]
    if len(domain) != 2:
        raise ConfigurationError("raster checks are two-dimensional")
    if not injectivity_check(f, domain):
        raise DomainError("f is not injective on the sample grid")
    bpts = _boundary_points(domain, 16 * grid_res)
    img = f(bpts)
    pad = max(eps_list) * 1.5
    lo = img.min(axis=0) - pad
    hi = img.max(axis=0) + pad
    cell = float((hi - lo).max()) / grid_res
    shape = tuple(int(math.ceil((hi[k] - lo[k]) / cell)) + 1 for k in range(2))
    mask = np.ones(shape, dtype=bool)
    idx = np.floor((img - lo) / cell).astype(int)
    mask[idx[:, 0], idx[:, 1]] = False  # boundary cells are the zero set
    dist = distance_transform_edt(mask, sampling=cell)
    diag = cell * math.sqrt(2)
    rows = []
    for eps in eps_list:
        measure = float((dist <= eps).sum()) * cell * cell
        window = float(((dist <= eps + diag) & (dist > max(eps - diag, 0.0))).sum()) * cell * cell
        rows.append(BoundaryMeasureRow(eps=float(eps), measure=measure,
                                       raster_slack=window))
    return rows
