"""Frequency-domain analysis of the delay equation.

Covers the characteristic matrix lam - A - Phi(e^(lam .)), root location
by grid-seeded Newton iteration on its determinant (audited by an
argument-principle count), the explicit resolvent of the block delay
operator, the integral smallness estimate for the perturbation, and the
frequency-domain stability certificate that compares the delay term's
norm along a vertical line with the reciprocal resolvent norm of A.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import BudgetError, NearSpectrumError, PreconditionError
from .evolution import SystemModel, Trajectory, solve_steps
from .functional import (
    CantorKernel,
    DensityKernel,
    DiscreteDelays,
    apply,
    cantor_transform_grid,
    char_norm_profile,
    total_variation,
)
from .history import DelayState, HistoryGrid, history_injection, lp_norm, nilpotent_shift, segment, state_norm

logger = logging.getLogger(__name__)


@dataclass
class FrequencyGrid:
    """Uniform samples of [-omega_max, omega_max]; count is odd so that
    omega = 0 is always included."""

    omega_max: float = 200.0
    count: int = 4001

    def __post_init__(self):
        if self.omega_max <= 0:
            raise ValueError("omega_max must be positive")
        if self.count < 1 or self.count % 2 == 0:
            raise ValueError("count must be a positive odd integer")

    @property
    def samples(self) -> np.ndarray:
        return np.linspace(-self.omega_max, self.omega_max, self.count)


@dataclass
class Region:
    """Search rectangle [re_min, re_max] x [-im_max, im_max]."""

    re_min: float
    re_max: float
    im_max: float

    def __post_init__(self):
        if not (self.re_min < self.re_max):
            raise ValueError("need re_min < re_max")
        if self.im_max <= 0:
            raise ValueError("im_max must be positive")

    def contains(self, lam: complex, margin: float = 1e-8) -> bool:
        return (
            self.re_min - margin <= lam.real <= self.re_max + margin
            and abs(lam.imag) <= self.im_max + margin
        )


@dataclass
class RootConfig:
    """Knobs for the grid-seeded Newton search."""

    spacing: float = 0.05
    root_tol: float = 1e-9
    merge_tol: float = 1e-6
    newton_max_iter: int = 50
    budget: int = 400_000


@dataclass
class RootReport:
    """Characteristic roots found in a region.

    ``residuals`` are Newton residuals |det| / |det'| at each root (the
    determinant normalised by its local gradient, a distance-like
    quantity); every listed root satisfies residual <= root_tol and
    ``rightmost`` maximises the real part.
    """

    roots: list[complex]
    residuals: list[float]
    region: Region
    rightmost: complex | None

    def to_dict(self) -> dict:
        return {
            "roots": [[z.real, z.imag] for z in self.roots],
            "residuals": list(self.residuals),
            "region": {"re_min": self.region.re_min, "re_max": self.region.re_max, "im_max": self.region.im_max},
            "rightmost": None if self.rightmost is None else [self.rightmost.real, self.rightmost.imag],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RootReport":
        region = Region(**d["region"])
        roots = [complex(re, im) for re, im in d["roots"]]
        rightmost = None if d["rightmost"] is None else complex(d["rightmost"][0], d["rightmost"][1])
        return cls(roots, list(d["residuals"]), region, rightmost)


@dataclass
class StabilityReport:
    """Outcome of the frequency-domain stability certificate at Re = alpha.

    ``lhs`` is the grid supremum of the delay term's characteristic norm,
    ``rhs`` the reciprocal of the grid supremum of ||R(alpha + i omega, A)||;
    the certificate holds when lhs < rhs.  ``s0_estimate`` is the real part
    of the rightmost characteristic root found near the line and
    ``omega0_estimate`` a decay-rate fit from a trajectory; ``a_normal``
    records whether A was numerically normal (for non-normal A the
    eigenvalue-based line check is only a surrogate).
    """

    alpha: float
    lhs: float
    rhs: float
    criterion_holds: bool
    s0_estimate: float | None
    omega0_estimate: float | None
    p: float
    lhs_analytic_bound: float
    a_normal: bool

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "criterion_holds": self.criterion_holds,
            "s0_estimate": self.s0_estimate,
            "omega0_estimate": self.omega0_estimate,
            "p": self.p,
            "lhs_analytic_bound": self.lhs_analytic_bound,
            "a_normal": self.a_normal,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StabilityReport":
        return cls(**d)


# ---------------------------------------------------------------------------
# Characteristic operator
# ---------------------------------------------------------------------------


def char_apply(model: SystemModel, lam: complex, x: np.ndarray) -> np.ndarray:
    """(lam - A - char_matrix(lam)) x."""
    x = np.atleast_1d(np.asarray(x))
    if x.shape[0] != model.n:
        raise ValueError("vector dimension does not match the model")
    return lam * x - model.A.matrix @ x - model.char_matrix(lam) @ x


def _char_matrix_stack(model: SystemModel, lams: np.ndarray) -> np.ndarray:
    """Stack of lam - A - char_matrix(lam) over a flat array of lam."""
    lams = np.asarray(lams, dtype=complex).ravel()
    n = model.n
    eye = np.eye(n, dtype=complex)
    base = lams[:, None, None] * eye - model.A.matrix
    phi = model.phi
    if isinstance(phi, CantorKernel):
        base -= (phi.c * cantor_transform_grid(lams))[:, None, None] * eye
    elif isinstance(phi, DiscreteDelays):
        if phi.dim is not None:
            base -= np.einsum("wk,kij->wij", np.exp(np.outer(lams, phi.delays)), phi.matrices.astype(complex))
    elif isinstance(phi, DensityKernel):
        w = np.full(phi.m + 1, 1.0 / phi.m)
        w[0] *= 0.5
        w[-1] *= 0.5
        base -= np.einsum("wl,lij->wij", np.exp(np.outer(lams, phi.nodes)) * w, phi.samples.astype(complex))
    else:
        raise TypeError(f"unknown functional variant: {type(phi).__name__}")
    return base


def char_det(model: SystemModel, lam: complex) -> complex:
    """Determinant of the characteristic matrix at lam (complex LU)."""
    return complex(np.linalg.det(_char_matrix_stack(model, np.array([lam]))[0]))


def _char_dets(model: SystemModel, lams: np.ndarray, chunk: int | None = None) -> np.ndarray:
    lams = np.asarray(lams, dtype=complex).ravel()
    if chunk is None:
        # keep each stacked-matrix batch around 60 MB
        chunk = max(256, 4_000_000 // (model.n * model.n))
    out = np.empty(lams.shape, dtype=complex)
    for start in range(0, len(lams), chunk):
        sl = slice(start, start + chunk)
        out[sl] = np.linalg.det(_char_matrix_stack(model, lams[sl]))
    return out


# ---------------------------------------------------------------------------
# Root search
# ---------------------------------------------------------------------------


def _worse(value: complex, reference: complex) -> bool:
    # non-finite determinant values (overflow far from the region) count
    # as a failed step and get damped away
    return (
        not np.isfinite(value.real)
        or not np.isfinite(value.imag)
        or abs(value) > abs(reference)
    )


def _newton_polish(model: SystemModel, seed: complex, cfg: RootConfig) -> tuple[complex, float] | None:
    """Damped Newton on the characteristic determinant with a
    central-difference derivative; returns (root, normalised residual)."""
    with np.errstate(over="ignore", invalid="ignore"):
        return _newton_loop(model, complex(seed), cfg)


def _newton_loop(model: SystemModel, lam: complex, cfg: RootConfig) -> tuple[complex, float] | None:
    f = char_det(model, lam)
    for _ in range(cfg.newton_max_iter):
        h = 1e-6 * (1.0 + abs(lam))
        fp = (char_det(model, lam + h) - char_det(model, lam - h)) / (2.0 * h)
        if fp == 0 or not np.isfinite(fp.real) or not np.isfinite(fp.imag):
            return None
        step = f / fp
        lam_new = lam - step
        f_new = char_det(model, lam_new)
        halvings = 0
        while _worse(f_new, f) and halvings < 8:
            step *= 0.5
            lam_new = lam - step
            f_new = char_det(model, lam_new)
            halvings += 1
        if _worse(f_new, f):
            return None
        lam, f = lam_new, f_new
        if abs(step) <= 1e-13 * (1.0 + abs(lam)):
            break
    h = 1e-6 * (1.0 + abs(lam))
    fp = (char_det(model, lam + h) - char_det(model, lam - h)) / (2.0 * h)
    denom = max(abs(fp), 1e-300)
    return lam, abs(f) / denom


def find_roots(model: SystemModel, region: Region, cfg: RootConfig | None = None) -> RootReport:
    """Characteristic roots inside a rectangle.

    Scans |det| on a coarse grid, polishes every local minimum by damped
    Newton, discards iterates that leave the rectangle or fail the
    residual tolerance, and merges duplicates within ``merge_tol``.
    Roots are sorted by descending real part.
    """
    cfg = cfg or RootConfig()
    re_count = max(4, int(np.ceil((region.re_max - region.re_min) / cfg.spacing)) + 1)
    im_count = max(4, int(np.ceil(2.0 * region.im_max / cfg.spacing)) + 1)
    if re_count * im_count > cfg.budget:
        raise BudgetError(
            f"root search grid {re_count} x {im_count} exceeds budget {cfg.budget}; "
            "enlarge cfg.budget or coarsen cfg.spacing"
        )
    res = np.linspace(region.re_min, region.re_max, re_count)
    ims = np.linspace(-region.im_max, region.im_max, im_count)
    lams = res[:, None] + 1j * ims[None, :]
    with np.errstate(over="ignore", invalid="ignore"):
        absdet = np.abs(_char_dets(model, lams)).reshape(re_count, im_count)
    absdet[~np.isfinite(absdet)] = np.inf

    padded = np.full((re_count + 2, im_count + 2), np.inf)
    padded[1:-1, 1:-1] = absdet
    center = padded[1:-1, 1:-1]
    is_min = np.ones_like(center, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            is_min &= center <= padded[1 + di : 1 + di + re_count, 1 + dj : 1 + dj + im_count]
    seeds = lams[is_min]

    candidates: list[tuple[complex, float]] = []
    for seed in seeds:
        polished = _newton_polish(model, seed, cfg)
        if polished is None:
            logger.debug("Newton iteration failed at seed %s; seed dropped", seed)
            continue
        root, residual = polished
        if residual > cfg.root_tol:
            logger.debug("seed %s did not converge (residual %.3e); dropped", seed, residual)
            continue
        if region.contains(root):
            candidates.append((root, residual))

    candidates.sort(key=lambda pair: pair[1])
    roots: list[complex] = []
    residuals: list[float] = []
    for root, residual in candidates:
        if any(abs(root - kept) <= cfg.merge_tol for kept in roots):
            continue
        roots.append(root)
        residuals.append(residual)

    order = sorted(range(len(roots)), key=lambda i: (-roots[i].real, roots[i].imag))
    roots = [roots[i] for i in order]
    residuals = [residuals[i] for i in order]
    rightmost = roots[0] if roots else None
    return RootReport(roots, residuals, region, rightmost)


def count_roots_argument_principle(model: SystemModel, region: Region, samples_per_edge: int = 2000) -> int:
    """Number of characteristic roots inside the rectangle, counted with
    multiplicity by the winding of det along the boundary (trapezoid
    quadrature of det'/det); an oracle independent of the Newton search."""
    corners = [
        complex(region.re_min, -region.im_max),
        complex(region.re_max, -region.im_max),
        complex(region.re_max, region.im_max),
        complex(region.re_min, region.im_max),
    ]
    total = 0.0 + 0.0j
    for a, b in zip(corners, corners[1:] + corners[:1]):
        ts = np.linspace(0.0, 1.0, samples_per_edge + 1)
        zs = a + (b - a) * ts
        h = 1e-7 * (1.0 + np.abs(zs))
        f = _char_dets(model, zs)
        fp = (_char_dets(model, zs + h) - _char_dets(model, zs - h)) / (2.0 * h)
        integrand = fp / f
        dz = (b - a) / samples_per_edge
        total += dz * (0.5 * (integrand[0] + integrand[-1]) + integrand[1:-1].sum())
    return int(np.rint((total / (2j * np.pi)).real))


# ---------------------------------------------------------------------------
# Resolvent of the block operator
# ---------------------------------------------------------------------------


def _composite_weights(intervals: int, h: float) -> np.ndarray:
    """Fourth-order quadrature weights for intervals+1 uniform nodes
    (Simpson family with a 3/8 block on odd counts; plain trapezoid on a
    single interval, whose contribution is O(h) anyway)."""
    w = np.zeros(intervals + 1)
    if intervals == 0:
        return w
    if intervals == 1:
        w[:] = 0.5 * h
        return w
    if intervals == 2:
        w[:] = h * np.array([1.0, 4.0, 1.0]) / 3.0
        return w
    if intervals == 3:
        w[:] = h * np.array([1.0, 3.0, 3.0, 1.0]) * 3.0 / 8.0
        return w
    if intervals % 2 == 0:
        w[0] = w[-1] = h / 3.0
        w[1:-1:2] = 4.0 * h / 3.0
        w[2:-1:2] = 2.0 * h / 3.0
        return w
    head = _composite_weights(intervals - 3, h)
    w[: intervals - 2] += head
    w[intervals - 3 :] += h * np.array([1.0, 3.0, 3.0, 1.0]) * 3.0 / 8.0
    return w


# Integral of the cubic through four uniform nodes over one of its
# intervals, as node weights times h: first interval, either middle
# interval, last interval.
_CUBIC_FIRST = np.array([9.0, 19.0, -5.0, 1.0]) / 24.0
_CUBIC_MID = np.array([-1.0, 13.0, 13.0, -1.0]) / 24.0
_CUBIC_LAST = np.array([1.0, -5.0, 19.0, 9.0]) / 24.0


def shift_resolvent_history(lam: complex, g: HistoryGrid) -> np.ndarray:
    """Resolvent of the nilpotent shift generator applied to g.

    Returns the samples of sigma -> integral_sigma^0 e^(lam (sigma - tau))
    g(tau) d tau, accumulated right to left through Q_l = I_l +
    e^(-lam h) Q_{l+1} with fourth-order one-interval integrals (cubic
    stencils), so the quadrature error stays smooth across nodes and
    finite differencing the result does not amplify it.
    """
    m = g.m
    h = 1.0 / m
    sigma = g.nodes
    factor = np.exp(-lam * sigma)[:, None] * g.samples.astype(complex)
    out = np.zeros((m + 1, g.n), dtype=complex)
    if m < 4:
        for l in range(m + 1):
            w = _composite_weights(m - l, h)
            out[l] = np.exp(lam * sigma[l]) * (w @ factor[l:])
        return out
    # J_l = integral of e^(-lam tau) g over [sigma_l, sigma_{l+1}]
    j_local = np.empty((m, g.n), dtype=complex)
    j_local[0] = h * (_CUBIC_FIRST @ factor[0:4])
    for l in range(1, m - 1):
        j_local[l] = h * (_CUBIC_MID @ factor[l - 1 : l + 3])
    j_local[m - 1] = h * (_CUBIC_LAST @ factor[m - 3 : m + 1])
    decay = np.exp(-lam * h)
    acc = np.zeros(g.n, dtype=complex)
    for l in range(m - 1, -1, -1):
        acc = np.exp(lam * sigma[l]) * j_local[l] + decay * acc
        out[l] = acc
    return out


def _grid_char_matrix(model: SystemModel, lam: complex, m: int) -> np.ndarray:
    """Characteristic matrix evaluated through the grid functional.

    Columns are Phi applied to the sampled exponential profile times each
    basis vector, so it is consistent to machine precision with ``apply``
    on the same grid (the analytic ``char_matrix`` differs by the O(1/m^2)
    interpolation error of the profile).
    """
    sigma = -1.0 + np.arange(m + 1) / m
    eps = np.exp(lam * sigma)
    n = model.n
    out = np.empty((n, n), dtype=complex)
    for i in range(n):
        col = np.zeros((m + 1, n), dtype=complex)
        col[:, i] = eps
        out[:, i] = apply(model.phi, HistoryGrid(col, model.p))
    return out


def resolvent_apply(
    model: SystemModel,
    lam: complex,
    y: np.ndarray,
    g: HistoryGrid,
    cond_limit: float = 1e12,
) -> DelayState:
    """Solve (lam - block operator)(x, f) = (y, g) on the grid.

    First forms q = R(lam, A_0) g on the history grid, then solves the
    head equation (lam - A - char)(x) = y + Phi(q) with the
    grid-consistent characteristic matrix, and finally assembles
    f = e^(lam .) x + q.  Raises NearSpectrumError when the head matrix
    has condition number above ``cond_limit``.
    """
    y = np.atleast_1d(np.asarray(y, dtype=complex))
    if y.shape[0] != model.n or g.n != model.n:
        raise ValueError("right-hand side dimensions do not match the model")
    q = shift_resolvent_history(lam, g)
    head_matrix = lam * np.eye(model.n) - model.A.matrix - _grid_char_matrix(model, lam, g.m)
    svals = np.linalg.svd(head_matrix, compute_uv=False)
    # scale floor keeps the estimate meaningful for 1 x 1 systems, where
    # the plain condition number is identically 1
    sigma_min = float(svals[-1])
    cond = np.inf if sigma_min == 0.0 else max(1.0, float(svals[0])) / sigma_min
    if not np.isfinite(cond) or cond > cond_limit:
        raise NearSpectrumError(
            f"characteristic matrix at lambda = {lam:.6g} has condition estimate {cond:.3e}; "
            "lambda near spectrum"
        )
    x = np.linalg.solve(head_matrix, y + apply(model.phi, HistoryGrid(q, g.p)))
    sigma = g.nodes
    f = np.exp(lam * sigma)[:, None] * x + q
    return DelayState(x, HistoryGrid(f, g.p))


def _fd4(samples: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order finite-difference derivative on a uniform grid."""
    if len(samples) < 5:
        raise ValueError("need at least 5 nodes for the 4th-order stencil")
    f = samples
    d = np.empty_like(f)
    d[2:-2] = (-f[4:] + 8.0 * f[3:-1] - 8.0 * f[1:-3] + f[:-4]) / (12.0 * h)
    d[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * h)
    d[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / (12.0 * h)
    d[-1] = (25.0 * f[-1] - 48.0 * f[-2] + 36.0 * f[-3] - 16.0 * f[-4] + 3.0 * f[-5]) / (12.0 * h)
    d[-2] = (3.0 * f[-1] + 10.0 * f[-2] - 18.0 * f[-3] + 6.0 * f[-4] - f[-5]) / (12.0 * h)
    return d


def resolvent_defect(model: SystemModel, lam: complex, y: np.ndarray, g: HistoryGrid, state: DelayState) -> float:
    """Forward-application defect of a resolvent solution.

    Applies the discretised block operator to (x, f) (head row A x +
    Phi(f); history row d/d sigma by fourth-order finite differences) and
    returns the product norm of (lam - operator)(x, f) - (y, g).  The
    head component vanishes to machine precision by construction; the
    history component carries the grid differentiation and quadrature
    error.
    """
    y = np.atleast_1d(np.asarray(y, dtype=complex))
    x = state.head
    f = state.history
    head = lam * x - model.A.matrix @ x - apply(model.phi, f) - y
    deriv = _fd4(f.samples, 1.0 / f.m)
    hist = lam * f.samples - deriv - g.samples
    return float(np.linalg.norm(head)) + lp_norm(HistoryGrid(hist, f.p))

# ---------------------------------------------------------------------------
# Stability certificate
# ---------------------------------------------------------------------------


class CriterionProfile(NamedTuple):
    """Per-frequency data behind the stability certificate."""

    omegas: np.ndarray
    char_norms: np.ndarray
    resolvent_norms: np.ndarray
    lhs: float
    lhs_analytic_bound: float
    rhs: float
    holds: bool


def _line_clearance(model: SystemModel, alpha: float) -> float:
    eigs = model.A.spectrum()
    return float(np.min(np.abs(eigs.real - alpha)))


def criterion_profile(model: SystemModel, alpha: float, grid: FrequencyGrid) -> CriterionProfile:
    """Evaluate both sides of the certificate along Re = alpha.

    lhs is the grid maximum of the characteristic norm of the delay term;
    rhs is the reciprocal of the grid maximum of ||R(alpha + i omega, A)||,
    computed from the smallest singular value of (alpha + i omega - A).
    Requires alpha <= 0 and the line to stay clear of the spectrum of A.
    """
    if alpha > 0:
        raise PreconditionError("the certificate line must satisfy alpha <= 0")
    if _line_clearance(model, alpha) < 1e-9:
        raise PreconditionError(f"the line Re = {alpha} intersects the spectrum of A")
    omegas = grid.samples
    char_norms = char_norm_profile(model.phi, alpha, omegas, dim=model.n)
    lams = alpha + 1j * omegas
    eye = np.eye(model.n)
    min_sv = np.empty(len(lams))
    chunk = max(256, 4_000_000 // (model.n * model.n))
    for start in range(0, len(lams), chunk):
        sl = slice(start, start + chunk)
        shifted = lams[sl, None, None] * eye - model.A.matrix
        min_sv[sl] = np.linalg.svd(shifted, compute_uv=False)[:, -1]
    resolvent_norms = 1.0 / min_sv
    lhs = float(char_norms.max())
    rhs = float(min_sv.min())
    bound = float(np.exp(-min(alpha, 0.0)) * total_variation(model.phi))
    return CriterionProfile(omegas, char_norms, resolvent_norms, lhs, bound, rhs, bool(lhs < rhs))


def random_compatible_state(n: int, m: int, p: float, rng: np.random.Generator) -> DelayState:
    """Unit-product-norm state with a Gaussian head and a random cubic
    polynomial history shifted so that f(0) = x holds exactly."""
    x = rng.standard_normal(n)
    coeffs = rng.standard_normal((4, n))
    sigma = -1.0 + np.arange(m + 1) / m
    powers = sigma[:, None] ** np.arange(4)[None, :]
    samples = powers @ coeffs
    samples += x - samples[-1]
    state = DelayState(x, HistoryGrid(samples, p))
    scale = state_norm(state)
    return DelayState(x / scale, HistoryGrid(samples / scale, p))


def stability_criterion(
    model: SystemModel,
    alpha: float,
    grid: FrequencyGrid | None = None,
    *,
    seed: int = 42,
    horizon: float = 20.0,
    state_m: int = 100,
    dt: float | None = None,
    s0_region: Region | None = None,
    s0_cfg: RootConfig | None = None,
) -> StabilityReport:
    """Full stability report along the line Re = alpha.

    Besides the certificate itself the report estimates the rightmost
    characteristic root near the line (grid-seeded Newton in a rectangle
    around alpha) and the trajectory decay rate of a random compatible
    state fitted on [2, horizon]; on Hilbert-type models (p = 2) the two
    estimates agree up to fitting error.
    """
    grid = grid or FrequencyGrid()
    profile = criterion_profile(model, alpha, grid)
    eigs = model.A.spectrum()
    if s0_region is None:
        re_min = max(alpha - 12.0, float(eigs.real.min()) - 1.0)
        if re_min >= alpha + 5.0:
            re_min = alpha - 12.0
        s0_region = Region(re_min, alpha + 5.0, min(grid.omega_max, 20.0))
    if s0_cfg is None:
        s0_cfg = RootConfig(spacing=0.1)
    report_roots = find_roots(model, s0_region, s0_cfg)
    s0 = None if report_roots.rightmost is None else float(report_roots.rightmost.real)

    rng = np.random.default_rng(seed)
    state = random_compatible_state(model.n, state_m, model.p, rng)
    traj = solve_steps(model, state, horizon, dt)
    omega0 = decay_rate(traj, (2.0, horizon))

    a_mat = model.A.matrix
    commutator = a_mat @ a_mat.T - a_mat.T @ a_mat
    a_normal = bool(np.linalg.norm(commutator) <= 1e-8 * (1.0 + np.linalg.norm(a_mat) ** 2))

    return StabilityReport(
        alpha=float(alpha),
        lhs=profile.lhs,
        rhs=profile.rhs,
        criterion_holds=profile.holds,
        s0_estimate=s0,
        omega0_estimate=omega0,
        p=model.p,
        lhs_analytic_bound=profile.lhs_analytic_bound,
        a_normal=a_normal,
    )


def perturbed_resolvent_bound_check(model: SystemModel, lam: complex, delta: float) -> bool:
    """Check ||R(lam, A + D)|| <= (1/delta) ||R(lam, A)|| for the
    characteristic perturbation D = char_matrix(lam).

    Preconditions (lam in the resolvent set of A and ||D|| <= (1 - delta)
    / ||R(lam, A)||) are reported as PreconditionError, distinct from the
    inequality itself failing (return False).
    """
    if not (0.0 < delta < 1.0):
        raise PreconditionError("delta must lie in (0, 1)")
    min_sv = model.A.min_singular(lam)
    if min_sv <= 1e-14:
        raise PreconditionError(f"lambda = {lam} is not in the resolvent set of A")
    resolvent_norm = 1.0 / min_sv
    disturbance = model.char_matrix(lam)
    dist_norm = float(np.linalg.norm(disturbance, 2))
    if dist_norm > (1.0 - delta) * min_sv * (1.0 + 1e-12):
        raise PreconditionError(
            f"perturbation norm {dist_norm:.3e} exceeds (1 - delta)/||R|| = {(1.0 - delta) * min_sv:.3e}"
        )
    shifted = lam * np.eye(model.n) - model.A.matrix - disturbance
    perturbed_norm = 1.0 / float(np.linalg.svd(shifted, compute_uv=False)[-1])
    return perturbed_norm <= resolvent_norm / delta


# ---------------------------------------------------------------------------
# Integral smallness of the perturbation
# ---------------------------------------------------------------------------


def miyadera_estimate(
    model: SystemModel,
    t0: float,
    samples: int = 200,
    *,
    seed: int = 42,
    r_nodes: int = 65,
    state_m: int = 64,
) -> tuple[float, float]:
    """Empirical and analytic smallness constants of the delay term.

    q_emp is the maximum over random unit-product-norm compatible states
    of the trapezoid quadrature of r -> ||Phi(S_r x + T_0(r) f)|| over
    [0, t0]; q_bound = t0^(1/p') M |eta| with M the sampled supremum of
    ||exp(r A)|| over [0, 1] (1000 nodes) and p' the conjugate exponent.
    The bound dominates the sample for every admissible state.
    """
    if not (0.0 < t0 < 1.0):
        raise PreconditionError("t0 must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    rs = np.linspace(0.0, t0, r_nodes)
    w = np.full(r_nodes, rs[1] - rs[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    q_emp = 0.0
    for _ in range(samples):
        state = random_compatible_state(model.n, state_m, model.p, rng)
        vals = np.empty(r_nodes)
        for i, r in enumerate(rs):
            moved = history_injection(r, state.head, model.A, m=state_m, p=model.p) + nilpotent_shift(
                r, state.history
            )
            vals[i] = np.linalg.norm(apply(model.phi, moved))
        q_emp = max(q_emp, float(w @ vals))

    grid_r = np.linspace(0.0, 1.0, 1000)
    sup_norm = 0.0
    for r in grid_r:
        sup_norm = max(sup_norm, float(np.linalg.norm(model.A.expm(r), 2)))
    conj_exponent = 1.0 - 1.0 / model.p  # = 1/p'
    q_bound = t0**conj_exponent * sup_norm * total_variation(model.phi)
    return q_emp, q_bound


# ---------------------------------------------------------------------------
# Growth-rate estimation
# ---------------------------------------------------------------------------


def decay_rate(traj: Trajectory, window: tuple[float, float], max_points: int = 201) -> float:
    """Least-squares slope of log ||(u(t), u_t)|| over the window.

    The product state norm is sampled at up to ``max_points`` grid times
    inside the window; an identically zero window is rejected.
    """
    t_lo, t_hi = window
    if t_lo < 0 or t_hi <= t_lo or t_hi > traj.t_end + 1e-9:
        raise PreconditionError(f"window {window} not inside trajectory coverage [0, {traj.t_end:.6g}]")
    times = traj.times
    mask = (times >= t_lo - 1e-12) & (times <= t_hi + 1e-12)
    idx = np.nonzero(mask)[0]
    if len(idx) > max_points:
        idx = idx[np.linspace(0, len(idx) - 1, max_points).astype(int)]
    ts = times[idx]
    norms = np.array(
        [state_norm(DelayState(traj.values[i], segment(traj, times[i]))) for i in idx]
    )
    if np.max(norms) == 0.0:
        raise PreconditionError("trajectory vanishes on the whole window")
    keep = norms > 0
    if keep.sum() < 2:
        raise PreconditionError("not enough nonzero samples in the window")
    slope = np.polyfit(ts[keep], np.log(norms[keep]), 1)[0]
    return float(slope)
