"""Preset models: the 1D Dirichlet reaction-diffusion equation with a
Cantor-distributed delay, scalar calibration equations, and the scan that
locates the delay coefficient at which stability is lost.

For the reaction-diffusion model the characteristic determinant factors
exactly into scalar per-mode equations lam - lam_k - c * g^(lam) because
the kernel is a scalar multiple of the identity and A is symmetric; the
scan exploits that factorisation, and the factorisation itself is
cross-checked against the full root finder in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import NoResultError, PreconditionError
from .evolution import SpatialOperator, SystemModel, scalar_operator
from .functional import CantorKernel, cantor_transform, single_delay


def dirichlet_lambda1(n: int) -> float:
    """First eigenvalue of the discretised Dirichlet Laplacian on (0, 1)."""
    h = 1.0 / (n + 1)
    return -(4.0 / h**2) * np.sin(np.pi * h / 2.0) ** 2


def laplacian_dirichlet_1d(n: int) -> SpatialOperator:
    """Second-order finite-difference Dirichlet Laplacian on (0, 1).

    Tridiagonal (-2, 1, 1) / h^2 with h = 1/(n+1); the analytic tag
    carries the exact eigenvalues -(4/h^2) sin^2(k pi h / 2).
    """
    if n < 1:
        raise ValueError("need at least one interior grid point")
    h = 1.0 / (n + 1)
    mat = (np.diag(-2.0 * np.ones(n)) + np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1)) / h**2
    k = np.arange(1, n + 1)
    eigs = -(4.0 / h**2) * np.sin(k * np.pi * h / 2.0) ** 2
    return SpatialOperator(mat, kind="laplacian1d", eigenvalues=eigs.astype(complex))


@dataclass
class RDScenario:
    """Reaction-diffusion-with-delay preset: heat flow on (0, 1) with a
    memory source c * integral of the past against the Cantor measure."""

    n: int
    h: float
    c: float
    depth: int
    lambda1: float

    def __post_init__(self):
        if abs(self.h - 1.0 / (self.n + 1)) > 1e-12:
            raise ValueError("mesh width must equal 1/(n+1)")
        if abs(self.lambda1 - dirichlet_lambda1(self.n)) > 1e-10 * (1.0 + abs(self.lambda1)):
            raise ValueError("lambda1 does not match the discretisation formula")

    @classmethod
    def create(cls, n: int, c: float, depth: int = 24) -> "RDScenario":
        return cls(n=n, h=1.0 / (n + 1), c=float(c), depth=depth, lambda1=dirichlet_lambda1(n))

    def model(self) -> SystemModel:
        return SystemModel(laplacian_dirichlet_1d(self.n), CantorKernel(self.c, self.depth), p=2.0)


def reaction_diffusion_scenario(n: int, c: float, depth: int = 24) -> SystemModel:
    """System model of the reaction-diffusion preset."""
    return RDScenario.create(n, c, depth).model()


def scalar_dde(a: float, b: float) -> SystemModel:
    """One-dimensional calibration equation u' = a u(t) + b u(t - 1)."""
    return SystemModel(scalar_operator(a), single_delay(np.array([[float(b)]]), -1.0), p=2.0)


# ---------------------------------------------------------------------------
# Stability threshold scan
# ---------------------------------------------------------------------------


def _real_coupling(kernel: str, depth: int):
    # overflow far down the real axis is capped; the root bracketing below
    # only needs "very large" there, never the exact value
    if kernel == "cantor":

        def coupling_cantor(lam):
            with np.errstate(over="ignore"):
                value = cantor_transform(lam).real
            return value if np.isfinite(value) else 1e300

        return coupling_cantor
    if kernel == "single_delay":

        def coupling_delay(lam):
            with np.errstate(over="ignore"):
                value = np.exp(-lam)
            return value if np.isfinite(value) else 1e300

        return coupling_delay
    raise ValueError(f"unknown scan kernel {kernel!r}; use 'cantor' or 'single_delay'")


def _mode_rightmost_real_root(eig: float, coupling, c: float) -> float:
    """Unique real root of q(lam) = lam - eig - c * coupling(lam), c > 0.

    Both couplings are positive and decreasing on the real axis, so q is
    strictly increasing with q(eig) < 0.  Walking down in unit steps from
    the positive side finds a width-1 bracket without ever evaluating the
    coupling deep in its overflow range.
    """

    def q(lam):
        return lam - eig - c * coupling(lam)

    hi = max(0.0, eig) + 1.0
    for _ in range(200):
        if q(hi) > 0:
            break
        hi += 1.0
    else:
        raise NoResultError("failed to bracket the per-mode real root from above")
    lo = hi - 1.0
    max_steps = int(hi - eig) + 10
    for _ in range(max_steps):
        if q(lo) <= 0:
            break
        hi = lo
        lo -= 1.0
    else:
        raise NoResultError("failed to bracket the per-mode real root from below")
    return float(brentq(q, lo, hi, xtol=1e-13, rtol=1e-14))


def rd_rightmost_root(n: int, c: float, depth: int = 24, kernel: str = "cantor") -> complex:
    """Rightmost characteristic root of the preset at coefficient c > 0.

    Maximises the per-mode real roots of the factored determinant; for
    c > 0 the loss of stability happens through a real root, so the
    rightmost root is real.
    """
    if c <= 0:
        raise PreconditionError("the scan handles positive coefficients only")
    eigs = np.real(laplacian_dirichlet_1d(n).eigenvalues)
    coupling = _real_coupling(kernel, depth)
    root = max(_mode_rightmost_real_root(float(e), coupling, c) for e in eigs)
    return complex(root, 0.0)


def threshold_scan(n: int, depth: int, c_range: tuple[float, float], steps: int = 40, kernel: str = "cantor") -> float:
    """Bisection on the sign of the rightmost-root real part over c.

    ``c_range`` must bracket the crossing (stable at the lower end,
    unstable at the upper end); raises NoResultError otherwise.  Returns
    the crossing coefficient after ``steps`` bisection iterations.
    """
    c_lo, c_hi = c_range
    if not (0.0 < c_lo < c_hi):
        raise PreconditionError(f"need 0 < c_lo < c_hi, got {c_range}")
    sign_lo = rd_rightmost_root(n, c_lo, depth, kernel).real
    sign_hi = rd_rightmost_root(n, c_hi, depth, kernel).real
    if not (sign_lo < 0.0 < sign_hi):
        raise NoResultError(
            f"no sign change of the rightmost root over c in [{c_lo}, {c_hi}] "
            f"(endpoint real parts {sign_lo:.3e}, {sign_hi:.3e})"
        )
    for _ in range(steps):
        c_mid = 0.5 * (c_lo + c_hi)
        if rd_rightmost_root(n, c_mid, depth, kernel).real > 0.0:
            c_hi = c_mid
        else:
            c_lo = c_mid
    return 0.5 * (c_lo + c_hi)
