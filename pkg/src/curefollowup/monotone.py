"""Grenander-type estimation of a nonincreasing density from a Kaplan-Meier curve.

The pipeline is: least concave majorant of the KME on ``[a, y_max]`` ->
its left derivative (a nonincreasing step density) -> kernel smoothing with a
boundary-corrected tri-weight kernel. Because the step density is piecewise
constant and the kernel is polynomial, the smoothing integral is evaluated in
closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import _numeric
from ._validation import check_survival_arrays
from .exceptions import ConfigError, DegenerateDomain, DomainError, SingularBoundarySystem
from .survival import StepDistribution, km_censoring, km_event

#: Undersmoothing exponent for the test statistic bandwidth.
STAT_BANDWIDTH_EXPONENT = -7.0 / 30.0
#: Exponent for the bandwidth of the density that drives the bootstrap.
BOOT_BANDWIDTH_EXPONENT = -1.0 / 9.0
BANDWIDTH_CAP = 0.5


@dataclass(frozen=True)
class ConcaveMajorant:
    knots: np.ndarray
    knot_values: np.ndarray

    def __call__(self, t):
        return np.interp(t, self.knots, self.knot_values)


@dataclass(frozen=True)
class GrenanderDensity:
    """Nonincreasing step density; ``slopes[j]`` holds on ``(breakpoints[j], breakpoints[j+1]]``."""

    breakpoints: np.ndarray
    slopes: np.ndarray

    @property
    def a(self):
        return float(self.breakpoints[0])

    @property
    def y_max(self):
        return float(self.breakpoints[-1])

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        idx = np.searchsorted(self.breakpoints, t, side="left") - 1
        idx = np.clip(idx, 0, self.slopes.shape[0] - 1)
        out = np.where((t < self.a) | (t > self.y_max), 0.0, self.slopes[idx])
        return out.item() if out.ndim == 0 else out

    def mass(self):
        return float(np.sum(self.slopes * np.diff(self.breakpoints)))


@dataclass(frozen=True)
class Bandwidths:
    b_x: float
    b0_x: float


def bandwidth_factor(n_x, exponent):
    return min(float(n_x) ** exponent, BANDWIDTH_CAP)


def bandwidths(n_x, y_max, a_x=0.0) -> Bandwidths:
    """Fixed-rate bandwidths y_max * min(n^e, 0.5), capped at half the domain."""
    half = 0.5 * (y_max - a_x)
    return Bandwidths(
        b_x=min(y_max * bandwidth_factor(n_x, STAT_BANDWIDTH_EXPONENT), half),
        b0_x=min(y_max * bandwidth_factor(n_x, BOOT_BANDWIDTH_EXPONENT), half),
    )


def lcm(points) -> ConcaveMajorant:
    """Least concave majorant (upper hull) of points with strictly increasing abscissae."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
        raise DegenerateDomain("need at least two points to build a majorant")
    x, y = pts[:, 0].copy(), pts[:, 1].copy()
    if np.any(np.diff(x) <= 0):
        raise DegenerateDomain("abscissae must be strictly increasing")
    idx = _numeric.upper_hull(x, y)
    return ConcaveMajorant(x[idx], y[idx])


def majorant_of(F: StepDistribution, a_x, y_max) -> ConcaveMajorant:
    """LCM of a KME on [a_x, y_max], anchored at its jump tops and both endpoints."""
    if not y_max > a_x:
        raise DegenerateDomain(f"empty interval [{a_x}, {y_max}]")
    px, py = _numeric.majorant_points(F.jump_times, F.values, float(a_x), float(y_max))
    return lcm(np.column_stack([px, py]))


def grenander(majorant: ConcaveMajorant) -> GrenanderDensity:
    slopes = np.diff(majorant.knot_values) / np.diff(majorant.knots)
    return GrenanderDensity(majorant.knots.copy(), slopes)


def kernel_partial_moments(s):
    """Partial moments int_{-1}^s v^j k(v) dv, j = 0, 1, 2, of the tri-weight kernel."""
    if not -1.0 <= s <= 1.0:
        raise DomainError(f"s must lie in [-1, 1], got {s}")
    return _numeric.tw_m0(s), _numeric.tw_m1(s), _numeric.tw_m2(s)


def boundary_coeffs(s):
    """Solve phi*m0 + psi*m1 = 1, phi*m1 + psi*m2 = 0 for the boundary kernel."""
    m0, m1, m2 = kernel_partial_moments(s)
    det = m0 * m2 - m1 * m1
    if abs(det) < 1e-14:
        raise SingularBoundarySystem(f"moment system singular at s={s}")
    return m2 / det, -m1 / det


def triweight(v):
    v = np.asarray(v, dtype=np.float64)
    return np.where(np.abs(v) <= 1, 35.0 / 32.0 * (1 - v * v) ** 3, 0.0)


def boundary_kernel(v, t, b, a_x, y_max):
    """Kernel k^B_{b,t}(v) used at location t (for plotting and quadrature checks)."""
    v = np.asarray(v, dtype=np.float64)
    if t - a_x < b and t - a_x <= y_max - t:
        phi, psi = boundary_coeffs((t - a_x) / b)
        return phi * triweight(v) + psi * v * triweight(v)
    if y_max - t < b:
        phi, psi = boundary_coeffs((y_max - t) / b)
        return phi * triweight(v) - psi * v * triweight(v)
    return triweight(v)


def _check_bandwidth(b, a_x, y_max):
    if not b > 0:
        raise ConfigError(f"bandwidth must be positive, got {b}")
    if b > 0.5 * (y_max - a_x) * (1 + 1e-12):
        raise ConfigError("bandwidth exceeds half of the estimation interval")


def smoothed_grenander_at(density: GrenanderDensity, t, b, a_x=None, y_max=None):
    """Boundary-corrected smoothed Grenander estimate at t (scalar or array)."""
    a_x = density.a if a_x is None else float(a_x)
    y_max = density.y_max if y_max is None else float(y_max)
    _check_bandwidth(b, a_x, y_max)
    t_arr = np.atleast_1d(np.asarray(t, dtype=np.float64))
    if np.any((t_arr < a_x) | (t_arr > y_max)):
        raise DomainError(f"t must lie in [{a_x}, {y_max}]")
    out = _numeric.smoothed_many(density.breakpoints, density.slopes, t_arr,
                                 float(b), a_x, y_max)
    return float(out[0]) if np.ndim(t) == 0 else out


@dataclass(frozen=True)
class GridCDF:
    """Cumulative mass of the clipped smoothed density on an equispaced grid."""

    a_x: float
    y_max: float
    cdf: np.ndarray

    @property
    def step(self):
        return (self.y_max - self.a_x) / (self.cdf.shape[0] - 1)

    @property
    def grid(self):
        return np.linspace(self.a_x, self.y_max, self.cdf.shape[0])

    @property
    def mass(self):
        return float(self.cdf[-1])

    def inverse(self, w):
        """Monotone linear inversion of the grid cdf, for 0 < w <= mass."""
        return _numeric.draw_event(float(w), np.empty(0), np.empty(0), 0.0,
                                   self.a_x, self.cdf, self.step, self.mass)


def smoothed_cdf_grid(density: GrenanderDensity, b0, a_x=None, y_max=None,
                      grid_size=512, panels=4) -> GridCDF:
    a_x = density.a if a_x is None else float(a_x)
    y_max = density.y_max if y_max is None else float(y_max)
    if grid_size < 256:
        raise ConfigError("grid_size must be at least 256")
    _check_bandwidth(b0, a_x, y_max)
    cdf = _numeric.clipped_cdf_grid(density.breakpoints, density.slopes, float(b0),
                                    a_x, y_max, int(grid_size), int(panels))
    return GridCDF(a_x, y_max, cdf)


@dataclass(frozen=True)
class LevelFit:
    """Everything the test and the bootstrap need from one subsample."""

    n_x: int
    a_x: float
    y_max: float
    y_max_uncensored: float
    F_hat: StepDistribution
    G_hat: StepDistribution
    density: GrenanderDensity
    bandwidths: Bandwidths
    f_hat: float
    f_hat_boot: float

    @property
    def F_at_ymax(self):
        return float(self.F_hat(self.y_max))

    @property
    def F_at_a(self):
        return float(self.F_hat(self.a_x))


def fit_level(time, event, a_x=0.0) -> LevelFit:
    time, event = check_survival_arrays(time, event)
    F = km_event(time, event)
    y_max = float(time.max())
    if not y_max > a_x:
        raise DegenerateDomain(f"largest time {y_max} does not exceed a_x={a_x}")
    dens = grenander(majorant_of(F, a_x, y_max))
    bw = bandwidths(time.shape[0], y_max, a_x)
    return LevelFit(
        n_x=int(time.shape[0]),
        a_x=float(a_x),
        y_max=y_max,
        y_max_uncensored=float(time[event].max()),
        F_hat=F,
        G_hat=km_censoring(time, event),
        density=dens,
        bandwidths=bw,
        f_hat=smoothed_grenander_at(dens, y_max, bw.b_x, a_x, y_max),
        f_hat_boot=smoothed_grenander_at(dens, y_max, bw.b0_x, a_x, y_max),
    )


class SmoothedGrenander(BaseEstimator):
    """Smoothed Grenander estimator of a nonincreasing density under right censoring.

    Parameters
    ----------
    a_x : float, default=0
        Left end of the region where the density is assumed nonincreasing.
    bandwidth : float or None
        Fixed bandwidth. ``None`` uses ``y_max * min(n ** bandwidth_exponent, 0.5)``.
    bandwidth_exponent : float, default=-7/30
    """

    def __init__(self, a_x=0.0, bandwidth=None, bandwidth_exponent=STAT_BANDWIDTH_EXPONENT):
        self.a_x = a_x
        self.bandwidth = bandwidth
        self.bandwidth_exponent = bandwidth_exponent

    def fit(self, time, event):
        time, event = check_survival_arrays(time, event)
        F = km_event(time, event)
        self.y_max_ = float(time.max())
        self.majorant_ = majorant_of(F, self.a_x, self.y_max_)
        self.grenander_ = grenander(self.majorant_)
        self.kme_ = F
        if self.bandwidth is None:
            b = self.y_max_ * bandwidth_factor(time.shape[0], self.bandwidth_exponent)
        else:
            b = float(self.bandwidth)
        self.bandwidth_ = min(b, 0.5 * (self.y_max_ - self.a_x))
        return self

    def density(self, t):
        check_is_fitted(self, "grenander_")
        return smoothed_grenander_at(self.grenander_, t, self.bandwidth_, self.a_x, self.y_max_)

    def score_samples(self, t):
        """Log of the smoothed density (``-inf`` where it is not positive)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            f = np.asarray(self.density(np.asarray(t, dtype=float)))
            return np.where(f > 0, np.log(np.where(f > 0, f, 1.0)), -np.inf)
