"""Smooth one-dimensional profiles: cutoffs, periodic bumps, periodic potentials.

Everything here is a plain function of one real variable with closed-form
derivatives. Evaluators accept scalars or numpy arrays and mirror the input
shape. Antiderivatives that have no closed form are represented by Chebyshev
interpolants fitted to near machine precision, so that values, finite
differences and analytic derivatives of downstream quantities stay mutually
consistent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from numpy.polynomial.chebyshev import Chebyshev

from .errors import DomainError

# Support half-width of the base bump; its shape is fixed, only amplitude and
# period of the periodization are configurable.
BUMP_HALF_WIDTH = 0.25

# Default period of the reference periodic profile. Chosen so that at least
# five spectral gaps of the associated Hill operator sit below energy 60 and
# so that truncation boundaries at integer lengths 100/200 fall in the flat
# region between bumps.
REFERENCE_PERIOD = 2.4


def _match(x, out):
    """Return ``out`` as a scalar when ``x`` was scalar."""
    if np.isscalar(x) or (isinstance(x, np.ndarray) and x.ndim == 0):
        return float(out)
    return out


def _exp_reciprocal(x):
    """exp(-1/x) for x > 0, identically 0 for x <= 0. Smooth on all of R."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0.0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def _exp_reciprocal_deriv(x):
    """Derivative of exp(-1/x) extended by 0: exp(-1/x)/x^2 on x > 0."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0.0
    out[pos] = np.exp(-1.0 / x[pos]) / x[pos] ** 2
    return out


class SmoothCutoff:
    """Nonincreasing C-infinity step: 1 on (-inf, 1], 0 on [2, inf).

    Built from the standard mollifier quotient s(2-t) / (s(2-t) + s(t-1))
    with s(x) = exp(-1/x) for x > 0. Both plateaus are exact, not just
    asymptotic, so quantities switched by the cutoff are exactly unperturbed
    outside the transition window.
    """

    def value(self, t):
        tt = np.asarray(t, dtype=float)
        a = _exp_reciprocal(2.0 - tt)
        b = _exp_reciprocal(tt - 1.0)
        with np.errstate(invalid="ignore"):
            out = np.where(tt <= 1.0, 1.0, np.where(tt >= 2.0, 0.0, a / (a + b)))
        return _match(t, out)

    def deriv(self, t):
        tt = np.asarray(t, dtype=float)
        a = _exp_reciprocal(2.0 - tt)
        b = _exp_reciprocal(tt - 1.0)
        da = -_exp_reciprocal_deriv(2.0 - tt)
        db = _exp_reciprocal_deriv(tt - 1.0)
        den = a + b
        inside = (tt > 1.0) & (tt < 2.0)
        out = np.zeros_like(tt)
        out[inside] = (da[inside] * den[inside] - a[inside] * (da[inside] + db[inside])) / den[inside] ** 2
        return _match(t, out)

    def __call__(self, t):
        return self.value(t)


def bump_value(x):
    """Base bump exp(1 - 1/(1 - 16 x^2)) on |x| < 1/4, zero outside; max is 1."""
    xx = np.asarray(x, dtype=float)
    out = np.zeros_like(xx)
    inside = np.abs(xx) < BUMP_HALF_WIDTH
    xi = xx[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - 16.0 * xi * xi))
    return _match(x, out)


def bump_deriv(x):
    xx = np.asarray(x, dtype=float)
    out = np.zeros_like(xx)
    inside = np.abs(xx) < BUMP_HALF_WIDTH
    xi = xx[inside]
    g = 1.0 - 16.0 * xi * xi
    out[inside] = np.exp(1.0 - 1.0 / g) * (-32.0 * xi / (g * g))
    return _match(x, out)


@dataclass(frozen=True)
class BumpParams:
    """Amplitude and period of the periodized bump profile."""

    amplitude: float = 1.0
    period: float = REFERENCE_PERIOD

    def __post_init__(self):
        if not self.amplitude > 0.0:
            raise DomainError(f"bump amplitude must be positive, got {self.amplitude}")
        if not self.period >= 2.0 * BUMP_HALF_WIDTH:
            raise DomainError(
                f"bump period must be at least {2 * BUMP_HALF_WIDTH} so bumps do not overlap, "
                f"got {self.period}"
            )


def chebyshev_antiderivative(func, lo, hi, rel_tol=1e-12, max_degree=2048):
    """Chebyshev representation of x -> integral of func from lo to x.

    The integrand is interpolated adaptively (degree doubling until the
    trailing coefficients fall below ``rel_tol`` of the leading scale), then
    integrated coefficient-wise. The result is a smooth polynomial whose
    pointwise error is a few ulps, which matters when downstream code takes
    second finite differences of the antiderivative. Intended for integrands
    that are smooth on [lo, hi]; split at known kinks or support edges first.
    """
    if not hi > lo:
        raise DomainError(f"empty interval [{lo}, {hi}]")
    deg = 32
    poly = None
    while deg <= max_degree:
        poly = Chebyshev.interpolate(lambda x: np.asarray(func(x), dtype=float), deg, domain=[lo, hi])
        scale = np.max(np.abs(poly.coef))
        tail = np.max(np.abs(poly.coef[-max(4, deg // 16):]))
        if scale == 0.0 or tail <= rel_tol * max(scale, 1.0):
            break
        deg *= 2
    return poly.integ(lbnd=lo)


class PiecewiseAntiderivative:
    """Antiderivative of a piecewise-smooth function, fitted piece by piece.

    Breakpoints mark the non-smooth joints (e.g. edges of a bump's support);
    each piece gets its own Chebyshev antiderivative plus the cumulative
    offset, so evaluation is spectrally accurate everywhere in between.
    """

    def __init__(self, func, breakpoints, rel_tol=1e-12, max_degree=2048):
        knots = [float(b) for b in breakpoints]
        if len(knots) < 2 or any(b <= a for a, b in zip(knots, knots[1:])):
            raise DomainError("breakpoints must be strictly increasing with length >= 2")
        self.knots = np.array(knots)
        self.pieces = [
            chebyshev_antiderivative(func, a, b, rel_tol, max_degree)
            for a, b in zip(knots, knots[1:])
        ]
        offsets = [0.0]
        for poly, b in zip(self.pieces, knots[1:]):
            offsets.append(offsets[-1] + float(poly(b)))
        self.offsets = np.array(offsets[:-1])
        self.total = offsets[-1]

    def __call__(self, x):
        xx = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self.knots, xx, side="right") - 1, 0, len(self.pieces) - 1)
        out = np.empty_like(xx)
        for k, poly in enumerate(self.pieces):
            mask = idx == k
            if np.any(mask):
                out[mask] = self.offsets[k] + poly(xx[mask])
        return _match(x, out)


@dataclass(frozen=True)
class PeriodicBump:
    """Even periodic C-infinity profile: the base bump repeated with a given period.

    Not real analytic (it vanishes identically between bumps), which is what
    keeps every Fourier coefficient of derived potentials nonzero in practice
    and the associated spectral gaps open.
    """

    params: BumpParams = BumpParams()

    @property
    def period(self):
        return self.params.period

    @property
    def amplitude(self):
        return self.params.amplitude

    def _wrap(self, u):
        T = self.period
        return np.mod(np.asarray(u, dtype=float) + 0.5 * T, T) - 0.5 * T

    def value(self, u):
        return _match(u, self.amplitude * np.asarray(bump_value(self._wrap(u))))

    def deriv(self, u):
        return _match(u, self.amplitude * np.asarray(bump_deriv(self._wrap(u))))

    def __call__(self, u):
        return self.value(u)

    def support_edges(self, lo, hi):
        """Edges of the bump supports (centers kT +- 1/4) strictly inside (lo, hi)."""
        T = self.period
        k_min = math.floor((lo - BUMP_HALF_WIDTH) / T)
        k_max = math.ceil((hi + BUMP_HALF_WIDTH) / T)
        edges = []
        for k in range(k_min, k_max + 1):
            for e in (k * T - BUMP_HALF_WIDTH, k * T + BUMP_HALF_WIDTH):
                if lo < e < hi:
                    edges.append(e)
        return sorted(edges)

    @cached_property
    def _one_period_primitive(self):
        return _bump_period_primitive(self.params)

    @property
    def mean(self):
        """Average of the profile over one period."""
        return self._one_period_primitive.total / self.period

    def primitive(self, u):
        """Integral of the profile from 0 to u, valid for all real u."""
        uu = np.asarray(u, dtype=float)
        prim = self._one_period_primitive
        mean = self.mean
        wrapped = np.mod(uu, self.period)
        osc = np.asarray(prim(wrapped)) - mean * wrapped
        return _match(u, mean * uu + osc)

    def sup_abs(self, samples=20001):
        grid = np.linspace(-BUMP_HALF_WIDTH, BUMP_HALF_WIDTH, samples)
        return float(np.max(np.abs(self.value(grid))))

    def sup_abs_deriv(self, samples=200001):
        grid = np.linspace(-BUMP_HALF_WIDTH, BUMP_HALF_WIDTH, samples)
        return float(np.max(np.abs(self.deriv(grid))))


@lru_cache(maxsize=32)
def _bump_period_primitive(params: BumpParams) -> PiecewiseAntiderivative:
    """Antiderivative of the periodized bump over one period, shared across instances."""
    bump = PeriodicBump(params)
    knots = [0.0] + bump.support_edges(0.0, params.period) + [params.period]
    return PiecewiseAntiderivative(bump.value, knots)


@dataclass(frozen=True)
class PeriodicFunction:
    """A periodic function with a closed-form derivative (e.g. a log-volume slope)."""

    period: float
    value_fn: object
    deriv_fn: object

    def __post_init__(self):
        if not self.period > 0.0:
            raise DomainError(f"period must be positive, got {self.period}")

    def value(self, u):
        return self.value_fn(u)

    def deriv(self, u):
        return self.deriv_fn(u)

    def __call__(self, u):
        return self.value_fn(u)


@dataclass(frozen=True)
class PeriodicPotential:
    """Potential q with q(s + T) = q(s), as used by the Hill/Floquet machinery.

    Periodicity is spot-checked at construction on 32 deterministic
    pseudo-random points (tolerance 1e-10) and the potential must be bounded
    over one period.
    """

    period: float
    func: object

    def __post_init__(self):
        if not self.period > 0.0:
            raise DomainError(f"period must be positive, got {self.period}")
        rng = np.random.default_rng(0x5eed)
        pts = rng.uniform(0.0, 3.0 * self.period, size=32)
        base = np.asarray(self.func(pts), dtype=float)
        shifted = np.asarray(self.func(pts + self.period), dtype=float)
        dev = float(np.max(np.abs(base - shifted)))
        if not dev <= 1e-10:
            raise DomainError(
                f"potential is not {self.period}-periodic: max deviation {dev:.3e} at spot check"
            )
        probe = np.asarray(self.func(np.linspace(0.0, self.period, 257)), dtype=float)
        if not np.all(np.isfinite(probe)):
            raise DomainError("potential must be finite on one period")

    def __call__(self, s):
        return self.func(s)

    def min_over_period(self, samples=4096):
        grid = np.linspace(0.0, self.period, samples + 1)
        return float(np.min(np.asarray(self.func(grid), dtype=float)))

    def shifted(self, a):
        """The same potential with argument shifted by a (phase change)."""
        return PeriodicPotential(self.period, lambda s, _f=self.func, _a=a: _f(np.asarray(s) + _a))
