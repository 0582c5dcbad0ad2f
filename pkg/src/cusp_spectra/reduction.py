"""Reduction of cusp geometry to half-line Schrodinger operators.

A square-integrable function on the cusp, constant on each cross-section,
corresponds after the substitution k = v^(1/2) f to a half-line problem

    -k'' + ( (1/2) (ln v)'' + (1/4) ((ln v)')^2 ) k

with Dirichlet boundary. The same conjugation applies per invariant-form
channel on flat-torus fibers: a channel indexed by a subset J of fiber
directions carries the weight rho_J with mu = (ln rho_J)' and splits into a
supersymmetric pair of potentials mu^2/4 + mu'/2 (tangential) and
mu^2/4 - mu'/2 (normal, i.e. ds-wedge) whose nonzero spectra coincide.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, TailClassificationError
from .metrics import (
    ConstantSlopeTail,
    PeriodicSlopeTail,
    TorusCuspMetric,
    VolumeProfile,
    combine_slope_tails,
    volume_profile,
)
from .profiles import PeriodicFunction, PeriodicPotential, _match


@dataclass(frozen=True)
class Dirichlet:
    """Boundary value fixed to zero at s0."""


@dataclass(frozen=True)
class Robin:
    """Boundary relation k'(s0) = -beta k(s0)."""

    beta: float


@dataclass(frozen=True)
class ConstantTail:
    """W(s) = value exactly for s >= onset."""

    value: float
    onset: float


@dataclass(frozen=True)
class PeriodicTail:
    """W(s) = q(s - onset) exactly for s >= onset, with q periodic."""

    q: PeriodicPotential
    onset: float


_TAIL_TOL = 1e-10


def tail_classify(func, declared):
    """Classify the far behaviour of a potential from its generating slope data.

    ``declared`` is the slope tail of the warp data the potential was built
    from (ConstantSlopeTail or PeriodicSlopeTail). The declared form is
    verified pointwise at 64 samples beyond the onset to 1e-10; a mismatch
    raises TailClassificationError carrying the maximal deviation.
    """
    onset = declared.onset
    if isinstance(declared, ConstantSlopeTail):
        c = float(func(onset))
        samples = onset + np.linspace(0.0, 32.0, 64)
        dev = float(np.max(np.abs(np.asarray(func(samples), dtype=float) - c)))
        if not dev <= _TAIL_TOL:
            raise TailClassificationError(
                f"declared constant tail deviates by {dev:.3e} beyond s* = {onset}",
                max_deviation=dev,
            )
        return ConstantTail(value=c, onset=onset)
    if isinstance(declared, PeriodicSlopeTail):
        period = declared.period

        def q_func(u, _f=func, _onset=onset, _T=period):
            return _f(_onset + np.mod(np.asarray(u, dtype=float), _T))

        q = PeriodicPotential(period=period, func=q_func)
        samples = onset + np.linspace(0.0, 8.0 * period, 64)
        dev = float(np.max(np.abs(
            np.asarray(func(samples), dtype=float) - np.asarray(q(samples - onset), dtype=float)
        )))
        if not dev <= _TAIL_TOL:
            raise TailClassificationError(
                f"declared periodic tail (period {period}) deviates by {dev:.3e} beyond s* = {onset}",
                max_deviation=dev,
            )
        return PeriodicTail(q=q, onset=onset)
    raise DomainError(f"unknown tail declaration {declared!r}")


@dataclass(frozen=True)
class SchrodingerPotential:
    """Half-line potential W(s), s >= s0, with a classified tail and boundary condition."""

    s0: float
    func: object
    tail: object
    boundary: object

    def __post_init__(self):
        tail = self.tail
        if isinstance(tail, ConstantTail):
            samples = tail.onset + np.linspace(0.0, 16.0, 16)
            dev = float(np.max(np.abs(np.asarray(self.func(samples), dtype=float) - tail.value)))
        elif isinstance(tail, PeriodicTail):
            samples = tail.onset + np.linspace(0.0, 3.0 * tail.q.period, 16)
            dev = float(np.max(np.abs(
                np.asarray(self.func(samples), dtype=float)
                - np.asarray(tail.q(samples - tail.onset), dtype=float)
            )))
        else:
            raise DomainError(f"unsupported tail {tail!r}")
        if not dev <= _TAIL_TOL:
            raise TailClassificationError(
                f"potential does not match its tail beyond s* = {tail.onset} (deviation {dev:.3e})",
                max_deviation=dev,
            )

    def __call__(self, s):
        return self.func(s)


def potential_from_volume(v: VolumeProfile) -> SchrodingerPotential:
    """W = (1/2)(ln v)'' + (1/4)((ln v)')^2 with Dirichlet boundary.

    Invariant under rescaling v -> c v, since only log-derivatives enter.
    """

    def func(s):
        ld1 = np.asarray(v.log_deriv(s), dtype=float)
        ld2 = np.asarray(v.log_deriv2(s), dtype=float)
        return _match(s, 0.5 * ld2 + 0.25 * ld1 * ld1)

    tail = tail_classify(func, v.slope_tail)
    return SchrodingerPotential(s0=v.s0, func=func, tail=tail, boundary=Dirichlet())


def potential_from_log_slope(P: PeriodicFunction, s0=0.0) -> SchrodingerPotential:
    """W = (1/2) P' + (1/4) P^2 for a periodic log-volume slope P; periodic from s0 on."""

    def func(s):
        val = np.asarray(P.value(s), dtype=float)
        der = np.asarray(P.deriv(s), dtype=float)
        return _match(s, 0.5 * der + 0.25 * val * val)

    tail = tail_classify(func, PeriodicSlopeTail(onset=s0, period=P.period))
    return SchrodingerPotential(s0=s0, func=func, tail=tail, boundary=Dirichlet())


TANGENTIAL = "tangential"
NORMAL = "normal"


@dataclass(frozen=True)
class FormChannel:
    """One invariant-form channel of the cusp operator restricted to a degree.

    indices is the subset J of fiber directions (1-based); normal channels
    carry the extra ds factor, raising their degree by one and flipping the
    sign of the mu'/2 term in the conjugated potential.
    """

    indices: tuple
    kind: str
    degree: int
    mu_fn: object
    mu_deriv_fn: object
    potential: SchrodingerPotential

    def mu(self, s):
        return self.mu_fn(s)

    def mu_deriv(self, s):
        return self.mu_deriv_fn(s)


def _channel(metric: TorusCuspMetric, subset, kind):
    coeffs = [1.0 if (j + 1) in subset else -1.0 for j in range(metric.fiber_dim)]
    warps = metric.warps

    def mu(s):
        return _match(s, sum(c * np.asarray(w.deriv(s), dtype=float) for c, w in zip(coeffs, warps)))

    def mu_deriv(s):
        return _match(s, sum(c * np.asarray(w.deriv2(s), dtype=float) for c, w in zip(coeffs, warps)))

    sign = 1.0 if kind == TANGENTIAL else -1.0

    def func(s):
        m = np.asarray(mu(s), dtype=float)
        md = np.asarray(mu_deriv(s), dtype=float)
        return _match(s, 0.25 * m * m + sign * 0.5 * md)

    declared = combine_slope_tails([w.slope_tail for w in warps], coeffs)
    tail = tail_classify(func, declared)
    boundary = Dirichlet() if kind == TANGENTIAL else Robin(beta=0.5 * float(mu(metric.s0)))
    degree = len(subset) if kind == TANGENTIAL else len(subset) + 1
    return FormChannel(
        indices=tuple(sorted(subset)),
        kind=kind,
        degree=degree,
        mu_fn=mu,
        mu_deriv_fn=mu_deriv,
        potential=SchrodingerPotential(s0=metric.s0, func=func, tail=tail, boundary=boundary),
    )


def channels_for_degree(metric: TorusCuspMetric, p: int):
    """All invariant-form channels of total degree p on the cusp.

    One tangential channel per subset J with |J| = p and one normal channel
    per subset J' with |J'| = p - 1, so C(m, p) + C(m, p-1) channels total.
    """
    m = metric.fiber_dim
    n = m + 1
    if not 0 <= p <= n:
        raise DomainError(f"form degree {p} out of range 0..{n}")
    fibers = range(1, m + 1)
    channels = []
    if p <= m:
        for subset in itertools.combinations(fibers, p):
            channels.append(_channel(metric, subset, TANGENTIAL))
    if p >= 1 and p - 1 <= m:
        for subset in itertools.combinations(fibers, p - 1):
            channels.append(_channel(metric, subset, NORMAL))
    return channels


def function_potential(metric: TorusCuspMetric) -> SchrodingerPotential:
    """The degree-0 potential, i.e. the volume reduction of the function Laplacian."""
    return potential_from_volume(volume_profile(metric))
