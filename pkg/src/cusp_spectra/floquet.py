"""Band/gap structure of periodic Schrodinger operators via Floquet theory.

For -u'' + q u = lambda u with q of period T, the monodromy matrix M(lambda)
transports (u, u') across one period. Its trace, the discriminant
Delta(lambda), classifies the spectrum of the operator on the line:
lambda belongs to the spectrum iff |Delta(lambda)| <= 2. Bands are maximal
intervals where that holds; gaps are the open intervals in between, with
endpoints at roots of Delta -+ 2. Half-line operators with a classified tail
inherit the band picture of the tail, since the essential spectrum ignores
both the boundary condition and any compactly supported head.

All discriminant evaluations are vectorized over energy: the two fundamental
solutions are propagated for a whole batch of lambdas at once by an embedded
Dormand-Prince 5(4) scheme with error-per-unit-step control, so the
accumulated error over one period stays of the order of the requested
tolerance and the Wronskian det M stays within 1e-9 of 1.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericalError, RefinementError
from .profiles import PeriodicPotential
from .reduction import ConstantTail, PeriodicTail, SchrodingerPotential, channels_for_degree

__all__ = [
    "PeriodicPotential",
    "MonodromyMatrix",
    "Band",
    "Gap",
    "BandStructure",
    "monodromy",
    "discriminant",
    "discriminant_scan",
    "band_structure",
    "essential_spectrum_halfline",
    "merge_band_structures",
    "p_form_essential_spectrum",
    "DEFAULT_INTEGRATOR_TOL",
]

DEFAULT_INTEGRATOR_TOL = 1e-10

# Dormand-Prince 5(4) pair; the fifth-order solution is propagated (FSAL).
_DP_C = np.array((0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0))
_DP_A = tuple(
    np.array(row)
    for row in (
        (1 / 5,),
        (3 / 40, 9 / 40),
        (44 / 45, -56 / 15, 32 / 9),
        (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
        (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
        (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
    )
)
# Difference between the 5th and 4th order weights; dotted with the stages it
# yields the embedded estimate of the fourth-order local error (~ h^5).
_DP_E = np.array((
    71 / 57600,
    0.0,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
))

_SCAN_CHUNK = 4096


def _thread_count():
    raw = os.environ.get("CUSP_SPECTRA_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError:
        raise DomainError(f"CUSP_SPECTRA_THREADS must be an integer >= 1, got {raw!r}")
    if value < 1:
        raise DomainError(f"CUSP_SPECTRA_THREADS must be an integer >= 1, got {value}")
    return value


def _propagate(qfunc, period, lambdas, tol):
    """Endpoint state of the two fundamental solutions over one period, batched.

    The flat state vector holds the values of the two solutions (initial data
    (1,0) and (0,1)) followed by their derivatives. Stage combinations are
    single BLAS dot products against the stage matrix, and the potential is
    evaluated once per step at all stage abscissae. The step acceptance rule
    is error <= tol * (h / period) relative to max(1, |y|), i.e. error per
    unit length, so the accumulated error over the period is of order tol.
    """
    lam = np.asarray(lambdas, dtype=float)
    K = lam.size
    half = 2 * K
    lam2 = np.concatenate([lam, lam])
    y = np.zeros(4 * K)
    y[0:K] = 1.0          # u1 values
    y[3 * K:4 * K] = 1.0  # u2 derivatives

    def rhs(qval, state, out):
        out[:half] = state[half:]
        np.multiply(state[:half], qval - lam2, out=out[half:])

    s = 0.0
    h_max = period / 8.0
    h = period / 256.0
    h_min = period * 1e-13
    stages = np.zeros((7, 4 * K))
    q_nodes = np.empty(7)
    rhs(float(np.asarray(qfunc(0.0), dtype=float)), y, stages[0])
    acc = np.empty(4 * K)
    y_new = np.empty(4 * K)
    err = np.empty(4 * K)
    max_steps = 10_000_000
    steps = 0
    while s < period:
        h = min(h, period - s)
        q_nodes[:] = np.asarray(qfunc(s + h * _DP_C), dtype=float)
        for i in range(1, 6):
            np.dot(_DP_A[i - 1], stages[:i], out=acc)
            acc *= h
            acc += y
            rhs(q_nodes[i], acc, stages[i])
        np.dot(_DP_A[5], stages[:6], out=y_new)
        y_new *= h
        y_new += y
        rhs(q_nodes[6], y_new, stages[6])
        # local error h * dot(E, stages) vs budget tol * h / period: h cancels
        np.dot(_DP_E, stages, out=err)
        np.abs(err, out=err)
        scale = np.maximum(1.0, np.maximum(np.abs(y), np.abs(y_new)))
        scale *= tol / period
        ratio = float(np.max(err / scale))
        if ratio <= 1.0:
            s += h
            y, y_new = y_new, y
            stages[0] = stages[6]
        factor = 5.0 if ratio == 0.0 else min(5.0, max(0.2, 0.9 * ratio ** -0.25))
        h = min(h * factor, h_max)
        if h < h_min:
            raise NumericalError(
                "integrator step size underflow", s=s, h=h, tol=tol, ratio=ratio
            )
        steps += 1
        if steps > max_steps:
            raise NumericalError("integrator failed to finish the period", s=s, tol=tol)
    return y.reshape(4, K)


def _scan(q: PeriodicPotential, lambdas, tol):
    """Endpoint states for a grid of energies, chunked for thread-level parallelism.

    Chunk boundaries are fixed, so results are bit-identical for any thread
    count.
    """
    lam = np.asarray(lambdas, dtype=float)
    chunks = [lam[i:i + _SCAN_CHUNK] for i in range(0, lam.size, _SCAN_CHUNK)]
    workers = min(_thread_count(), len(chunks))
    if workers <= 1 or len(chunks) == 1:
        parts = [_propagate(q.func, q.period, c, tol) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda c: _propagate(q.func, q.period, c, tol), chunks))
    return np.concatenate(parts, axis=1)


@dataclass(frozen=True)
class MonodromyMatrix:
    """Transfer matrix of -u'' + qu = lambda u over one period, det = 1 by Wronskian."""

    lam: float
    m11: float
    m12: float
    m21: float
    m22: float
    integrator_tol: float

    def __post_init__(self):
        defect = abs(self.det - 1.0)
        if not defect <= 1e-9:
            raise NumericalError(
                f"monodromy determinant defect {defect:.3e} exceeds 1e-9 at lambda = {self.lam}",
                lam=self.lam,
                defect=defect,
            )

    @property
    def det(self):
        return self.m11 * self.m22 - self.m12 * self.m21

    @property
    def trace(self):
        return self.m11 + self.m22


def monodromy(q: PeriodicPotential, lam, tol=DEFAULT_INTEGRATOR_TOL) -> MonodromyMatrix:
    """Monodromy matrix at a single energy, integrated with local error control <= tol."""
    if not tol > 0.0:
        raise DomainError(f"integrator tolerance must be positive, got {tol}")
    y = _propagate(q.func, q.period, np.array([float(lam)]), tol)
    return MonodromyMatrix(
        lam=float(lam),
        m11=float(y[0, 0]),
        m12=float(y[1, 0]),
        m21=float(y[2, 0]),
        m22=float(y[3, 0]),
        integrator_tol=tol,
    )


def discriminant(q: PeriodicPotential, lam, tol=DEFAULT_INTEGRATOR_TOL) -> float:
    """Delta(lambda) = trace of the monodromy matrix."""
    return monodromy(q, lam, tol).trace


def discriminant_scan(q: PeriodicPotential, lambdas, tol=DEFAULT_INTEGRATOR_TOL):
    """Vectorized discriminant over an energy grid; returns (Delta, det) arrays."""
    if not tol > 0.0:
        raise DomainError(f"integrator tolerance must be positive, got {tol}")
    # rows of the endpoint state: u1, u2, u1', u2'
    y = _scan(q, np.atleast_1d(np.asarray(lambdas, dtype=float)), tol)
    disc = y[0] + y[3]
    det = y[0] * y[3] - y[1] * y[2]
    return disc, det


class _Discriminant:
    """Batch discriminant evaluator that accumulates Wronskian diagnostics."""

    def __init__(self, q, tol):
        self.q = q
        self.tol = tol
        self.det_defect = 0.0
        self.evaluations = 0

    def __call__(self, lams):
        lams = np.atleast_1d(np.asarray(lams, dtype=float))
        disc, det = discriminant_scan(self.q, lams, self.tol)
        self.det_defect = max(self.det_defect, float(np.max(np.abs(det - 1.0))))
        self.evaluations += lams.size
        if not self.det_defect <= 1e-9:
            raise NumericalError(
                f"Wronskian conservation violated: max |det - 1| = {self.det_defect:.3e}",
                det_defect=self.det_defect,
            )
        return disc


def _polish_roots(evaluate, targets, lo, hi, f_lo, f_hi, f_tol=1e-10, max_iter=80):
    """Lockstep safeguarded secant/bisection for many bracketed roots at once.

    evaluate maps an array of energies to discriminant values; each root k
    solves Delta(x) = targets[k] inside [lo[k], hi[k]]. One batched
    discriminant evaluation per iteration.
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    f_lo = np.array(f_lo, dtype=float) - targets
    f_hi = np.array(f_hi, dtype=float) - targets
    roots = np.where(np.abs(f_lo) <= np.abs(f_hi), lo, hi)
    active = np.min(np.abs(np.stack([f_lo, f_hi])), axis=0) > f_tol
    for _ in range(max_iter):
        if not np.any(active):
            break
        denom = f_hi - f_lo
        with np.errstate(divide="ignore", invalid="ignore"):
            x = hi - f_hi * (hi - lo) / denom
        mid = 0.5 * (lo + hi)
        bad = ~np.isfinite(x) | (x <= np.minimum(lo, hi)) | (x >= np.maximum(lo, hi))
        x = np.where(bad, mid, x)
        fx = evaluate(x[active]) - targets[active]
        x_act = x[active]
        lo_a, hi_a = lo[active], hi[active]
        f_lo_a, f_hi_a = f_lo[active], f_hi[active]
        same_side = (f_lo_a < 0.0) == (fx < 0.0)
        lo_a = np.where(same_side, x_act, lo_a)
        f_lo_a = np.where(same_side, fx, f_lo_a)
        hi_a = np.where(same_side, hi_a, x_act)
        f_hi_a = np.where(same_side, f_hi_a, fx)
        lo[active], hi[active] = lo_a, hi_a
        f_lo[active], f_hi[active] = f_lo_a, f_hi_a
        roots[active] = x_act
        done = (np.abs(fx) <= f_tol) | (
            np.abs(hi_a - lo_a) < 1e-15 * np.maximum(1.0, np.abs(hi_a))
        )
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    if np.any(active):
        raise NumericalError("root polishing did not converge", remaining=int(active.sum()))
    return roots


@dataclass(frozen=True)
class Band:
    lower: float
    upper: float

    def __post_init__(self):
        if self.lower > self.upper:
            raise DomainError(f"band with lower {self.lower} > upper {self.upper}")

    @property
    def width(self):
        return self.upper - self.lower


@dataclass(frozen=True)
class Gap:
    lower: float
    upper: float
    resolved: bool

    @property
    def width(self):
        return self.upper - self.lower


@dataclass(frozen=True)
class BandStructure:
    """Sorted disjoint spectral bands below an energy cap, and the gaps between them."""

    lambda_max: float
    bands: tuple
    gaps: tuple
    resolution: float
    det_defect: float = 0.0
    integrator_tol: float = 0.0
    edge_marks: tuple = field(default=(), repr=False)

    def __post_init__(self):
        last = -math.inf
        for b in self.bands:
            if b.lower < last:
                raise DomainError("bands must be sorted and disjoint")
            last = b.upper
        if len(self.gaps) not in (0, max(0, len(self.bands) - 1)):
            raise DomainError("gaps must sit between consecutive bands")

    @property
    def threshold(self):
        """Bottom of the essential spectrum (lower edge of the first band)."""
        if not self.bands:
            raise DomainError("empty band structure has no threshold")
        return self.bands[0].lower

    def distance(self, values):
        """Distance from each value to the union of bands (0 inside a band)."""
        v = np.asarray(values, dtype=float)
        dist = np.full(v.shape, np.inf)
        for b in self.bands:
            d = np.maximum(np.maximum(b.lower - v, v - b.upper), 0.0)
            dist = np.minimum(dist, d)
        return dist

    def resolved_gaps(self):
        return tuple(g for g in self.gaps if g.resolved)


def _refine_tangencies(evaluate, grid, disc, cells_with_root, noise_floor):
    """Find gap excursions narrower than the grid step.

    A missed gap shows up as a grid-local extremum of Delta just inside +-2.
    Each candidate cell pair is resampled on progressively finer subgrids
    (batched across candidates); an excursion beyond the noise floor yields a
    bracketed root pair.
    """
    events = []
    fv = np.abs(disc)
    interior = np.arange(1, grid.size - 1)
    is_extremum = (fv[interior] >= fv[interior - 1]) & (fv[interior] >= fv[interior + 1])
    near = (fv[interior] <= 2.0) & (2.0 - fv[interior] < 0.01)
    candidates = [
        i for i in interior[is_extremum & near]
        if (i - 1) not in cells_with_root and i not in cells_with_root
    ]
    for i in candidates:
        sign = 1.0 if disc[i] >= 0.0 else -1.0
        lo, hi = float(grid[i - 1]), float(grid[i + 1])
        found = None
        for _ in range(4):
            sub = np.linspace(lo, hi, 65)
            vals = sign * evaluate(sub)
            k = int(np.argmax(vals))
            if vals[k] > 2.0 + noise_floor:
                found = (sub, vals, k)
                break
            lo = float(sub[max(0, k - 1)])
            hi = float(sub[min(64, k + 1)])
        if found is None:
            continue
        sub, vals, k = found
        left = np.flatnonzero(vals[: k + 1] < 2.0)
        right = k + np.flatnonzero(vals[k:] < 2.0)
        if left.size == 0 or right.size == 0:
            continue
        la, lb = sub[left[-1]], sub[left[-1] + 1]
        ra, rb = sub[right[0] - 1], sub[right[0]]
        roots = _polish_roots(
            evaluate,
            targets=np.array([2.0 * sign, 2.0 * sign]),
            lo=[la, ra],
            hi=[lb, rb],
            f_lo=[sign * vals[left[-1]], sign * vals[right[0] - 1]],
            f_hi=[sign * vals[left[-1] + 1], sign * vals[right[0]]],
        )
        events.append((float(roots[0]), 2.0 * sign))
        events.append((float(roots[1]), 2.0 * sign))
    return events


def band_structure(q: PeriodicPotential, lambda_max, resolution,
                   tol=DEFAULT_INTEGRATOR_TOL) -> BandStructure:
    """Bands and gaps of -u'' + qu on the line, up to the energy cap.

    The discriminant is scanned on a uniform grid (step at most 10 x
    resolution, and at most pi^2 / (4 T^2) so high bands are not skipped),
    every crossing of +-2 is bracketed and polished to |Delta -+ 2| <= 1e-10,
    and near-tangent grid extrema are refined so that gaps narrower than the
    grid step are still found. Gaps narrower than the resolution are reported
    but flagged unresolved.
    """
    if not resolution > 0.0:
        raise DomainError(f"resolution must be positive, got {resolution}")
    T = q.period
    q_min = q.min_over_period()
    if not lambda_max > q_min:
        raise DomainError(
            f"lambda_max = {lambda_max} must exceed the potential minimum {q_min:.6g}"
        )
    start = q_min - 1.0
    step = min(resolution * 10.0, math.pi ** 2 / (4.0 * T * T))
    count = int(math.ceil((lambda_max - start) / step)) + 1
    grid = np.linspace(start, lambda_max, count)

    evaluate = _Discriminant(q, tol)
    disc = evaluate(grid)
    if disc[0] <= 2.0:
        raise NumericalError(
            "discriminant not above +2 at the scan start; spectrum bottom not bracketed",
            start=start,
        )

    events = []
    cells_with_root = set()
    brackets = []  # (cell, target, lo, hi, f_lo, f_hi)
    for c in (2.0, -2.0):
        f = disc - c
        signs = np.sign(f)
        for i in np.nonzero(signs[:-1] * signs[1:] < 0.0)[0]:
            brackets.append((int(i), c, grid[i], grid[i + 1], disc[i], disc[i + 1]))
            cells_with_root.add(int(i))
        for i in np.nonzero(signs == 0.0)[0]:
            events.append((float(grid[i]), c))
            cells_with_root.add(max(0, int(i) - 1))
            cells_with_root.add(int(i))
    if brackets:
        roots = _polish_roots(
            evaluate,
            targets=np.array([b[1] for b in brackets]),
            lo=[b[2] for b in brackets],
            hi=[b[3] for b in brackets],
            f_lo=[b[4] for b in brackets],
            f_hi=[b[5] for b in brackets],
        )
        events.extend((float(r), b[1]) for r, b in zip(roots, brackets))

    noise_floor = max(50.0 * tol, 2e-10)
    events.extend(_refine_tangencies(evaluate, grid, disc, cells_with_root, noise_floor))

    events.sort(key=lambda e: e[0])
    # a coincident pair of same-family roots is a closed gap: drop both
    cleaned = []
    k = 0
    while k < len(events):
        if (
            k + 1 < len(events)
            and events[k + 1][1] == events[k][1]
            and events[k + 1][0] - events[k][0] <= 1e-11 * max(1.0, abs(events[k][0]))
        ):
            k += 2
            continue
        cleaned.append(events[k])
        k += 1

    bands = []
    marks = []
    inside = False
    open_lower = None
    open_mark = None
    for lam, c in cleaned:
        if not inside:
            open_lower, open_mark = lam, c
            inside = True
        else:
            bands.append(Band(lower=open_lower, upper=lam))
            marks.append((open_mark, c))
            inside = False
    if inside:
        bands.append(Band(lower=open_lower, upper=float(lambda_max)))
        marks.append((open_mark, 0.0))

    grid_inside_end = abs(disc[-1]) <= 2.0
    if grid_inside_end != (len(cleaned) % 2 == 1):
        raise RefinementError(
            "crossing count parity violation: a root was likely missed; "
            "rerun with a smaller resolution"
        )

    # midpoint classification check of every assembled interval
    mids = []
    wants = []
    for b in bands:
        if b.width > 0.0:
            mids.append(0.5 * (b.lower + b.upper))
            wants.append(True)
    for left, right in zip(bands[:-1], bands[1:]):
        mids.append(0.5 * (left.upper + right.lower))
        wants.append(False)
    if mids:
        vals = np.abs(evaluate(np.array(mids)))
        for mid, want, val in zip(mids, wants, vals):
            if want and val > 2.0 + 1e-6:
                raise RefinementError(
                    f"band midpoint {mid} fails |Delta| <= 2; use a smaller resolution"
                )
            if not want and val < 2.0 - 1e-6:
                raise RefinementError(
                    f"gap midpoint {mid} fails |Delta| >= 2; use a smaller resolution"
                )

    gaps = tuple(
        Gap(lower=left.upper, upper=right.lower,
            resolved=(right.lower - left.upper) >= resolution)
        for left, right in zip(bands[:-1], bands[1:])
    )
    edge_marks = tuple(
        (b.lower, lo_mark, b.upper, hi_mark) for b, (lo_mark, hi_mark) in zip(bands, marks)
    )
    return BandStructure(
        lambda_max=float(lambda_max),
        bands=tuple(bands),
        gaps=gaps,
        resolution=float(resolution),
        det_defect=evaluate.det_defect,
        integrator_tol=float(tol),
        edge_marks=edge_marks,
    )


def essential_spectrum_halfline(W: SchrodingerPotential, lambda_max, resolution,
                                tol=DEFAULT_INTEGRATOR_TOL) -> BandStructure:
    """Essential spectrum of -d^2/ds^2 + W on the half-line, from the classified tail.

    The head of W and the boundary condition cannot move the essential
    spectrum, so a constant tail c yields [c, lambda_max] and a periodic tail
    is dispatched to the Hill band computation.
    """
    tail = W.tail
    if isinstance(tail, ConstantTail):
        if tail.value >= lambda_max:
            bands = ()
        else:
            bands = (Band(lower=float(tail.value), upper=float(lambda_max)),)
        return BandStructure(
            lambda_max=float(lambda_max),
            bands=bands,
            gaps=(),
            resolution=float(resolution),
            det_defect=0.0,
            integrator_tol=float(tol),
        )
    if isinstance(tail, PeriodicTail):
        return band_structure(tail.q, lambda_max, resolution, tol)
    raise DomainError(f"potential tail {tail!r} is not classified")


def merge_band_structures(structures, lambda_max, resolution):
    """Union of several band structures, overlapping bands merged."""
    intervals = sorted(
        ((b.lower, b.upper) for st in structures for b in st.bands), key=lambda iv: iv[0]
    )
    merged = []
    for lo, hi in intervals:
        if merged and lo <= merged[-1][1] + 1e-12 * max(1.0, abs(hi)):
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    bands = tuple(Band(lower=lo, upper=min(hi, lambda_max)) for lo, hi in merged)
    gaps = tuple(
        Gap(lower=a.upper, upper=b.lower, resolved=(b.lower - a.upper) >= resolution)
        for a, b in zip(bands[:-1], bands[1:])
    )
    return BandStructure(
        lambda_max=float(lambda_max),
        bands=bands,
        gaps=gaps,
        resolution=float(resolution),
        det_defect=max((st.det_defect for st in structures), default=0.0),
        integrator_tol=max((st.integrator_tol for st in structures), default=0.0),
    )


def p_form_essential_spectrum(metric, p, lambda_max, resolution,
                              tol=DEFAULT_INTEGRATOR_TOL) -> BandStructure:
    """Essential spectrum of the degree-p form Laplacian on the cusp: union over channels."""
    channels = channels_for_degree(metric, p)
    spectra = [
        essential_spectrum_halfline(ch.potential, lambda_max, resolution, tol)
        for ch in channels
    ]
    return merge_band_structures(spectra, lambda_max, resolution)
