"""Command-line entry point.

Subcommands
-----------
bands          essential spectrum of the function Laplacian of a cusp metric
cusp-spectrum  essential spectrum of the degree-p form Laplacian
theorem3       the gapped-cusp family: band/gap table plus curvature pinch
oracle-audit   finite-difference cross-check of the computed bands
curvature      sectional-curvature profile along the cusp

Every run writes `<prefix>.report.json` plus fixed-schema CSV files
(`index,lower,upper` for bands; `index,lower,upper,width,resolved` for gaps;
`s,K_min,K_max` for curvature) and, unless --no-plot is given, matplotlib
figures next to them. CSV/JSON output is byte-identical across runs with the
same configuration; timing information therefore goes to stderr only.

Flags may also be supplied through a JSON config file (--config); explicit
flags override file values. Exit codes: 0 success, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import __version__
from .errors import CuspSpectraError, DomainError, NumericalError
from .metrics import (
    TorusCuspMetric,
    curvature_range,
    gapped_cusp_metric,
    hyperbolic_cusp,
    linear_warp,
)
from .floquet import essential_spectrum_halfline, p_form_essential_spectrum
from .oracle import Grid, discretize_schrodinger, eigenvalues_below, gap_audit
from .profiles import REFERENCE_PERIOD, BumpParams
from .reduction import function_potential

METRIC_KINDS = ("hyperbolic", "theorem3", "custom-warps")


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved parameters of one CLI invocation."""

    command: str
    out: str = "cusp_run"
    plot: bool = True
    metric: str = "hyperbolic"
    n: int = 2
    delta: float = None
    s0: float = None
    bump_amplitude: float = 1.0
    bump_period: float = REFERENCE_PERIOD
    warp_slopes: tuple = None
    fiber_volumes: tuple = None
    lambda_max: float = None
    resolution: float = 1e-4
    tol: float = 1e-10
    degree: int = 0
    gaps: int = 5
    oracle_l: float = 200.0
    oracle_n: int = 40000
    margin: float = 1e-3
    s_hi: float = None
    grid_points: int = 4001
    k_target: float = -1.0

    def to_dict(self):
        out = asdict(self)
        for key in ("warp_slopes", "fiber_volumes"):
            if out[key] is not None:
                out[key] = list(out[key])
        return out

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise DomainError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(data)
        for key in ("warp_slopes", "fiber_volumes"):
            if kwargs.get(key) is not None:
                kwargs[key] = tuple(float(v) for v in kwargs[key])
        return cls(**kwargs)


@dataclass(frozen=True)
class RunReport:
    """Outcome of one run: configuration echo, results, and wall-clock timings."""

    version: str
    command: str
    config: dict
    results: dict
    timings: dict

    def to_json(self):
        # timings are excluded: report files must be byte-identical across runs
        payload = {
            "tool": "cusp-spectra",
            "version": self.version,
            "command": self.command,
            "config": self.config,
            "results": self.results,
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _csv_float(x):
    return repr(float(x))


def _write(path, text):
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(text)


def _bands_csv(structure):
    lines = ["index,lower,upper"]
    for i, b in enumerate(structure.bands):
        lines.append(f"{i},{_csv_float(b.lower)},{_csv_float(b.upper)}")
    return "\n".join(lines) + "\n"


def _gaps_csv(structure):
    lines = ["index,lower,upper,width,resolved"]
    for i, g in enumerate(structure.gaps):
        lines.append(
            f"{i},{_csv_float(g.lower)},{_csv_float(g.upper)},{_csv_float(g.width)},"
            f"{'true' if g.resolved else 'false'}"
        )
    return "\n".join(lines) + "\n"


def _curvature_csv(s, k_min, k_max):
    lines = ["s,K_min,K_max"]
    for si, lo, hi in zip(s, k_min, k_max):
        lines.append(f"{_csv_float(si)},{_csv_float(lo)},{_csv_float(hi)}")
    return "\n".join(lines) + "\n"


def _structure_results(structure):
    return {
        "threshold": structure.bands[0].lower if structure.bands else None,
        "band_count": len(structure.bands),
        "gap_count": len(structure.gaps),
        "resolved_gap_count": len(structure.resolved_gaps()),
        "bands": [[b.lower, b.upper] for b in structure.bands],
        "gaps": [
            {"lower": g.lower, "upper": g.upper, "width": g.width, "resolved": g.resolved}
            for g in structure.gaps
        ],
        "det_defect": structure.det_defect,
    }


def build_metric(cfg: RunConfig) -> TorusCuspMetric:
    if cfg.metric == "hyperbolic":
        s0 = 0.0 if cfg.s0 is None else cfg.s0
        return hyperbolic_cusp(cfg.n, s0=s0)
    if cfg.metric == "theorem3":
        if cfg.delta is None:
            raise DomainError("--delta is required for the theorem3 metric")
        s0 = 1.0 if cfg.s0 is None else cfg.s0
        return gapped_cusp_metric(
            cfg.delta, s0=s0, bump_params=BumpParams(cfg.bump_amplitude, cfg.bump_period)
        )
    if cfg.metric == "custom-warps":
        if not cfg.warp_slopes:
            raise DomainError("--warp-slopes is required for custom-warps metrics")
        s0 = 0.0 if cfg.s0 is None else cfg.s0
        warps = tuple(linear_warp(a, s0) for a in cfg.warp_slopes)
        vols = cfg.fiber_volumes or (1.0,) * len(warps)
        return TorusCuspMetric(warps=warps, fiber_volumes=vols)
    raise DomainError(f"unknown metric kind {cfg.metric!r}")


def _metric_bump_period(cfg):
    return cfg.bump_period if cfg.metric == "theorem3" or cfg.command in ("theorem3", "oracle-audit") else REFERENCE_PERIOD


def _default_curvature_span(cfg, metric):
    if cfg.s_hi is not None:
        return cfg.s_hi
    if cfg.delta is not None:
        return metric.s0 + min(3.0 / cfg.delta + 10.0 * cfg.bump_period, 200.0)
    return metric.s0 + 10.0


def _curvature_rows(metric, s_lo, s_hi, grid_points):
    """Per-sample extrema over all curvature planes."""
    import itertools

    grid = np.linspace(s_lo, s_hi, grid_points)
    slopes = np.stack([np.asarray(w.deriv(grid), dtype=float) for w in metric.warps])
    bends = np.stack([np.asarray(w.deriv2(grid), dtype=float) for w in metric.warps])
    planes = [bends - slopes ** 2]
    for i, j in itertools.combinations(range(metric.fiber_dim), 2):
        planes.append((-(slopes[i] * slopes[j]))[None, :])
    stacked = np.concatenate(planes, axis=0)
    return grid, stacked.min(axis=0), stacked.max(axis=0)


def _run_spectrum_command(cfg, timings):
    metric = build_metric(cfg)
    degree = cfg.degree if cfg.command == "cusp-spectrum" else 0
    lam_max = 10.0 if cfg.lambda_max is None else cfg.lambda_max
    t0 = time.perf_counter()
    structure = p_form_essential_spectrum(metric, degree, lam_max, cfg.resolution, cfg.tol)
    timings["spectrum_s"] = time.perf_counter() - t0
    results = _structure_results(structure)
    results["degree"] = degree
    outputs = {
        f"{cfg.out}.bands.csv": _bands_csv(structure),
        f"{cfg.out}.gaps.csv": _gaps_csv(structure),
    }
    figure = None
    if cfg.plot:
        figure = (f"{cfg.out}.spectrum.png", structure, None, None)
    return results, outputs, figure, None


def _run_theorem3(cfg, timings):
    if cfg.delta is None:
        raise DomainError("--delta is required")
    s0 = 1.0 if cfg.s0 is None else cfg.s0
    lam_max = 60.0 if cfg.lambda_max is None else cfg.lambda_max
    bump = BumpParams(cfg.bump_amplitude, cfg.bump_period)
    metric = gapped_cusp_metric(cfg.delta, s0=s0, bump_params=bump)
    potential = function_potential(metric)

    t0 = time.perf_counter()
    structure = essential_spectrum_halfline(potential, lam_max, cfg.resolution, cfg.tol)
    timings["spectrum_s"] = time.perf_counter() - t0

    resolved = structure.resolved_gaps()
    if len(resolved) < cfg.gaps:
        raise NumericalError(
            f"only {len(resolved)} resolved gaps below lambda_max = {lam_max}, "
            f"requested {cfg.gaps}; raise lambda_max or refine resolution",
            resolved_gaps=len(resolved),
        )

    t0 = time.perf_counter()
    span = s0 + 3.0 / cfg.delta + 10.0 * cfg.bump_period
    points = min(int((span - s0) / 0.005) + 2, 500001)
    report = curvature_range(metric, s0, span, points, -1.0)
    timings["curvature_s"] = time.perf_counter() - t0

    results = _structure_results(structure)
    results.update(
        {
            "requested_gaps": cfg.gaps,
            "gap_rows": [
                {"lower": g.lower, "upper": g.upper, "width": g.width}
                for g in resolved[: cfg.gaps]
            ],
            "pinch": report.pinch,
            "pinch_window": [s0, span],
            "curvature_min": report.k_min,
            "curvature_max": report.k_max,
            "tail_onset": potential.tail.onset,
            "tail_period": potential.tail.q.period,
        }
    )
    outputs = {
        f"{cfg.out}.bands.csv": _bands_csv(structure),
        f"{cfg.out}.gaps.csv": _gaps_csv(structure),
    }
    figure = None
    if cfg.plot:
        figure = (f"{cfg.out}.spectrum.png", structure, potential, potential.tail.onset + 4.0 * cfg.bump_period)
    return results, outputs, figure, None


def _run_oracle_audit(cfg, timings):
    if cfg.delta is None:
        raise DomainError("--delta is required")
    s0 = 1.0 if cfg.s0 is None else cfg.s0
    lam_max = 60.0 if cfg.lambda_max is None else cfg.lambda_max
    bump = BumpParams(cfg.bump_amplitude, cfg.bump_period)
    metric = gapped_cusp_metric(cfg.delta, s0=s0, bump_params=bump)
    potential = function_potential(metric)

    t0 = time.perf_counter()
    structure = essential_spectrum_halfline(potential, lam_max, cfg.resolution, cfg.tol)
    timings["spectrum_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    grid = Grid(s0=s0, length=cfg.oracle_l, npoints=cfg.oracle_n)
    operator = discretize_schrodinger(potential, grid)
    eigs = eigenvalues_below(operator, lam_max)
    timings["oracle_s"] = time.perf_counter() - t0

    distances = structure.distance(eigs)
    violations = int(np.count_nonzero(distances > cfg.resolution))
    audit = gap_audit(eigs, structure, cfg.margin)

    results = _structure_results(structure)
    results.update(
        {
            "eigenvalue_count": int(eigs.size),
            "violations": violations,
            "containment": (1.0 - violations / eigs.size) if eigs.size else 1.0,
            "gap_counts": list(audit.gap_counts),
            "below_first_band": audit.below_first_band,
            "margin": cfg.margin,
            "oracle_l": cfg.oracle_l,
            "oracle_n": cfg.oracle_n,
        }
    )
    outputs = {
        f"{cfg.out}.bands.csv": _bands_csv(structure),
        f"{cfg.out}.gaps.csv": _gaps_csv(structure),
    }
    figure = None
    if cfg.plot:
        figure = (f"{cfg.out}.spectrum.png", structure, potential, potential.tail.onset + 4.0 * cfg.bump_period)
    return results, outputs, figure, None


def _run_curvature(cfg, timings):
    metric = build_metric(cfg)
    s_hi = _default_curvature_span(cfg, metric)
    t0 = time.perf_counter()
    grid, k_min, k_max = _curvature_rows(metric, metric.s0, s_hi, cfg.grid_points)
    report = curvature_range(metric, metric.s0, s_hi, cfg.grid_points, cfg.k_target)
    timings["curvature_s"] = time.perf_counter() - t0
    results = {
        "k_min": report.k_min,
        "k_max": report.k_max,
        "pinch": report.pinch,
        "k_target": report.k_target,
        "sample_count": report.sample_count,
        "window": [metric.s0, s_hi],
    }
    if cfg.metric == "theorem3":
        results["tail_onset"] = (1.0 if cfg.s0 is None else cfg.s0) + 2.0 / cfg.delta
    outputs = {f"{cfg.out}.curvature.csv": _curvature_csv(grid, k_min, k_max)}
    curvature_figure = None
    if cfg.plot:
        curvature_figure = (f"{cfg.out}.curvature.png", grid, k_min, k_max, cfg.k_target)
    return results, outputs, None, curvature_figure


_RUNNERS = {
    "bands": _run_spectrum_command,
    "cusp-spectrum": _run_spectrum_command,
    "theorem3": _run_theorem3,
    "oracle-audit": _run_oracle_audit,
    "curvature": _run_curvature,
}


def run(cfg: RunConfig) -> RunReport:
    """Execute a resolved configuration, write its outputs, return the report."""
    if cfg.command not in _RUNNERS:
        raise DomainError(f"unknown command {cfg.command!r}")
    timings = {}
    t_start = time.perf_counter()
    results, outputs, spectrum_fig, curvature_fig = _RUNNERS[cfg.command](cfg, timings)
    report = RunReport(
        version=__version__,
        command=cfg.command,
        config=cfg.to_dict(),
        results=results,
        timings=timings,
    )
    outputs[f"{cfg.out}.report.json"] = report.to_json()
    out_dir = os.path.dirname(cfg.out)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    for path, text in sorted(outputs.items()):
        _write(path, text)
    if spectrum_fig is not None:
        from . import plotting

        path, structure, potential, span = spectrum_fig
        plotting.save_spectrum_figure(path, structure, potential=potential, span=span)
    if curvature_fig is not None:
        from . import plotting

        path, grid, k_min, k_max, k_target = curvature_fig
        plotting.save_curvature_figure(path, grid, k_min, k_max, k_target)
    timings["total_s"] = time.perf_counter() - t_start
    return report


def _float_list(text):
    return tuple(float(part) for part in text.split(",") if part.strip() != "")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cusp-spectra",
        description="Essential spectra of warped torus-cusp metrics via Floquet analysis.",
    )
    parser.add_argument("--version", action="version", version=f"cusp-spectra {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--out", help="output path prefix (default cusp_run)")
        sp.add_argument("--config", help="JSON config file; explicit flags override")
        sp.add_argument("--no-plot", action="store_true", help="skip figure rendering")

    def add_metric(sp):
        sp.add_argument("--metric", choices=METRIC_KINDS, help="metric family (default hyperbolic)")
        sp.add_argument("--n", type=int, help="total dimension for hyperbolic metrics (default 2)")
        sp.add_argument("--delta", type=float, help="ripple strength of the theorem3 family")
        sp.add_argument("--s0", type=float, help="left endpoint of the cusp coordinate")
        sp.add_argument("--bump-amplitude", type=float, help="bump profile amplitude (default 1)")
        sp.add_argument("--bump-period", type=float,
                        help=f"bump profile period (default {REFERENCE_PERIOD})")
        sp.add_argument("--warp-slopes", type=_float_list,
                        help="comma-separated warp slopes for custom-warps metrics")
        sp.add_argument("--fiber-volumes", type=_float_list,
                        help="comma-separated fiber circumferences")

    def add_spectral(sp):
        sp.add_argument("--lambda-max", type=float, help="energy cap")
        sp.add_argument("--resolution", type=float, help="band/gap resolution (default 1e-4)")
        sp.add_argument("--tol", type=float, help="monodromy integrator tolerance (default 1e-12)")

    sp = sub.add_parser("bands", help="function-Laplacian essential spectrum of a cusp metric")
    add_common(sp), add_metric(sp), add_spectral(sp)

    sp = sub.add_parser("cusp-spectrum", help="p-form essential spectrum of a cusp metric")
    add_common(sp), add_metric(sp), add_spectral(sp)
    sp.add_argument("--degree", type=int, help="form degree p (default 0)")

    sp = sub.add_parser("theorem3", help="gapped-cusp family: gaps below the cap plus pinch")
    add_common(sp), add_spectral(sp)
    sp.add_argument("--delta", type=float, help="ripple strength (default 0.1)")
    sp.add_argument("--s0", type=float, help="left endpoint (default 1)")
    sp.add_argument("--bump-amplitude", type=float)
    sp.add_argument("--bump-period", type=float)
    sp.add_argument("--gaps", type=int, help="minimum number of resolved gaps required (default 5)")

    sp = sub.add_parser("oracle-audit", help="finite-difference audit of the computed bands")
    add_common(sp), add_spectral(sp)
    sp.add_argument("--delta", type=float, help="ripple strength (default 0.1)")
    sp.add_argument("--s0", type=float)
    sp.add_argument("--bump-amplitude", type=float)
    sp.add_argument("--bump-period", type=float)
    sp.add_argument("--oracle-l", type=float, help="truncation length (default 200)")
    sp.add_argument("--oracle-n", type=int, help="grid cells (default 40000)")
    sp.add_argument("--margin", type=float, help="deep-gap margin (default 1e-3)")

    sp = sub.add_parser("curvature", help="sectional curvature profile of a cusp metric")
    add_common(sp), add_metric(sp)
    sp.add_argument("--s-hi", type=float, help="right end of the sample window")
    sp.add_argument("--grid-points", type=int, help="sample count (default 4001)")
    sp.add_argument("--k-target", type=float, help="target curvature (default -1)")

    return parser


_COMMAND_DEFAULTS = {
    "bands": {"lambda_max": 10.0},
    "cusp-spectrum": {"lambda_max": 10.0},
    "theorem3": {"delta": 0.1, "lambda_max": 60.0, "metric": "theorem3"},
    "oracle-audit": {"delta": 0.1, "lambda_max": 60.0, "metric": "theorem3"},
    "curvature": {},
}


def resolve_config(args) -> RunConfig:
    """Merge per-command defaults, config-file values and explicit flags."""
    merged = {"command": args.command}
    merged.update(_COMMAND_DEFAULTS.get(args.command, {}))
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as handle:
            try:
                file_values = json.load(handle)
            except json.JSONDecodeError as exc:
                raise DomainError(f"config file {args.config} is not valid JSON: {exc}")
        if not isinstance(file_values, dict):
            raise DomainError("config file must hold a JSON object")
        for key, value in file_values.items():
            field = key.replace("-", "_")
            if field in ("command", "config"):
                continue
            merged[field] = tuple(value) if isinstance(value, list) else value
    for key, value in vars(args).items():
        if key in ("command", "config", "no_plot") or value is None:
            continue
        merged[key] = value
    if getattr(args, "no_plot", False):
        merged["plot"] = False
    return RunConfig.from_dict(merged)


def _emit_error(kind, exc):
    payload = {"error": {"type": kind, "class": type(exc).__name__, "message": str(exc)}}
    diagnostics = getattr(exc, "diagnostics", None)
    if diagnostics:
        payload["error"]["diagnostics"] = {k: repr(v) for k, v in diagnostics.items()}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
    except (DomainError, OSError, TypeError, ValueError) as exc:
        _emit_error("config", exc)
        return 2
    try:
        report = run(cfg)
    except DomainError as exc:
        _emit_error("config", exc)
        return 2
    except (NumericalError, CuspSpectraError) as exc:
        _emit_error("numerical", exc)
        return 3
    print(json.dumps({"timings": report.timings}, sort_keys=True), file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
