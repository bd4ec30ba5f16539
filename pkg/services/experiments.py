"""Named experiments: each turns an ExperimentConfig into an ExperimentResult."""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from cchardy.capacity import (
    POSITIVE_TOLERANCE,
    annulus_check,
    ball_condenser,
    boundary_samples,
    euclidean_condenser_capacity,
    fatness_scan,
    p_capacity,
    self_improvement,
)
from cchardy.cover import thickness_report, whitney
from cchardy.errors import CCHardyError
from cchardy.grid import GridDomain, discretize, farthest_point_sample
from cchardy.hardy import (
    DENSITY_TOLERANCE,
    MAZYA_FACTOR,
    boundary_test_functions,
    corollary_weights,
    hardy_1d,
    maximize_ratio,
    mazya_check,
    pointwise_constant,
    sharp_experiment,
)
from cchardy.nsw import LocalParameters, comparability_report, fitted_exponent, nsw_profile
from cchardy.oracles import EuclideanOracle
from cchardy.shapes import parse_shape
from cchardy.systems import Geometry, geometry_for, get_system, load_system_file
from cchardy.weights import WeightSpec, evaluate_weight

from .config_loader import ExperimentConfig

logger = logging.getLogger(__name__)

VOLUME_RADII = (0.01, 0.02, 0.04)
VOLUME_SAMPLES = 200_000
FATNESS_RADII = (0.1, 0.2)
EXPONENT_TOLERANCE = 0.2
CAPACITY_TOLERANCE = 0.10
MAZYA_BALLS = 4


class ExperimentError(Exception):
    def __init__(self, experiment: str, cause: Exception):
        self.experiment = experiment
        self.cause = cause
        super().__init__(f"experiment '{experiment}' failed: {type(cause).__name__}: {cause}")


@dataclass(eq=False)
class ExperimentResult:
    name: str
    rows: List[Dict[str, object]]
    payload: Dict[str, object]
    checks: Dict[str, bool]
    summary: List[str] = field(default_factory=list)
    fields: Dict[str, Tuple[np.ndarray, GridDomain]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


class Workspace:
    """Geometry and domain for one config, built on first use."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self._geometry: Optional[Geometry] = None
        self._domain: Optional[GridDomain] = None

    @property
    def geometry(self) -> Geometry:
        if self._geometry is None:
            cfg = self.config
            system = load_system_file(cfg.system_file) if cfg.system_file else get_system(cfg.system)
            self._geometry = geometry_for(system, seed=cfg.seed)
        return self._geometry

    @property
    def r0(self) -> float:
        return self.config.r0 if self.config.r0 is not None else self.geometry.r0

    @property
    def origin(self) -> Tuple[float, ...]:
        return tuple([0.0] * self.geometry.system.ambient_dim)

    @property
    def domain(self) -> GridDomain:
        if self._domain is None:
            geo = self.geometry
            shape = parse_shape(self.config.shape, geo.system.ambient_dim, geo.group)
            self._domain = discretize(shape, self.config.h, geo.system, LocalParameters(1.0, self.r0))
        return self._domain

    def boundary_points(self) -> np.ndarray:
        return boundary_samples(self.domain, self.config.samples, self.config.seed)

    def near_boundary_points(self, reach: float) -> np.ndarray:
        """Inside cells with delta below reach, farthest-point subsampled."""
        domain = self.domain
        mask = domain.inside & (domain.delta < reach)
        pts = domain.points(mask)
        return pts[farthest_point_sample(pts, self.config.samples, self.config.seed)]


def _point(pt) -> str:
    return "(" + ", ".join(f"{v:g}" for v in pt) + ")"


def run_volumes(ws: Workspace) -> ExperimentResult:
    cfg, geo = ws.config, ws.geometry
    points = cfg.points or (ws.origin,)
    radii = [r for r in (cfg.radii or VOLUME_RADII) if r <= ws.r0]
    report = comparability_report(geo.basis, geo.oracle, points, radii, n_samples=VOLUME_SAMPLES, seed=cfg.seed, r0=ws.r0)

    checks, summary, exponents = {}, [], {}
    for x in points:
        key = tuple(float(v) for v in x)
        rows = [row for row in report.rows if row["x"] == key]
        fit = fitted_exponent([row["r"] for row in rows], [row["volume"] for row in rows])
        q_at_x = nsw_profile(geo.basis, key).q_at_x
        exponents[_point(key)] = {"fitted": fit, "Q(x)": q_at_x}
        checks[f"exponent at {_point(key)}"] = abs(fit - q_at_x) <= EXPONENT_TOLERANCE
        summary.append(f"x={_point(key)}: fitted exponent {fit:.4f}, Q(x)={q_at_x}")
    summary.append(f"Lambda ratio in [{report.nsw_ratio_min:.4g}, {report.nsw_ratio_max:.4g}], doubling C0={report.doubling_c0:.4g}")
    payload = {
        "exponents": exponents,
        "q_local": report.q_local,
        "nsw_ratio_min": report.nsw_ratio_min,
        "nsw_ratio_max": report.nsw_ratio_max,
        "doubling_c0": report.doubling_c0,
        "rescaling_violation": report.rescaling_violation,
    }
    return ExperimentResult("volumes", report.rows, payload, checks, summary)


def run_capacity(ws: Workspace) -> ExperimentResult:
    cfg, geo = ws.config, ws.geometry
    center = cfg.center or ws.origin
    r = cfg.radius
    condenser = ball_condenser(geo.system, geo.oracle, center, r, h=cfg.h)
    result = p_capacity(condenser.domain, geo.system, condenser, cfg.p)
    row = {"r": r, "h": cfg.h, "p": cfg.p, "capacity": result.value, "iterations": result.iterations}
    checks, summary = {}, [f"cap_{cfg.p:g}(B({r:g}), B({2 * r:g})) = {result.value:.6g} at h={cfg.h:g}"]

    n = geo.system.ambient_dim
    if isinstance(geo.oracle, EuclideanOracle) and 1 < cfg.p < n:
        reference = euclidean_condenser_capacity(n, cfg.p, r, 2 * r)
        error = abs(result.value - reference) / reference
        row.update(reference=reference, relative_error=error)
        checks["closed form"] = error <= CAPACITY_TOLERANCE
        summary.append(f"closed form {reference:.6g}, relative error {error:.3%}")
    else:
        annulus = annulus_check(geo.system, geo.oracle, center, min(r, ws.r0 / 2.0), cfg.p, r0=ws.r0, seed=cfg.seed)
        row.update(annulus_spread=annulus.spread)
        checks["annulus comparability"] = annulus.passed
        summary.append(f"annulus ratios {', '.join(f'{v:.4g}' for v in annulus.ratios)}")
    field_values = {"capacity_potential": (result.minimizer.values, condenser.domain)}
    return ExperimentResult("capacity", [row], dict(row), checks, summary, field_values)


def run_fatness(ws: Workspace) -> ExperimentResult:
    cfg, geo = ws.config, ws.geometry
    radii = [r for r in (cfg.radii or FATNESS_RADII) if r <= ws.r0]
    options = dict(radii=radii, n_samples=cfg.samples, threads=cfg.threads, seed=cfg.seed)
    cert = fatness_scan(ws.domain, geo.system, geo.oracle, cfg.p, **options)
    checks = {"fatness c0 > 0": cert.c0 > POSITIVE_TOLERANCE}
    summary = [f"c0 = {cert.c0:.4g} over {len(cert.table)} (sample, radius) pairs, p={cfg.p:g}"]
    payload: Dict[str, object] = {"c0": cert.c0, "r0": cert.r0, "p": cert.p}
    if cfg.q is not None:
        improved = self_improvement(ws.domain, geo.system, geo.oracle, cfg.p, (cfg.q,), **options)
        payload["self_improvement"] = improved.table
        checks[f"fat at q={cfg.q:g}"] = improved.smallest_q is not None
        summary.append(f"c0(q={cfg.q:g}) = {improved.table[float(cfg.q)]:.4g}")
    return ExperimentResult("fatness", cert.table, payload, checks, summary)


def run_whitney(ws: Workspace) -> ExperimentResult:
    decomposition = whitney(ws.domain, ws.geometry.oracle, ws.config.radius_factor)
    rows = [{"center": c, "radius": r} for c, r in decomposition.balls()]
    payload = {
        "balls": len(decomposition),
        "radius_factor": decomposition.radius_factor,
        "overlap": decomposition.overlap,
        "graph": decomposition.graph_stats,
    }
    checks = {f"clause {k}": v for k, v in decomposition.clauses.items()}
    summary = [
        f"{len(decomposition)} balls, lambda={decomposition.radius_factor:.3g}, overlap M={decomposition.overlap}",
    ]
    if decomposition.graph_stats:
        summary.append(f"max neighbour radius ratio {decomposition.graph_stats['max_radius_ratio']:.3g}")
    return ExperimentResult("whitney", rows, payload, checks, summary)


def _thickness(ws: Workspace, q: float):
    geo = ws.geometry
    interior = ws.near_boundary_points(min(ws.r0, 0.25))
    radii = ws.config.radii or (0.25,)
    return thickness_report(ws.domain, geo.volume, geo.oracle, q, interior, ws.boundary_points(), radii, seed=ws.config.seed)


def run_content(ws: Workspace) -> ExperimentResult:
    cfg = ws.config
    q = cfg.q if cfg.q is not None else cfg.p
    report = _thickness(ws, q)
    rows = [{"kind": "interior", **row} for row in report.interior_rows]
    rows += [{"kind": "boundary", **row} for row in report.boundary_rows]
    checks = {"interior thickness > 0": report.interior_score > 0, "boundary thickness > 0": report.boundary_score > 0}
    summary = [f"q={q:g}: interior score {report.interior_score:.4g}, boundary score {report.boundary_score:.4g}"]
    payload = {"q": q, "interior_score": report.interior_score, "boundary_score": report.boundary_score}
    return ExperimentResult("content", rows, payload, checks, summary)


def weight_for(cfg: ExperimentConfig, origin: Tuple[float, ...]) -> WeightSpec:
    x0 = cfg.x0 or origin
    if cfg.weight == "point":
        return WeightSpec.point(cfg.p, x0)
    if cfg.weight == "boundary":
        return WeightSpec.boundary(cfg.p, cfg.gamma)
    return WeightSpec.mixed(cfg.p, cfg.gamma, x0)


def run_hardy(ws: Workspace) -> ExperimentResult:
    cfg, geo = ws.config, ws.geometry
    spec = weight_for(cfg, ws.origin)
    report = maximize_ratio(ws.domain, spec, geo)
    row = report.to_row()
    checks = {"within bound": report.within_bound}
    summary = [
        f"weight {report.weight}, p={report.p:g}: best_ratio {report.best_ratio:.6g} ({report.method})",
        f"bound {report.bound:.6g}, margin {report.margin:.6g}" if report.bound is not None else "no closed-form bound",
    ]
    if report.radial_ratio is not None:
        summary.append(f"radial reduction {report.radial_ratio:.6g}")
    payload: Dict[str, object] = {**row, "method": report.method, "details": report.details}
    fields_out = {}
    if report.witness is not None:
        fields_out["hardy_witness"] = (report.witness.values, ws.domain)

    if cfg.s is not None and spec.kind == "mixed":
        decomposition = whitney(ws.domain, geo.oracle, cfg.radius_factor or 0.3)
        corollary = corollary_weights(ws.domain, geo, cfg.p, cfg.gamma, cfg.x0 or ws.origin, decomposition, cfg.s)
        payload["corollary"] = {
            "s": corollary.s,
            "point_fefferman_phong": corollary.point_fp.value,
            "weak_fefferman_phong": corollary.weak_fp.value,
            "weak_best_ratio": corollary.weak_hardy.best_ratio,
            "weak_norm": corollary.weak_norm,
        }
        checks["corollary conditions finite"] = corollary.passed
        summary.append(f"Fefferman-Phong sup {corollary.point_fp.value:.4g} at s={corollary.s:g}")
    return ExperimentResult("hardy", [row], payload, checks, summary, fields_out)


def run_mazya(ws: Workspace) -> ExperimentResult:
    cfg, geo = ws.config, ws.geometry
    spec = weight_for(cfg, ws.origin)
    values = evaluate_weight(spec, ws.domain, geo.oracle, geo.group)
    decomposition = whitney(ws.domain, geo.oracle, cfg.radius_factor or 0.3)
    report = mazya_check(ws.domain, geo.system, geo.oracle, values, cfg.p, decomposition, MAZYA_BALLS, cfg.threads)
    hardy = maximize_ratio(ws.domain, spec, geo, strategy="family")
    checks = {
        "capacitary estimate finite": 0.0 < report.value < math.inf,
        f"hardy ratio within factor {MAZYA_FACTOR:g}": report.consistent_with(hardy.best_ratio),
    }
    summary = [
        f"weight {spec.label}, p={cfg.p:g}: localized sup {report.value:.6g}, global sup {report.global_value:.6g}",
        f"hardy ratio {hardy.best_ratio:.6g} ({hardy.details.get('member', hardy.method)}) over {len(report.rows)} plates",
    ]
    payload = {
        "weight": spec.label,
        "p": cfg.p,
        "localized": report.value,
        "global": report.global_value,
        "hardy_ratio": hardy.best_ratio,
        "lower_estimate": report.lower_estimate,
    }
    return ExperimentResult("mazya", report.rows, payload, checks, summary)


def run_sharp(ws: Workspace) -> ExperimentResult:
    cfg, geo = ws.config, ws.geometry
    if geo.group is None:
        raise ValueError(f"sharp experiment needs a Heisenberg-type system, got {geo.system.name}")
    report = sharp_experiment(geo.group, cfg.p, R=cfg.radius, h=cfg.h, seed=cfg.seed)
    rows = [report.theorem.to_row(), report.corollary.to_row()]
    checks = {
        "theorem within bound": report.theorem.within_bound,
        "corollary within bound": report.corollary.within_bound,
        "weights consistent": report.consistency < 1e-9,
        "pushforward density matches": report.density_defect <= DENSITY_TOLERANCE,
    }
    summary = [
        f"theorem: lattice {report.theorem.best_ratio:.6g}, radial {report.theorem.radial_ratio:.6g} / {report.theorem.bound:.6g}",
        f"corollary: lattice {report.corollary.best_ratio:.6g}, radial {report.corollary.radial_ratio:.6g} / {report.corollary.bound:.6g}",
        f"consistency defect {report.consistency:.3e}, density defect {report.density_defect:.3g}",
    ]
    payload = {
        "theorem": rows[0],
        "corollary": rows[1],
        "consistency": report.consistency,
        "density_defect": report.density_defect,
    }
    fields_out = {}
    for key, part in (("theorem", report.theorem), ("corollary", report.corollary)):
        if part.witness is not None:
            fields_out[f"{key}_witness"] = (part.witness.values, part.witness.domain)
    return ExperimentResult("sharp", rows, payload, checks, summary, fields_out)



def run_chain(ws: Workspace) -> ExperimentResult:
    cfg, geo = ws.config, ws.geometry
    q = cfg.q if cfg.q is not None else max(1.0 + 0.5 * (cfg.p - 1.0), cfg.p - 0.2)
    radii = [r for r in (cfg.radii or FATNESS_RADII) if r <= ws.r0]
    options = dict(radii=radii, n_samples=cfg.samples, threads=cfg.threads, seed=cfg.seed)

    cert = fatness_scan(ws.domain, geo.system, geo.oracle, cfg.p, **options)
    improved = self_improvement(ws.domain, geo.system, geo.oracle, cfg.p, (q,), **options)
    samples = ws.near_boundary_points(min(ws.r0, 4.0 * cfg.h))
    functions = boundary_test_functions(ws.domain, 20, cfg.seed)
    pointwise = pointwise_constant(ws.domain, geo.system, geo.oracle, q, functions, samples)
    thickness = _thickness(ws, q)

    checks = {
        "fatness c0 > 0": cert.c0 > POSITIVE_TOLERANCE,
        "pointwise constant finite": pointwise.finite,
        "interior thickness > 0": thickness.interior_score > 0,
        "boundary thickness > 0": thickness.boundary_score > 0,
        "self-improvement below p": improved.smallest_q is not None and improved.smallest_q < cfg.p,
    }
    rows = [
        {"condition": "fatness", "value": cert.c0},
        {"condition": "pointwise", "value": pointwise.constant},
        {"condition": "interior_thickness", "value": thickness.interior_score},
        {"condition": "boundary_thickness", "value": thickness.boundary_score},
        {"condition": f"fatness_q={q:g}", "value": improved.table[float(q)]},
    ]
    summary = [f"{row['condition']}: {row['value']:.4g}" for row in rows]
    payload = {row["condition"]: row["value"] for row in rows}
    return ExperimentResult("chain", rows, payload, checks, summary)


def run_hardy1d(ws: Workspace) -> ExperimentResult:
    cfg = ws.config
    result = hardy_1d(cfg.p, cfg.n_grid)
    row = {"p": cfg.p, "n_grid": cfg.n_grid, "alpha": result.alpha, "best_ratio": result.best_ratio, "bound": result.bound}
    checks = {"ratio near (p/(p-1))^p": 0.95 * result.bound <= result.best_ratio <= 1.01 * result.bound}
    summary = [f"p={cfg.p:g}, n_grid={cfg.n_grid}: best ratio {result.best_ratio:.6g} at alpha={result.alpha:.6g} / {result.bound:.6g}"]
    return ExperimentResult("hardy1d", [row], dict(row), checks, summary)


RUNNERS: Dict[str, Callable[[Workspace], ExperimentResult]] = {
    "volumes": run_volumes,
    "capacity": run_capacity,
    "fatness": run_fatness,
    "whitney": run_whitney,
    "content": run_content,
    "hardy": run_hardy,
    "mazya": run_mazya,
    "sharp": run_sharp,
    "chain": run_chain,
    "hardy1d": run_hardy1d,
}


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    runner = RUNNERS[config.name]
    logger.info("running %s on %s", config.name, config.system_label)
    try:
        result = runner(Workspace(config))
    except (CCHardyError, ValueError) as e:
        raise ExperimentError(config.name, e) from e
    except Exception as e:
        logger.exception("%s: unexpected failure", config.name)
        raise ExperimentError(config.name, e) from e
    for name, ok in result.checks.items():
        if not ok:
            logger.warning("%s: check '%s' failed", config.name, name)
    if any(isinstance(v, float) and not math.isfinite(v) for v in result.payload.values()):
        logger.warning("%s: non-finite values in the report", config.name)
    return result
