"""Scenario driven command line interface with deterministic JSON reports.

    cosmotime <command> --scenario <path> [--seed N] [--out dir] [--threads k]

Exit codes: 0 when no check failed, 1 when a check failed, 2 for usage and scenario errors.
"""
import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from CosmoTime import __version__
from CosmoTime.domain import RegularDomain, GradientLine
from CosmoTime.lamination import MeasuredLamination, Leaf, SpineComplex, build_spine, tree_distance, TREE
from CosmoTime.levelset import (MeshSettings, ConvexSurface, level_distance, past_sweep, future_sweep, compare_levels,
                                project_curve_length, random_level_polylines, pairing_bound_check,
                                convex_surface_comparison, tangent_sign_check, estimate_gauss_curvature, mesh_level,
                                affine_limit, write_sweep_csv, SWEEP_COLUMNS, PAST_GAP, PAST_SCALE, _map)
from CosmoTime.metrics import (SampledMetric, cat0_four_point, tree_four_point, approx_midpoint_defect,
                               bilipschitz_ratio, sample_quadruples, quadruple_error, margin_histogram)
from CosmoTime.minkowski import hyperbolic_point, hyperbolic_distance, normalize_timelike
from CosmoTime.sampling import Sampling
from CosmoTime.utils import NumpyEncoder, CosmoTimeError, ScenarioError, UnknownRegion, debug_info
from CosmoTime.wick import (WickGeometry, wick_level_distance, wick_bilip_bounds, curvature_transport,
                            wick_gauss_curvature, ds_time, FLAT, DE_SITTER, ANTI_DE_SITTER)

SCHEMA = 1
OUT_ENV = "COSMOTIME_OUT"
DEFAULT_OUT = "cosmotime_out"

PASS = "pass"
FAIL = "fail"
INFO = "info"

THEOREM = "theorem bound"
TOLERANCE = "numerical tolerance"

RECONSTRUCTION_TOLERANCE = 1e-10
LINE_TOLERANCE = 1e-8
WICK_IDENTITY_TOLERANCE = 1e-12
PAIRING_TOLERANCE = 1e-9
CAT0_PASS_FRACTION = 0.995
TREE_DEFECT = 0.02
VERTEX_CURVATURE = 0.05
FLAT_CURVATURE = 0.02

DEFAULT_SWEEPS = {"past": [0.4, 0.2, 0.1, 0.05], "future": [5.0, 20.0, 100.0],
                  "compare": [[0.4, 0.2], [1.0, 0.5]], "wick": [0.4, 0.2, 0.1], "curvature": [1.0]}
DEFAULT_CHECKS = {"quadruples": 1000, "cat0_points": 6, "polylines": 100, "pairing_samples": 10000,
                  "surface_pairs": 2, "curvature_nodes": 20}


@dataclass
class Scenario:
    """Validated scenario with its constructed domain and resolved probes

    Attributes:
        name (str): Scenario name
        dimension (int): Spatial dimension n
        geometry (str): "flat", "ds" or "ads"
        seed (int): Seed of all random draws
        digest (str): sha256 of the scenario file
        domain (RegularDomain): The domain
        probes (dict): Probe name -> GradientLine, in file order
        pairs (list): Triples (pair id, probe name, probe name)
        mesh (MeshSettings): Distance discretization
        level (float): Level used by single level commands
    """
    name : str
    dimension : int
    geometry : str
    seed : int
    digest : str
    domain : RegularDomain
    probes : dict
    pairs : list
    mesh : MeshSettings
    level : float = 1.0
    lamination : MeasuredLamination = None
    graph : object = None
    sweeps : dict = field(default_factory=dict)
    checks : dict = field(default_factory=dict)
    surfaces : list = field(default_factory=list)
    eval_points : list = field(default_factory=list)

    def line_pairs(self) -> list:
        return [(pid, self.probes[a], self.probes[b]) for pid, a, b in self.pairs]


@dataclass
class RunContext:
    seed : int
    out : str
    threads : int = 1
    debug : bool = False

    def sampler(self, M : int, m : int, stream : str) -> Sampling:
        return Sampling(M, m, seed=self.seed, stream=stream, debug=self.debug)

    def path(self, scenario : Scenario, suffix : str) -> str:
        return os.path.join(self.out, f"{scenario.name}_{suffix}")


def _field(data : dict, key : str, path : str, default = None, required : bool = False):
    if key not in data:
        if required:
            raise ScenarioError("missing field", f"{path}{key}")
        return default
    return data[key]


def _resolve_probe(domain : RegularDomain, graph, probe : dict, path : str) -> GradientLine:
    """Gradient line of a probe given by region, vertex, edge, face or point"""
    try:
        if "region" in probe:
            if graph is None:
                raise ScenarioError("region probes need a lamination", path)
            region = int(probe["region"])
            graph.check_region(region)
            vertex = domain.spine.region_vertex[region]
            N = hyperbolic_point(probe["boost"]) if "boost" in probe else normalize_timelike(graph.points[region])
            return domain.gradient_line(domain.spine.vertices[vertex], N)
        if "vertex" in probe:
            return domain.vertex_line(int(probe["vertex"]), probe.get("boost"))
        if "edge" in probe:
            return domain.edge_line(int(probe["edge"]), float(probe["s"]), float(probe.get("rapidity", 0.0)))
        if "face" in probe:
            return domain.face_line(int(probe["face"]), probe["coords"])
        if "point" in probe:
            return domain.line_through(np.asarray(probe["point"], dtype=float))
    except (KeyError, IndexError, TypeError, AssertionError, UnknownRegion) as e:
        raise ScenarioError(f"unresolvable probe ({e})", path)
    raise ScenarioError("probe needs one of region, vertex, edge, face, point", path)


def parse_scenario(path : str, debug : bool = False, seed : int = None) -> Scenario:
    """Reads and validates a scenario file

    Random laminations ("lamination": {"random": {"leaves": k}}) are drawn from the scenario seed.

    Args:
        path (str): Path of the JSON scenario
        seed (int, optional): Overrides the seed of the file
        debug (bool, optional): If True, prints debug information. Default is False

    Returns:
        Scenario: Validated scenario

    Raises:
        ScenarioError: For unreadable, malformed or invalid scenarios, naming the field
        CrossingLeaves: If two leaves of the lamination cross
        AchronalityViolation, NonConvexDomain: If an explicit spine is invalid
    """
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as e:
        raise ScenarioError(f"cannot read scenario ({e.strerror})", "path")
    try:
        data = json.loads(raw.decode("utf-8"))
    except json.JSONDecodeError as e:
        raise ScenarioError(f"line {e.lineno}, column {e.colno}: {e.msg}", "json")
    if not isinstance(data, dict):
        raise ScenarioError("top level must be an object", "json")
    if _field(data, "schema", "", required=True) != SCHEMA:
        raise ScenarioError(f"unsupported schema, expected {SCHEMA}", "schema")

    name = str(_field(data, "name", "", os.path.splitext(os.path.basename(path))[0]))
    n = _field(data, "dimension", "", 2)
    if n not in (2, 3):
        raise ScenarioError("dimension must be 2 or 3", "dimension")
    geometry = _field(data, "geometry", "", FLAT)
    if geometry not in (FLAT, DE_SITTER, ANTI_DE_SITTER):
        raise ScenarioError("geometry must be flat, ds or ads", "geometry")
    if geometry != FLAT and n != 2:
        raise ScenarioError("de Sitter and anti de Sitter scenarios require dimension 2", "geometry")
    seed = _field(data, "seed", "", 0) if seed is None else seed
    if not isinstance(seed, int) or seed < 0:
        raise ScenarioError("seed must be a non-negative integer", "seed")
    if ("lamination" in data) == ("spine" in data):
        raise ScenarioError("exactly one of lamination and spine is required", "lamination")

    lam, graph = None, None
    if "lamination" in data:
        if n != 2:
            raise ScenarioError("laminations live in dimension 2", "dimension")
        random_data = _field(data["lamination"], "random", "lamination.")
        if random_data is not None:
            try:
                lam = Sampling(1, 1, seed=seed, stream="lamination", debug=debug).random_lamination(
                    int(random_data.get("leaves", 3)), tuple(float(w) for w in random_data.get("weights", (0.3, 1.0))))
            except (AttributeError, IndexError, TypeError, ValueError, AssertionError) as e:
                raise ScenarioError(f"random laminations need leaves >= 1 and positive weights ({e})",
                                    "lamination.random")
        else:
            leaves = []
            for k, leaf in enumerate(_field(data["lamination"], "leaves", "lamination.", [])):
                try:
                    leaves.append(Leaf((float(leaf[0]), float(leaf[1])), float(leaf[2])))
                except (IndexError, TypeError, ValueError, AssertionError) as e:
                    raise ScenarioError(f"leaves are [theta1, theta2, weight] ({e})", f"lamination.leaves[{k}]")
            lam = MeasuredLamination(leaves, debug=debug)
        base_point = _field(data["lamination"], "base_point", "lamination.")
        graph = lam.validate(None if base_point is None else np.asarray(base_point, dtype=float))
        spine = build_spine(lam, graph, debug=debug)
    else:
        spine_data = data["spine"]
        try:
            spine = SpineComplex(_field(spine_data, "vertices", "spine.", required=True),
                                 _field(spine_data, "edges", "spine.", []), _field(spine_data, "faces", "spine.", []),
                                 _field(spine_data, "kind", "spine.", TREE))
        except (TypeError, ValueError, IndexError, AssertionError) as e:
            raise ScenarioError(f"invalid spine ({e})", "spine")
        if spine.dimension != n:
            raise ScenarioError(f"vertices must have {n + 1} coordinates", "spine.vertices")
    domain = RegularDomain(spine, seed=seed, debug=debug)

    mesh_data = _field(data, "mesh", "", {})
    try:
        mesh = MeshSettings(float(mesh_data.get("h", 0.1)), int(mesh_data.get("refinements", 3)),
                            None if mesh_data.get("window") is None else np.asarray(mesh_data["window"], dtype=float))
    except (TypeError, ValueError, AssertionError) as e:
        raise ScenarioError(f"invalid mesh settings ({e})", "mesh")
    level = float(mesh_data.get("level", 1.0))
    if level <= 0:
        raise ScenarioError("level must be positive", "mesh.level")

    probes = {}
    for k, probe in enumerate(_field(data, "probes", "", [])):
        probe_name = str(probe.get("name", f"p{k}"))
        if probe_name in probes:
            raise ScenarioError("duplicate probe name", f"probes[{k}].name")
        probes[probe_name] = _resolve_probe(domain, graph, probe, f"probes[{k}]")
    pairs = []
    pair_names = _field(data, "pairs", "", None)
    if pair_names is None:
        pair_names = list(combinations(probes, 2))
    for k, (a, b) in enumerate(pair_names):
        if a not in probes or b not in probes:
            raise ScenarioError("pair refers to an unknown probe", f"pairs[{k}]")
        pairs.append((f"{a}-{b}", a, b))

    sweeps = dict(DEFAULT_SWEEPS, **_field(data, "sweeps", "", {}))
    checks = dict(DEFAULT_CHECKS, **_field(data, "checks", "", {}))
    surfaces = _field(data, "surfaces", "", [])
    eval_points = _field(data, "eval", "", {}).get("points", [])
    for k, p in enumerate(eval_points):
        if len(p) != n + 1:
            raise ScenarioError(f"points need {n + 1} coordinates", f"eval.points[{k}]")
    debug_info(debug, f"Scenario {name}: {len(probes)} probes, {len(pairs)} pairs")
    return Scenario(name, n, geometry, seed, hashlib.sha256(raw).hexdigest(), domain, probes, pairs, mesh, level,
                    lam, graph, sweeps, checks, surfaces, eval_points)


def record(name : str, status : str, values : dict = None, errors : dict = None, thresholds : list = None) -> dict:
    return {"name": name, "status": status, "values": values or {}, "errors": errors or {},
            "thresholds": thresholds or []}


def threshold(name : str, value : float, provenance : str) -> dict:
    return {"name": name, "value": value, "provenance": provenance}


def _guarded(name : str, function):
    """Runs a check, turning package errors into fail records"""
    try:
        return function()
    except (CosmoTimeError, AssertionError) as e:
        return [record(name, FAIL, {"error": f"{type(e).__name__}: {e}"})]


def _stratum(stratum) -> dict:
    return {"kind": stratum.kind, "index": stratum.index, "coords": list(stratum.coords)}


def check_eval(sc : Scenario, ctx : RunContext) -> list:
    records = []
    for k, p in enumerate(sc.eval_points):
        p = np.asarray(p, dtype=float)
        name = f"eval:{k:03d}"
        if not sc.domain.contains(p):
            records.append(record(name, INFO, {"point": p, "contains": False}))
            continue
        ev = sc.domain.cosmological_time(p)
        residual = float(np.max(np.abs(p - ev.r - ev.T * ev.N)))
        records.append(record(name, PASS if residual <= RECONSTRUCTION_TOLERANCE else FAIL,
                              {"point": p, "contains": True, "T": ev.T, "r": ev.r, "N": ev.N,
                               "stratum": _stratum(ev.stratum), "ambiguous": ev.ambiguous},
                              {"reconstruction": residual},
                              [threshold("reconstruction", RECONSTRUCTION_TOLERANCE, TOLERANCE)]))
    for probe, line in sc.probes.items():
        ev = sc.domain.cosmological_time(line.point_at(1.0))
        gap = float(max(abs(ev.T - 1.0), np.max(np.abs(ev.r - line.r))))
        records.append(record(f"probe:{probe}", PASS if gap <= LINE_TOLERANCE else FAIL,
                              {"r": line.r, "N": line.N, "stratum": _stratum(line.stratum)}, {"round_trip": gap},
                              [threshold("round_trip", LINE_TOLERANCE, TOLERANCE)]))
    return records


def check_dist(sc : Scenario, ctx : RunContext) -> list:
    a = sc.level
    tolerance = 2 * sc.mesh.spacing(a)

    def task(pair):
        pid, line1, line2 = pair

        def compute():
            forward = level_distance(sc.domain, a, line1, line2, sc.mesh, ctx.debug)
            backward = level_distance(sc.domain, a, line2, line1, sc.mesh, ctx.debug)
            asymmetry = abs(forward.extrapolated - backward.extrapolated)
            signs = tangent_sign_check(forward)
            passed = asymmetry <= forward.error + backward.error + LINE_TOLERANCE and signs <= tolerance
            return [record(f"dist:{pid}", PASS if passed else FAIL,
                           {"level": a, "value": forward.value, "extrapolated": forward.extrapolated,
                            "history": forward.history, "tangent_sign": signs, "asymmetry": asymmetry},
                           {"extrapolated": forward.error},
                           [threshold("tangent_sign", tolerance, TOLERANCE),
                            threshold("asymmetry", "combined error bars", TOLERANCE)])]
        return _guarded(f"dist:{pid}", compute)
    return [r for rs in _map(task, sc.line_pairs(), ctx.threads) for r in rs]


def _tree_oracle_record(sc : Scenario) -> list:
    if sc.lamination is None:
        return []
    singular = sc.domain.singular_set().vertex_matrix()
    worst = 0.0
    for r1 in sc.graph.regions:
        for r2 in sc.graph.regions:
            v1, v2 = sc.domain.spine.region_vertex[r1], sc.domain.spine.region_vertex[r2]
            worst = max(worst, abs(singular[v1, v2] - tree_distance(sc.graph, sc.lamination, r1, r2)))
    return [record("oracle:tree-distance", PASS if worst <= 1e-12 else FAIL, {"max_difference": worst},
                   thresholds=[threshold("max_difference", 1e-12, TOLERANCE)])]


def check_sweep_past(sc : Scenario, ctx : RunContext) -> list:
    result = past_sweep(sc.domain, sc.line_pairs(), sc.sweeps["past"], sc.mesh, threads=ctx.threads, debug=ctx.debug)
    write_sweep_csv(ctx.path(sc, "sweep_past.csv"), result["rows"])
    records = _tree_oracle_record(sc)
    for s in result["summary"]:
        records.append(record(f"sweep-past:{s['pair_id']}", PASS if s["passed"] else FAIL,
                              {"levels": s["levels"], "values": s["values"], "limit": s["limit"],
                               "oracle": s["oracle"], "gap": s["gap"], "retracted_lengths": s["retracted_lengths"]},
                              {"values": s["errors"], "limit": s["error"]},
                              [threshold("relative_gap", PAST_GAP, TOLERANCE),
                               threshold("gap_scale", PAST_SCALE, TOLERANCE)]))
    return records


def check_sweep_future(sc : Scenario, ctx : RunContext) -> list:
    result = future_sweep(sc.domain, sc.line_pairs(), sc.sweeps["future"], sc.mesh, threads=ctx.threads, debug=ctx.debug)
    write_sweep_csv(ctx.path(sc, "sweep_future.csv"), result["rows"])
    return [record(f"sweep-future:{s['pair_id']}", PASS if s["passed"] else FAIL,
                   {"levels": sc.sweeps["future"], "values": s["values"], "target": s["target"], "gaps": s["gaps"],
                    "monotone": s["monotone"]}, {"values": s["errors"]},
                   [threshold("relative_gap", 0.05, TOLERANCE), threshold("absolute_gap", 0.02, TOLERANCE)])
            for s in result["summary"]]


def check_wick(sc : Scenario, ctx : RunContext) -> list:
    if sc.geometry == FLAT:
        return [record("wick", FAIL, {"error": "scenario geometry is flat"})]
    geom = WickGeometry(sc.geometry, sc.domain)
    levels = sorted(sc.sweeps["wick"], reverse=True)
    singular = sc.domain.singular_set()
    tasks = [(pair, a) for pair in sc.line_pairs() for a in levels]

    def task(item):
        (pid, line1, line2), a = item
        flat = level_distance(sc.domain, geom.flat_level(a), line1, line2, sc.mesh)
        return flat, wick_level_distance(geom, a, line1, line2, sc.mesh)

    results = _map(task, tasks, ctx.threads, ctx.debug, desc="wick")
    rows, records = [], []
    for k, (pid, line1, line2) in enumerate(sc.line_pairs()):
        chunk = results[k * len(levels):(k + 1) * len(levels)]
        oracle = singular.distance(line1.r, line2.r)
        identity = max(abs(w.value - geom.length_factor(a) * f.value) / max(w.value, 1e-300)
                       for a, (f, w) in zip(levels, chunk))
        values = [w.extrapolated for _, w in chunk]
        errors = [w.error for _, w in chunk]
        for a, v, e in zip(levels, values, errors):
            rows.append({"pair_id": pid, "a": a, "value": v, "error": e, "oracle": oracle,
                         "gap": abs(v - oracle), "geometry": sc.geometry})
        ratio_ok = True
        bounds = []
        for (a, va, ea), (b, vb, eb) in zip(zip(levels, values, errors), list(zip(levels, values, errors))[1:]):
            lower, upper = wick_bilip_bounds(sc.geometry, a, b)
            ratio = va / vb if vb > 0 else np.nan
            err = ratio * (ea / va + eb / vb) if va > 0 and vb > 0 else 0.0
            bounds.append({"a": a, "b": b, "ratio": ratio, "error": err, "lower": np.sqrt(lower), "upper": np.sqrt(upper)})
            if np.isfinite(ratio) and not (np.sqrt(lower) - err <= ratio <= np.sqrt(upper) + err):
                ratio_ok = False
        values_dict = {"levels": levels, "values": values, "identity": identity, "ratios": bounds, "oracle": oracle,
                       "length_factors": [geom.length_factor(a) for a in levels],
                       "metric_factors": [1.0 / (1.0 - geom.flat_level(a) ** 2) if sc.geometry == DE_SITTER
                                          else 1.0 / (1.0 + geom.flat_level(a) ** 2) for a in levels]}
        passed = identity <= WICK_IDENTITY_TOLERANCE and ratio_ok
        thresholds = [threshold("identity", WICK_IDENTITY_TOLERANCE, TOLERANCE),
                      threshold("ratio_bounds", "sqrt of the metric bounds", THEOREM)]
        if len(levels) >= 3:
            limit, error = affine_limit(levels, values, errors)
            gap = abs(limit - oracle) / max(oracle, PAST_SCALE)
            values_dict.update({"limit": limit, "gap": gap})
            passed = passed and gap <= PAST_GAP
            thresholds.append(threshold("relative_gap", PAST_GAP, TOLERANCE))
        records.append(record(f"wick:{pid}", PASS if passed else FAIL, values_dict, {"values": errors}, thresholds))
    write_sweep_csv(ctx.path(sc, f"wick_{sc.geometry}.csv"), rows, SWEEP_COLUMNS + ["geometry"])
    return records


def _level_metric(sc : Scenario, ctx : RunContext, lines : dict, a : float) -> SampledMetric:
    ids = list(lines)
    pairs = list(combinations(range(len(ids)), 2))

    def task(pair):
        i, j = pair
        return level_distance(sc.domain, a, lines[ids[i]], lines[ids[j]], sc.mesh)

    estimates = _map(task, pairs, ctx.threads, ctx.debug, desc="level metric")
    d = np.zeros((len(ids), len(ids)))
    e = np.zeros_like(d)
    for (i, j), est in zip(pairs, estimates):
        d[i, j] = d[j, i] = max(est.extrapolated, 0.0)
        e[i, j] = e[j, i] = max(est.error, LINE_TOLERANCE)
    return SampledMetric(ids, d, e)


def check_cat0(sc : Scenario, ctx : RunContext) -> list:
    def compute():
        a = sc.level
        lines = dict(sc.probes)
        count = int(sc.checks["cat0_points"])
        if count > 0:
            sampler = ctx.sampler(count, sc.dimension, "cat0-lines")
            anchors = np.asarray([line.point_at(a)[1:] for line in lines.values()] or [np.zeros(sc.dimension)])
            sampler.set_domainBounds(np.stack([anchors.min(axis=0) - 0.5, anchors.max(axis=0) + 0.5], axis=1))
            for k, line in enumerate(sampler.gradient_lines(sc.domain, a)):
                lines[f"s{k}"] = line
        metric = _level_metric(sc, ctx, lines, a)
        metric.to_csv(ctx.path(sc, "cat0_metric.csv"))
        quads = sample_quadruples(metric, int(sc.checks["quadruples"]), ctx.sampler(1, 1, "cat0-quadruples"))
        margins = np.asarray([cat0_four_point(metric, q) for q in quads])
        errors = np.asarray([quadruple_error(metric, q) for q in quads])
        margin_histogram(margins, filename=ctx.path(sc, "cat0_margins.csv"))
        ok = margins >= -3 * errors
        fraction = float(np.mean(ok)) if len(quads) else 1.0
        passed = fraction >= CAT0_PASS_FRACTION and not np.any(margins < -5 * errors)
        defects = [approx_midpoint_defect(metric, x, y) for x, y in combinations(metric.ids, 2)]
        return [record("cat0", PASS if passed else FAIL,
                       {"level": a, "points": len(metric), "quadruples": len(quads), "pass_fraction": fraction,
                        "min_margin": float(margins.min()) if len(margins) else None,
                        "max_midpoint_defect": max(defects) if defects else None},
                       {"max_quadruple_error": float(errors.max()) if len(errors) else 0.0},
                       [threshold("margin", "-3 x error", TOLERANCE),
                        threshold("pass_fraction", CAT0_PASS_FRACTION, TOLERANCE),
                        threshold("hard_margin", "-5 x error", TOLERANCE)])]
    return _guarded("cat0", compute)


def _pairings(q):
    """The three orderings of a 4-set that put each pair of pairs on the left hand side"""
    x, y, z, w = q
    return [(x, y, z, w), (x, z, y, w), (x, w, y, z)]


def check_tree(sc : Scenario, ctx : RunContext) -> list:
    def compute():
        ids = list(sc.probes)
        if len(ids) < 4:
            return [record("tree", INFO, {"reason": "fewer than 4 probes"})]
        pairs = [(f"{a}-{b}", sc.probes[a], sc.probes[b]) for a, b in combinations(ids, 2)]
        result = past_sweep(sc.domain, pairs, sc.sweeps["past"], sc.mesh, threads=ctx.threads, debug=ctx.debug)
        d = np.zeros((len(ids), len(ids)))
        e = np.zeros_like(d)
        for (i, j), s in zip(combinations(range(len(ids)), 2), result["summary"]):
            d[i, j] = d[j, i] = max(s["limit"], 0.0)
            e[i, j] = e[j, i] = s["error"]
        metric = SampledMetric(ids, d, e)
        scale = float(d.max())
        quadruples = [p for q in combinations(ids, 4) for p in _pairings(q)]
        defects = [tree_four_point(metric, q) for q in quadruples]
        errors = [quadruple_error(metric, q) for q in quadruples]
        worst = max(defect - err for defect, err in zip(defects, errors))
        return [record("tree", PASS if worst <= TREE_DEFECT * scale else FAIL,
                       {"max_defect": max(defects), "scale": scale, "quadruples": len(defects)},
                       {"max_quadruple_error": max(errors)},
                       [threshold("defect_fraction", TREE_DEFECT, TOLERANCE)])]
    return _guarded("tree", compute)


def check_bilip(sc : Scenario, ctx : RunContext) -> list:
    records = []

    def against_hyperbolic():
        a = sc.level
        if len(sc.probes) < 2:
            return [record("bilip:hyperbolic", INFO, {"reason": "fewer than 2 probes"})]
        metric = _level_metric(sc, ctx, sc.probes, a)
        ids = metric.ids
        H = np.asarray([[a * float(hyperbolic_distance(sc.probes[x].N, sc.probes[y].N)) for y in ids] for x in ids])
        H = 0.5 * (H + H.T)
        np.fill_diagonal(H, 0.0)
        low, high = bilipschitz_ratio(metric, SampledMetric(ids, H, np.full(H.shape, LINE_TOLERANCE)))
        return [record("bilip:hyperbolic", INFO, {"level": a, "min_ratio": low, "max_ratio": high})]
    records += _guarded("bilip:hyperbolic", against_hyperbolic)

    for a, b in sc.sweeps["compare"]:
        name = f"bilip:levels-{a}-{b}"

        def levels(a=a, b=b, name=name):
            report = compare_levels(sc.domain, a, b, [(l1, l2) for _, l1, l2 in sc.line_pairs()], sc.mesh,
                                    ctx.threads, ctx.debug)
            return [record(name, FAIL if report["violations"] else PASS,
                           {"min_ratio": report["min"], "max_ratio": report["max"], "ratios": report["ratios"],
                            "violations": report["violations"]},
                           {"a": report["errors_a"], "b": report["errors_b"]},
                           [threshold("lower", 1.0, THEOREM), threshold("upper_metric", report["bound"], THEOREM)])]
        records += _guarded(name, levels)
    return records


def check_projection(sc : Scenario, ctx : RunContext) -> list:
    records = []
    count = int(sc.checks["polylines"])
    vertices = sc.domain.spine.vertices[:, 1:]
    for a, b in sc.sweeps["compare"]:
        name = f"projection:{a}-{b}"

        def compute(a=a, b=b, name=name):
            sampler = ctx.sampler(count, sc.dimension, name)
            sampler.set_domainBounds(np.stack([vertices.min(axis=0) - 1.0, vertices.max(axis=0) + 1.0], axis=1))
            tolerance = 2 * sc.mesh.h
            worst = -np.inf
            for polyline in random_level_polylines(sc.domain, b, count, sampler):
                Lb, La = project_curve_length(sc.domain, polyline, a)
                worst = max(worst, Lb - La)
            return [record(name, PASS if worst <= tolerance else FAIL, {"polylines": count, "max_excess": worst},
                           thresholds=[threshold("excess", tolerance, TOLERANCE)])]
        records += _guarded(name, compute)
    return records


def _surface_window(sc : Scenario, surface : dict) -> np.ndarray:
    if surface.get("window") is not None:
        return np.asarray(surface["window"], dtype=float)
    vertices = sc.domain.spine.vertices[:, 1:]
    return np.stack([vertices.min(axis=0) - 1.0, vertices.max(axis=0) + 1.0], axis=1)


def check_pairing(sc : Scenario, ctx : RunContext) -> list:
    records = []
    surfaces = sc.surfaces or [{"shift": [0.05] + [0.0] * sc.dimension, "level": 1.0}]
    for k, surface in enumerate(surfaces):
        name = f"pairing:{k:02d}"

        def compute(k=k, surface=surface, name=name):
            window = _surface_window(sc, surface)
            surf = ConvexSurface.shifted(sc.domain, surface["shift"], float(surface["level"]), window, ctx.debug)
            surf.validate(sc.domain, ctx.sampler(1000, sc.dimension, f"{name}-validate"))
            out = []
            geometries = [FLAT] if sc.geometry == FLAT else [FLAT, sc.geometry]
            for geometry in geometries:
                report = pairing_bound_check(sc.domain, surf, int(sc.checks["pairing_samples"]), ctx.seed, geometry)
                ok = report["margin"] is None or report["margin"] >= -PAIRING_TOLERANCE
                out.append(record(f"{name}:{geometry}", PASS if ok else FAIL, report,
                                  thresholds=[threshold("bound", report["bound"], THEOREM),
                                              threshold("margin", -PAIRING_TOLERANCE, TOLERANCE)]))
            count = int(sc.checks["surface_pairs"])
            if count > 0:
                sampler = ctx.sampler(count, sc.dimension, f"{name}-pairs")
                center = window.mean(axis=1, keepdims=True)
                sampler.set_domainBounds(center + 0.5 * (window - center))
                ends = []
                for _ in range(2):
                    sampler.random_uniform(overwrite=True)
                    ends.append(sampler.samples().copy())
                comparison = convex_surface_comparison(sc.domain, surf, list(zip(ends[0], ends[1])), sc.mesh,
                                                       ctx.seed, threads=ctx.threads, debug=ctx.debug)
                out.append(record(f"{name}:comparison", FAIL if comparison["violations"] else PASS, comparison,
                                  thresholds=[threshold("ratio_lower", comparison["K"] ** -2, THEOREM),
                                              threshold("ratio_upper", comparison["K"] ** 2, THEOREM)]))
            return out
        records += _guarded(name, compute)
    return records


def check_curvature(sc : Scenario, ctx : RunContext) -> list:
    if sc.dimension != 2:
        return [record("curvature", INFO, {"reason": "curvature is estimated in dimension 2"})]
    records = []
    vertices = sc.domain.spine.vertices[:, 1:]
    for a in sc.sweeps["curvature"]:
        name = f"curvature:{a}"

        def compute(a=a, name=name):
            h = a / 20.0
            window = np.stack([vertices.min(axis=0) - a, vertices.max(axis=0) + a], axis=1)
            mesh = mesh_level(sc.domain, a, window, h, ctx.debug)
            index = np.arange(len(mesh.X)).reshape(mesh.shape)
            nodes = []
            for node in mesh.interior_nodes(2):
                i, j = np.unravel_index(node, mesh.shape)
                if np.all(mesh.strata[index[i - 2:i + 3, j - 2:j + 3]] == mesh.strata[node]):
                    nodes.append(node)
            count = min(int(sc.checks["curvature_nodes"]), len(nodes))
            if count == 0:
                return [record(name, INFO, {"reason": "no node with a smooth neighbourhood"})]
            chosen = sorted(ctx.sampler(count, 1, name).generator.choice(nodes, count, replace=False))
            worst_vertex, worst_flat = 0.0, 0.0
            wick = []
            for node in chosen:
                k = estimate_gauss_curvature(mesh, node)
                kind, _ = sc.domain.strata[mesh.strata[node]]
                if kind == "vertex":
                    # hyperboloid of radius a, transported from radius a/2
                    expected = curvature_transport(2.0 / a, 2.0 / a, a / 2.0)
                    worst_vertex = max(worst_vertex, abs(k - expected) / abs(expected))
                    if sc.geometry == DE_SITTER and a < 1:
                        s = ds_time(a)
                        # Gauss equation in de Sitter space
                        target = 1.0 + curvature_transport(1.0 / np.tanh(s / 2), 1.0 / np.tanh(s / 2), s / 2, DE_SITTER)
                        wick.append(abs(wick_gauss_curvature(k, a, DE_SITTER) - target) / abs(target))
                else:
                    worst_flat = max(worst_flat, abs(k))
            passed = worst_vertex <= VERTEX_CURVATURE and worst_flat <= FLAT_CURVATURE
            values = {"nodes": count, "vertex_relative_error": worst_vertex, "flat_abs_error": worst_flat}
            if wick:
                values["de_sitter_relative_error"] = max(wick)
                passed = passed and max(wick) <= VERTEX_CURVATURE
            return [record(name, PASS if passed else FAIL, values,
                           thresholds=[threshold("vertex_relative", VERTEX_CURVATURE, TOLERANCE),
                                       threshold("flat_absolute", FLAT_CURVATURE, TOLERANCE)])]
        records += _guarded(name, compute)
    return records


HANDLERS = {"eval": check_eval, "dist": check_dist, "sweep-past": check_sweep_past,
            "sweep-future": check_sweep_future, "wick": check_wick, "check-cat0": check_cat0,
            "check-tree": check_tree, "check-bilip": check_bilip, "check-projection": check_projection,
            "check-pairing": check_pairing, "check-curvature": check_curvature}
COMMANDS = sorted(HANDLERS)


def run(command : str, scenario : Scenario, seed : int = None, out : str = None, threads : int = 1,
        debug : bool = False) -> dict:
    """Runs a command on a scenario

    Args:
        command (str): One of COMMANDS
        scenario (Scenario): Validated scenario
        seed (int, optional): Overrides the scenario seed
        out (str, optional): Output directory of the sidecar files, default from $COSMOTIME_OUT
        threads (int, optional): Worker threads for independent computations. Default is 1

    Returns:
        dict: Report with checks sorted by name and the overall status
    """
    assert command in HANDLERS, f"Unknown command {command}"
    assert threads >= 1, "At least one thread is required"
    seed = scenario.seed if seed is None else seed
    out = out or os.environ.get(OUT_ENV, DEFAULT_OUT)
    os.makedirs(out, exist_ok=True)
    ctx = RunContext(seed, out, threads, debug)
    records = _guarded(command, lambda: HANDLERS[command](scenario, ctx))
    records = sorted(records, key=lambda r: r["name"])
    status = FAIL if any(r["status"] == FAIL for r in records) else PASS
    return {"artifact": "CosmoTime", "version": __version__, "command": command, "scenario": scenario.name,
            "scenario_hash": scenario.digest, "seed": seed, "status": status, "checks": records}


def main(argv : list = None) -> int:
    parser = argparse.ArgumentParser(prog="cosmotime", description="Cosmological time checks on regular domains")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--scenario", required=True, help="Path of the JSON scenario")
    parser.add_argument("--seed", type=int, default=None, help="Overrides the scenario seed")
    parser.add_argument("--out", default=None, help=f"Output directory, default ${OUT_ENV} or {DEFAULT_OUT}")
    parser.add_argument("--threads", type=int, default=1, help="Worker threads")
    parser.add_argument("--debug", action="store_true", help="Prints debug information")
    args = parser.parse_args(argv)
    if args.threads < 1 or (args.seed is not None and args.seed < 0):
        parser.error("threads must be positive and seeds non-negative")
    try:
        scenario = parse_scenario(args.scenario, debug=args.debug, seed=args.seed)
    except (CosmoTimeError, AssertionError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    report = run(args.command, scenario, args.seed, args.out, args.threads, args.debug)
    text = json.dumps(report, cls=NumpyEncoder, sort_keys=True, indent=2, allow_nan=False)
    print(text)
    out = args.out or os.environ.get(OUT_ENV, DEFAULT_OUT)
    with open(os.path.join(out, f"{scenario.name}_{args.command}.json"), "w") as f:
        f.write(text + "\n")
    return 1 if report["status"] == FAIL else 0


if __name__ == "__main__":
    sys.exit(main())
