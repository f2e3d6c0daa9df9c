"""Cosmological level surfaces of regular domains and their intrinsic distances.

A level S_a is the graph x^0 = h_a(xbar) over the base plane. Distances on S_a are
computed as upper bounds: a shortest path on a grid graph with diagonals is
shortened on the exact graph by L-BFGS-B, the polyline is subdivided and
shortened again, and the sequence of lengths is extrapolated in h^2.
"""
import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.optimize import minimize
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra
from tqdm.autonotebook import tqdm

from CosmoTime.domain import RegularDomain, GradientLine
from CosmoTime.minkowski import lorentz_dot, lorentz_norm2, spacelike_length, hyperbolic_distance
from CosmoTime.sampling import Sampling
from CosmoTime.utils import (debug_info, WindowTooSmall, EmptyMesh, OffLevel, BoundaryNode,
                             OutsideDomain)

LEVEL_TOLERANCE = 1e-9
OFF_LEVEL_TOLERANCE = 1e-6
MAX_NODES = 40000
SHORTENING_PASSES = 3
WINDOW_GROWTH = 2.0
MAX_WINDOW_GROWTHS = 3
BOUNDARY_TOLERANCE = 1e-9
PAST_GAP = 0.02
PAST_SCALE = 0.1
FUTURE_GAP = 0.05
FUTURE_ABSOLUTE_GAP = 0.02

SWEEP_COLUMNS = ["pair_id", "a", "value", "error", "oracle", "gap"]


@dataclass
class MeshSettings:
    """Discretization parameters shared by all distance computations

    Attributes:
        h (float): Grid spacing at levels a <= 1, scaled by a above
        refinements (int): Number of resolutions h, h/2, h/4, ... of the shortened path
        window (numpy.ndarray): Optional fixed window (n, 2); None selects it from the footpoints
        passes (int): Number of shortening passes per resolution
    """
    h : float = 0.1
    refinements : int = 3
    window : np.ndarray = None
    passes : int = SHORTENING_PASSES

    def __post_init__(self):
        assert self.h > 0, "Mesh spacing must be positive"
        assert self.refinements >= 1, "At least one resolution is required"
        assert self.passes >= 1, "At least one shortening pass is required"

    def spacing(self, a : float) -> float:
        return self.h * max(1.0, a)


@dataclass
class LevelMesh:
    """Grid graph with diagonals on a cosmological level

    Attributes:
        domain (RegularDomain): The domain
        level (float): Cosmological time a of the level
        window (numpy.ndarray): Box (n, 2) in the base plane
        h (float): Grid spacing
        shape (tuple): Number of nodes per axis
        X (numpy.ndarray): Base plane coordinates (M, n) of the nodes
        points (numpy.ndarray): Nodes (M, n+1) on the level
        retractions (numpy.ndarray): Retractions (M, n+1) of the nodes
        normals (numpy.ndarray): Normals (M, n+1) of the nodes
        strata (numpy.ndarray): Global stratum index of every node
        edges (numpy.ndarray): Node index pairs (E, 2)
        lengths (numpy.ndarray): Minkowski chord lengths (E,) of the edges
    """
    domain : RegularDomain
    level : float
    window : np.ndarray
    h : float
    shape : tuple
    X : np.ndarray
    points : np.ndarray
    retractions : np.ndarray
    normals : np.ndarray
    strata : np.ndarray
    edges : np.ndarray
    lengths : np.ndarray
    _graph : csr_matrix = field(default=None, repr=False)

    def graph(self) -> csr_matrix:
        if self._graph is None:
            M = len(self.X)
            self._graph = csr_matrix((self.lengths, (self.edges[:, 0], self.edges[:, 1])), shape=(M, M))
        return self._graph

    def nearest_node(self, xbar : np.ndarray) -> int:
        index = np.rint((np.asarray(xbar) - self.window[:, 0]) / self.h).astype(int)
        index = np.clip(index, 0, np.asarray(self.shape) - 1)
        return int(np.ravel_multi_index(tuple(index), self.shape))

    def node_line(self, node : int) -> GradientLine:
        """Gradient line through a mesh node"""
        return GradientLine(self.retractions[node], self.normals[node],
                            self.domain._stratum(int(self.strata[node]), np.full(2, np.nan)))

    def interior_nodes(self, ring : int = 2) -> np.ndarray:
        """Nodes at grid distance at least ring from the window boundary"""
        grid = np.indices(self.shape).reshape(len(self.shape), -1).T
        inside = np.all((grid >= ring) & (grid <= np.asarray(self.shape) - 1 - ring), axis=1)
        return np.flatnonzero(inside)


@dataclass
class DistanceEstimate:
    """Upper bound on an intrinsic level distance with its extrapolation

    Attributes:
        value (float): Best upper bound, the length of the shortest polyline found
        history (list): Pairs (resolution, value), values non-increasing
        extrapolated (float): Richardson extrapolation in h^2
        error (float): |value - extrapolated| plus the Richardson residual
        path (numpy.ndarray): Shortened polyline (K, n+1) on the level
        level (float): Cosmological time of the level
        normals (tuple): Normals of the two gradient lines
    """
    value : float
    history : list
    extrapolated : float
    error : float
    path : np.ndarray = None
    level : float = None
    normals : tuple = None

    def scaled(self, factor : float):
        """Estimate with every length multiplied by a positive factor"""
        assert factor > 0, "Scaling factors must be positive"
        return DistanceEstimate(factor * self.value, [(h, factor * v) for h, v in self.history],
                                factor * self.extrapolated, factor * self.error, self.path, self.level, self.normals)


def default_window(line1 : GradientLine, line2 : GradientLine, a : float, h : float = 0.0) -> np.ndarray:
    """Bounding box of the two footpoints on the level, padded by 1.5 times their separation plus 3a"""
    x1 = line1.point_at(a)[1:]
    x2 = line2.point_at(a)[1:]
    pad = max(1.5 * np.linalg.norm(x1 - x2) + 3 * a, 2 * h)
    return np.stack([np.minimum(x1, x2) - pad, np.maximum(x1, x2) + pad], axis=1)


def mesh_level(dom : RegularDomain, a : float, window : np.ndarray, h : float, debug : bool = False) -> LevelMesh:
    """Grid graph with diagonals over a window, lifted to the exact level graph

    Args:
        dom (RegularDomain): The domain
        a (float): Level, a > 0
        window (numpy.ndarray): Box (n, 2) in the base plane
        h (float): Grid spacing. The node count is capped at 40000, coarsening the spacing if needed
        debug (bool, optional): If True, prints debug information. Default is False

    Returns:
        LevelMesh: Mesh of the level

    Raises:
        EmptyMesh: If the window holds fewer than two nodes along an axis
        OffLevel: If a lifted node misses the level by more than 1e-9 (relative above a = 1)
    """
    assert a > 0, "Levels must be positive"
    assert h > 0, "Mesh spacing must be positive"
    window = np.asarray(window, dtype=float).reshape(dom.n, 2)
    lo, hi = window[:, 0], window[:, 1]
    counts = np.floor((hi - lo) / h + 1e-9).astype(int) + 1
    if np.any(hi <= lo) or np.any(counts < 2):
        raise EmptyMesh(f"Window {window.tolist()} holds no grid at spacing {h}")
    cap = int(np.floor(MAX_NODES ** (1.0 / dom.n) + 1e-9))
    if np.max(counts) > cap:
        h = float(np.max((hi - lo) / (cap - 1)))
        counts = np.floor((hi - lo) / h + 1e-9).astype(int) + 1
        debug_info(debug, f"WARNING: Mesh spacing coarsened to {h} to stay below {MAX_NODES} nodes")
    axes = [lo[i] + h * np.arange(counts[i]) for i in range(dom.n)]
    X = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    graph = dom.level_graph(a, X)
    check = dom.cosmological_time_batch(graph["p"])
    if np.any(~check["valid"]) or np.max(np.abs(check["T"] - a)) > LEVEL_TOLERANCE * max(1.0, a):
        raise OffLevel(f"Lifted nodes miss the level {a} by {np.nanmax(np.abs(check['T'] - a))}")

    shape = tuple(int(c) for c in counts)
    index = np.arange(len(X)).reshape(shape)
    edges = []
    for offset in product((-1, 0, 1), repeat=dom.n):
        if offset <= (0,) * dom.n:
            continue
        src = index[tuple(slice(max(0, -o), c - max(0, o)) for o, c in zip(offset, shape))]
        dst = index[tuple(slice(max(0, o), c - max(0, -o)) for o, c in zip(offset, shape))]
        edges.append(np.stack([src.ravel(), dst.ravel()], axis=1))
    edges = np.concatenate(edges)
    chords = graph["p"][edges[:, 1]] - graph["p"][edges[:, 0]]
    assert np.all(lorentz_norm2(chords) > 0), "Level chords must be spacelike"
    debug_info(debug, f"Level {a} meshed with {len(X)} nodes and {len(edges)} edges")
    return LevelMesh(dom, float(a), window, float(h), shape, X, graph["p"], check["r"], check["N"],
                     check["stratum"], edges, spacelike_length(chords))


def _polyline_length(P : np.ndarray) -> float:
    if len(P) < 2:
        return 0.0
    return float(np.sum(spacelike_length(np.diff(P, axis=0))))


def _subdivide(X : np.ndarray) -> np.ndarray:
    """Inserts the base plane midpoint of every segment"""
    mid = 0.5 * (X[:-1] + X[1:])
    out = np.empty((2 * len(X) - 1, X.shape[1]))
    out[0::2] = X
    out[1::2] = mid
    return out


def _shorten(dom : RegularDomain, a : float, X : np.ndarray, window : np.ndarray, passes : int):
    """Shortens a polyline on the level graph with fixed endpoints

    The interior base plane coordinates minimize the total chord length
    sum sqrt(<p_k+1 - p_k, p_k+1 - p_k>) with p = (h_a(xbar), xbar), within the window.

    Returns:
        numpy.ndarray: Shortened base plane polyline
        float: Its length
    """
    n = X.shape[1]
    start, end = X[0], X[-1]
    if len(X) <= 2:
        return X, _polyline_length(dom.level_graph(a, X)["p"])

    def objective(y):
        Y = np.vstack([start, y.reshape(-1, n), end])
        graph = dom.level_graph(a, Y)
        D = np.diff(graph["p"], axis=0)
        ell = np.sqrt(np.maximum(lorentz_norm2(D), 0.0) + 1e-30)
        G = D / ell[:, None]
        G[:, 0] *= -1.0
        dP = np.zeros_like(graph["p"])
        dP[1:] += G
        dP[:-1] -= G
        grad = dP[:, 1:] + dP[:, :1] * graph["grad"]
        return float(np.sum(ell)), grad[1:-1].ravel()

    bounds = [tuple(window[i]) for _ in range(len(X) - 2) for i in range(n)]
    y = X[1:-1].ravel()
    best = objective(y)[0]
    for _ in range(passes):
        result = minimize(objective, y, jac=True, method="L-BFGS-B", bounds=bounds,
                          options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 5000})
        if result.fun < best:
            best = float(result.fun)
            y = result.x
    return np.vstack([start, y.reshape(-1, n), end]), best


def _touches_window(X : np.ndarray, window : np.ndarray) -> bool:
    tol = BOUNDARY_TOLERANCE * np.max(window[:, 1] - window[:, 0])
    inner = X[1:-1]
    return bool(np.any(inner <= window[:, 0] + tol) or np.any(inner >= window[:, 1] - tol))


def richardson(values : list):
    """Extrapolation of second order convergent values at halved resolutions

    Returns:
        float: Extrapolated value
        float: Error bar |last - extrapolated| + |residual between the last two extrapolations|
    """
    values = np.asarray(values, dtype=float)
    if len(values) == 1:
        return float(values[0]), 0.0
    extrapolations = values[1:] + (values[1:] - values[:-1]) / 3.0
    extrapolated = extrapolations[-1]
    residual = abs(extrapolations[-1] - extrapolations[-2]) if len(extrapolations) > 1 else abs(values[-1] - values[-2])
    return float(extrapolated), float(abs(values[-1] - extrapolated) + residual)


def geodesic_distance(mesh : LevelMesh, line1 : GradientLine, line2 : GradientLine, refinements : int = 3,
                      passes : int = SHORTENING_PASSES, debug : bool = False) -> DistanceEstimate:
    """Intrinsic distance on a level between the points of two gradient lines

    A Dijkstra path on the mesh graph is shortened on the exact level graph, then
    subdivided and shortened again refinements - 1 times. Polyline chord lengths are
    upper bounds on the intrinsic distance because the future of a level is convex
    and flowing down along gradient lines shortens curves.

    Args:
        mesh (LevelMesh): Mesh of the level
        line1 (GradientLine): First gradient line
        line2 (GradientLine): Second gradient line
        refinements (int, optional): Number of resolutions h, h/2, ... Default is 3
        passes (int, optional): Shortening passes per resolution. Default is 3

    Returns:
        DistanceEstimate: Upper bound, history and extrapolation

    Raises:
        WindowTooSmall: If a footpoint lies outside the window or the shortened path touches it
    """
    assert refinements >= 1, "At least one resolution is required"
    a = mesh.level
    dom = mesh.domain
    p1, p2 = line1.point_at(a), line2.point_at(a)
    normals = (line1.N, line2.N)
    for p in (p1, p2):
        if np.any(p[1:] < mesh.window[:, 0]) or np.any(p[1:] > mesh.window[:, 1]):
            raise WindowTooSmall(f"Footpoint {p} lies outside the window {mesh.window.tolist()}")
    if np.max(np.abs(p1 - p2)) <= 1e-12:
        return DistanceEstimate(0.0, [(mesh.h, 0.0)], 0.0, 0.0, np.stack([p1, p2]), a, normals)

    source, target = mesh.nearest_node(p1[1:]), mesh.nearest_node(p2[1:])
    _, predecessors = dijkstra(mesh.graph(), directed=False, indices=source, return_predecessors=True)
    nodes = [target]
    while nodes[-1] != source:
        nodes.append(predecessors[nodes[-1]])
    X = np.vstack([p1[1:], mesh.X[nodes[::-1]], p2[1:]])
    keep = np.concatenate([[True], np.linalg.norm(np.diff(X, axis=0), axis=1) > 1e-12])
    keep[-1] = True
    X = X[keep]

    history = []
    best, best_path = np.inf, None
    resolution = mesh.h
    for k in range(refinements):
        if k > 0:
            X = _subdivide(X)
            resolution /= 2
        X, length = _shorten(dom, a, X, mesh.window, passes)
        if _touches_window(X, mesh.window):
            raise WindowTooSmall(f"Shortened path touches the window {mesh.window.tolist()}")
        if length < best:
            best, best_path = length, X
        history.append((resolution, best))
        debug_info(debug, f"Resolution {resolution}: length {best}")
    extrapolated, error = richardson([v for _, v in history])
    return DistanceEstimate(best, history, extrapolated, error, dom.level_graph(a, best_path)["p"], a, normals)


def level_distance(dom : RegularDomain, a : float, line1 : GradientLine, line2 : GradientLine,
                   settings : MeshSettings = None, debug : bool = False) -> DistanceEstimate:
    """Meshes the level around two gradient lines and computes their distance

    The window grows by a factor 2 around its center when the path touches it, at most 3 times.

    Raises:
        WindowTooSmall: If the path still touches the window after the last growth
    """
    settings = MeshSettings() if settings is None else settings
    h = settings.spacing(a)
    window = default_window(line1, line2, a, h) if settings.window is None else np.asarray(settings.window, dtype=float)
    for attempt in range(MAX_WINDOW_GROWTHS + 1):
        mesh = mesh_level(dom, a, window, h, debug=debug)
        try:
            return geodesic_distance(mesh, line1, line2, settings.refinements, settings.passes, debug=debug)
        except WindowTooSmall:
            if attempt == MAX_WINDOW_GROWTHS:
                raise
            center = window.mean(axis=1, keepdims=True)
            window = center + WINDOW_GROWTH * (window - center)
            debug_info(debug, f"WARNING: Window grown to {window.tolist()}")


def tangent_sign_check(estimate : DistanceEstimate) -> float:
    """Worst violation of the tangent signs of a shortened path from p to q

    Along a geodesic every chord d satisfies <d, N_p> <= 0 and <d, N_q> >= 0.

    Returns:
        float: max over chords of <d, N_p> and -<d, N_q>, zero for an empty path
    """
    D = np.diff(estimate.path, axis=0)
    if len(D) == 0:
        return 0.0
    Np, Nq = estimate.normals
    return float(max(np.max(lorentz_dot(D, Np)), np.max(-lorentz_dot(D, Nq))))


def retracted_length(dom : RegularDomain, path : np.ndarray) -> float:
    """Spine length of the retraction of a polyline, measured with Minkowski chords"""
    return _polyline_length(dom.cosmological_time_batch(path)["r"])


def project_curve_length(dom : RegularDomain, polyline : np.ndarray, a : float):
    """Lengths of a polyline on a level b and of its image on the level a >= b

    Nodes are moved along their gradient lines, r + a N.

    Returns:
        tuple: (L_b, L_a)

    Raises:
        OffLevel: If the nodes do not share one level within 1e-6
    """
    P = np.atleast_2d(np.asarray(polyline, dtype=float))
    if len(P) == 1:
        return 0.0, 0.0
    ev = dom.cosmological_time_batch(P)
    if not np.all(ev["valid"]):
        raise OffLevel("Polyline leaves the domain")
    b = ev["T"][0]
    if np.max(np.abs(ev["T"] - b)) > OFF_LEVEL_TOLERANCE:
        raise OffLevel(f"Polyline nodes span the times {ev['T'].min()} to {ev['T'].max()}")
    assert a >= b - OFF_LEVEL_TOLERANCE, "Target level must not be below the polyline level"
    return _polyline_length(P), _polyline_length(ev["r"] + a * ev["N"])


def random_level_polylines(dom : RegularDomain, b : float, count : int, sampler : Sampling, nodes : int = 10) -> list:
    """Straight base plane segments between random points, lifted onto the level b"""
    ends = []
    for _ in range(2):
        sampler.random_uniform(overwrite=True)
        ends.append(sampler.samples().copy())
    s = np.linspace(0.0, 1.0, nodes)[:, None]
    return [dom.level_graph(b, ends[0][k] + s * (ends[1][k] - ends[0][k]))["p"] for k in range(min(count, sampler.M))]


def _map(function, tasks : list, threads : int = 1, debug : bool = False, desc : str = "") -> list:
    """Ordered map over independent tasks, threaded when threads > 1"""
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            return list(tqdm(executor.map(function, tasks), total=len(tasks), disable=not debug, desc=desc))
    return [function(t) for t in tqdm(tasks, disable=not debug, desc=desc)]


def compare_levels(dom : RegularDomain, a : float, b : float, pairs : list, settings : MeshSettings = None,
                   threads : int = 1, debug : bool = False) -> dict:
    """Checks d_b <= d_a <= (a/b)^2 d_b on transported distances

    Args:
        pairs (list): Pairs (line1, line2) of gradient lines

    Returns:
        dict: Ratios d_a/d_b, their extremes, the bound (a/b)^2 and the indices of violating pairs
    """
    assert a >= b > 0, "Levels must satisfy a >= b > 0"
    bound = (a / b) ** 2

    def task(item):
        line1, line2 = item
        return level_distance(dom, a, line1, line2, settings), level_distance(dom, b, line1, line2, settings)

    results = _map(task, list(pairs), threads, debug, desc=f"levels {a}/{b}")
    ratios, violations = [], []
    for k, (ea, eb) in enumerate(results):
        ratios.append(ea.extrapolated / eb.extrapolated if eb.extrapolated > 0 else np.nan)
        err = ea.error + eb.error
        if eb.extrapolated > ea.extrapolated + err or ea.extrapolated > bound * eb.extrapolated + ea.error + bound * eb.error:
            violations.append(k)
    finite = [r for r in ratios if np.isfinite(r)]
    return {"a": a, "b": b, "bound": bound, "ratios": ratios,
            "min": min(finite) if finite else None, "max": max(finite) if finite else None,
            "values_a": [e.extrapolated for e, _ in results], "errors_a": [e.error for e, _ in results],
            "values_b": [e.extrapolated for _, e in results], "errors_b": [e.error for _, e in results],
            "violations": violations}


@dataclass
class ConvexSurface:
    """Convex Cauchy surface given as a cosmological level of an auxiliary domain

    Attributes:
        auxiliary (RegularDomain): Auxiliary domain
        level (float): Cosmological time of the surface in the auxiliary domain
        window (numpy.ndarray): Box (n, 2) in the base plane the surface is restricted to
    """
    auxiliary : RegularDomain
    level : float
    window : np.ndarray

    def __post_init__(self):
        assert self.level > 0, "Levels must be positive"
        self.window = np.asarray(self.window, dtype=float).reshape(self.auxiliary.n, 2)

    @classmethod
    def shifted(cls, dom : RegularDomain, shift : np.ndarray, level : float, window : np.ndarray, debug : bool = False):
        """Level of the domain whose spine is translated by a Minkowski vector"""
        aux = RegularDomain(dom.spine.translated(shift), check_convexity=False, debug=debug)
        return cls(aux, level, window)

    def lift(self, X : np.ndarray) -> dict:
        """Surface points above base plane points with their future unit normals"""
        graph = self.auxiliary.level_graph(self.level, X)
        return {"points": graph["p"], "normals": graph["N"]}

    def validate(self, dom : RegularDomain, sampler : Sampling):
        """Checks that sampled surface points lie in the domain and the spine lies below the surface

        Raises:
            OutsideDomain: If a check fails
        """
        sampler._bounds = self.window
        sampler.random_uniform(overwrite=True)
        if not np.all(dom.cosmological_time_batch(self.lift(sampler.samples())["points"])["valid"]):
            raise OutsideDomain("Convex surface leaves the domain")
        spine = dom.spine.sample_points()
        inside = np.all((spine[:, 1:] >= self.window[:, 0]) & (spine[:, 1:] <= self.window[:, 1]), axis=1)
        if np.any(inside):
            heights = self.auxiliary.level_graph(self.level, spine[inside, 1:])["t"]
            if np.any(spine[inside, 0] >= heights):
                raise OutsideDomain("Spine is not in the past of the convex surface")


def pairing_bound_check(dom : RegularDomain, surf : ConvexSurface, m : int, seed : int = 0,
                        geometry : str = "flat") -> dict:
    """Compares |<N, n>| on a convex surface with the ratio of the extreme cosmological times

    N is the cosmological normal of the domain and n the normal of the surface. In the de Sitter
    and anti de Sitter geometries both are measured in the Wick rotated metric and the bound uses
    the rescaled times.

    Returns:
        dict: Number of samples, max pairing, sup and inf of T, bound and margin = bound - max
    """
    assert m >= 0, "Sample counts must be non-negative"
    if m == 0:
        return {"geometry": geometry, "samples": 0, "max_pairing": None, "sup_T": None, "inf_T": None,
                "bound": None, "margin": None}
    sampler = Sampling(m, dom.n, seed=seed, stream=f"pairing-{geometry}")
    sampler.set_domainBounds(surf.window)
    sampler.random_uniform()
    surface = surf.lift(sampler.samples())
    ev = dom.cosmological_time_batch(surface["points"])
    if not np.all(ev["valid"]):
        raise OutsideDomain("Convex surface sample outside the domain")
    T = ev["T"]
    if geometry == "flat":
        pairing = np.abs(lorentz_dot(ev["N"], surface["normals"]))
        bound = T.max() / T.min()
    else:
        from CosmoTime.wick import wick_normal_pairing, wick_pairing_bound
        pairing = wick_normal_pairing(ev["N"], surface["normals"], T, geometry)
        bound = wick_pairing_bound(T.max(), T.min(), geometry)
    worst = float(np.max(pairing))
    return {"geometry": geometry, "samples": m, "max_pairing": worst, "sup_T": float(T.max()),
            "inf_T": float(T.min()), "bound": float(bound), "margin": float(bound - worst)}


def convex_surface_comparison(dom : RegularDomain, surf : ConvexSurface, X_pairs : list, settings : MeshSettings = None,
                              seed : int = 0, samples : int = 1000, threads : int = 1, debug : bool = False) -> dict:
    """Compares intrinsic distances on a convex surface with the level of its maximal time

    With K = sup_S T / inf_S T the surface metric is K^4 bi-Lipschitz to the metric of the level
    S_{sup T}, so distance ratios lie in [K^-2, K^2]. Points are matched along the gradient lines
    of the domain.

    Args:
        X_pairs (list): Pairs of base plane points on the surface

    Returns:
        dict: K, per pair ratios with error bars, their extremes and violating pair indices
    """
    report = pairing_bound_check(dom, surf, samples, seed)
    K = report["sup_T"] / report["inf_T"]
    top = report["sup_T"]
    aux = surf.auxiliary

    def task(pair):
        P = surf.lift(np.asarray(pair, dtype=float))["points"]
        on_surface = level_distance(aux, surf.level, aux.line_through(P[0]), aux.line_through(P[1]), settings)
        on_level = level_distance(dom, top, dom.line_through(P[0]), dom.line_through(P[1]), settings)
        return on_surface, on_level

    results = _map(task, list(X_pairs), threads, debug, desc="convex surface")
    ratios, errors, violations = [], [], []
    for k, (es, el) in enumerate(results):
        ratio = es.extrapolated / el.extrapolated
        err = ratio * (es.error / es.extrapolated + el.error / el.extrapolated)
        ratios.append(ratio)
        errors.append(err)
        if ratio < K ** -2 - err or ratio > K ** 2 + err:
            violations.append(k)
    return {"K": K, "level": top, "ratios": ratios, "errors": errors,
            "min": min(ratios) if ratios else None, "max": max(ratios) if ratios else None,
            "violations": violations}


def affine_limit(levels, values, errors):
    """Affine extrapolation to a = 0 through the two smallest levels

    The error bar adds the propagated errors and the distance to the constant term of a
    quadratic fit through all levels.

    Returns:
        float: Extrapolated limit
        float: Error bar
    """
    levels = np.asarray(levels, dtype=float)
    values = np.asarray(values, dtype=float)
    errors = np.asarray(errors, dtype=float)
    order = np.argsort(levels)
    a1, a2 = levels[order[:2]]
    v1, v2 = values[order[:2]]
    e1, e2 = errors[order[:2]]
    limit = v1 - a1 * (v2 - v1) / (a2 - a1)
    error = (a2 * e1 + a1 * e2) / (a2 - a1)
    if len(levels) >= 3:
        error += abs(limit - np.polyfit(levels, values, 2)[-1])
    return float(limit), float(error)


def past_sweep(dom : RegularDomain, pairs : list, levels : list, settings : MeshSettings = None,
               oracles : list = None, threads : int = 1, debug : bool = False) -> dict:
    """Level distances of gradient line pairs as a decreases, extrapolated to a = 0

    The limit is compared with the intrinsic distance of the footpoints on the initial
    singularity; the spine lengths of the retracted shortened paths are recorded as well.

    Args:
        pairs (list): Triples (pair id, line1, line2)
        levels (list): At least 3 levels
        oracles (list, optional): Limit values; default is the singular set distance of the footpoints

    Returns:
        dict: "rows" for the sweep table and per pair "summary" with limit, error, oracle, gap, passed
    """
    levels = sorted(levels, reverse=True)
    assert len(levels) >= 3, "Past sweeps need at least 3 levels"
    assert levels[-1] > 0, "Levels must be positive"
    if oracles is None:
        singular = dom.singular_set()
        oracles = [singular.distance(l1.r, l2.r) for _, l1, l2 in pairs]
    tasks = [(k, a) for k in range(len(pairs)) for a in levels]

    def task(item):
        k, a = item
        _, line1, line2 = pairs[k]
        estimate = level_distance(dom, a, line1, line2, settings)
        return estimate, retracted_length(dom, estimate.path)

    results = _map(task, tasks, threads, debug, desc="past sweep")
    rows, summary = [], []
    for k, (name, _, _) in enumerate(pairs):
        chunk = results[k * len(levels):(k + 1) * len(levels)]
        values = [e.extrapolated for e, _ in chunk]
        errors = [e.error for e, _ in chunk]
        for a, (e, _) in zip(levels, chunk):
            rows.append({"pair_id": name, "a": a, "value": e.extrapolated, "error": e.error,
                         "oracle": oracles[k], "gap": abs(e.extrapolated - oracles[k])})
        limit, error = affine_limit(levels, values, errors)
        gap = abs(limit - oracles[k]) / max(oracles[k], PAST_SCALE)
        summary.append({"pair_id": name, "levels": levels, "values": values, "errors": errors,
                        "retracted_lengths": [r for _, r in chunk], "limit": limit, "error": error,
                        "oracle": oracles[k], "gap": gap, "passed": bool(gap <= PAST_GAP)})
    return {"rows": rows, "summary": summary}


def future_sweep(dom : RegularDomain, pairs : list, levels : list, settings : MeshSettings = None,
                 threads : int = 1, debug : bool = False) -> dict:
    """Renormalized level distances d_a / a against the hyperbolic distance of the normals

    Args:
        pairs (list): Triples (pair id, line1, line2)
        levels (list): At least 3 increasing levels

    Returns:
        dict: "rows" for the sweep table and per pair "summary" with gaps, monotonicity and passed
    """
    assert len(levels) >= 3, "Future sweeps need at least 3 levels"
    assert all(l1 < l2 for l1, l2 in zip(levels, levels[1:])), "Future sweep levels must increase"
    tasks = [(k, a) for k in range(len(pairs)) for a in levels]

    def task(item):
        k, a = item
        _, line1, line2 = pairs[k]
        return level_distance(dom, a, line1, line2, settings)

    results = _map(task, tasks, threads, debug, desc="future sweep")
    rows, summary = [], []
    for k, (name, line1, line2) in enumerate(pairs):
        target = float(hyperbolic_distance(line1.N, line2.N))
        chunk = results[k * len(levels):(k + 1) * len(levels)]
        values = [e.extrapolated / a for a, e in zip(levels, chunk)]
        errors = [e.error / a for a, e in zip(levels, chunk)]
        gaps = [abs(v - target) for v in values]
        for a, v, e, g in zip(levels, values, errors, gaps):
            rows.append({"pair_id": name, "a": a, "value": v, "error": e, "oracle": target, "gap": g})
        monotone = all(g2 <= g1 + e1 + e2 for g1, g2, e1, e2 in zip(gaps, gaps[1:], errors, errors[1:]))
        allowed = FUTURE_GAP * target if target > 1e-9 else FUTURE_ABSOLUTE_GAP
        summary.append({"pair_id": name, "target": target, "values": values, "errors": errors, "gaps": gaps,
                        "monotone": monotone, "passed": bool(monotone and gaps[-1] <= allowed + errors[-1])})
    return {"rows": rows, "summary": summary}


def estimate_gauss_curvature(mesh : LevelMesh, node : int) -> float:
    """Gauss curvature of a level of a domain in R^{1,2} at a mesh node

    A quadratic is fitted by least squares to the 5 x 5 grid neighbourhood of the node; with its
    gradient g and Hessian H the curvature is -det(H) / (1 - |g|^2)^2.

    Raises:
        BoundaryNode: If the node has no full neighbourhood
    """
    assert mesh.domain.n == 2, "Gauss curvature is estimated on levels in R^{1,2}"
    i, j = np.unravel_index(node, mesh.shape)
    if i < 2 or j < 2 or i > mesh.shape[0] - 3 or j > mesh.shape[1] - 3:
        raise BoundaryNode(f"Node {node} has no full neighbourhood")
    index = np.arange(len(mesh.X)).reshape(mesh.shape)[i - 2:i + 3, j - 2:j + 3].ravel()
    D = mesh.X[index] - mesh.X[node]
    A = np.stack([np.ones(len(D)), D[:, 0], D[:, 1], D[:, 0] ** 2, D[:, 0] * D[:, 1], D[:, 1] ** 2], axis=1)
    c, _, _, _ = np.linalg.lstsq(A, mesh.points[index, 0], rcond=None)
    g = c[1:3]
    H = np.array([[2 * c[3], c[4]], [c[4], 2 * c[5]]])
    return float(-np.linalg.det(H) / (1.0 - g @ g) ** 2)


def write_sweep_csv(filename : str, rows : list, columns : list = SWEEP_COLUMNS):
    """Writes sweep rows with a fixed column order"""
    with open(filename, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=columns, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
