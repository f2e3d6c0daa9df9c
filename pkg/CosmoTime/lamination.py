import json
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from CosmoTime.minkowski import (lorentz_dot, lorentz_cross, normalize_spacelike, spacelike_length,
                                 lorentz_norm2, mink_vec, CAUSAL_TOLERANCE)
from CosmoTime.utils import (NumpyEncoder, debug_info, CrossingLeaves, AchronalityViolation,
                             UnknownRegion)

ENDPOINT_TOLERANCE = 1e-12
SAMPLES_PER_CELL = 32

TREE = "tree"
POLYGON = "polygon"
POINTS = "points"


@dataclass(frozen=True)
class Leaf:
    """Weighted complete geodesic of the hyperbolic disk given by its ideal endpoints

    Attributes:
        endpoints (tuple): Angles (theta_1, theta_2) in radians on the boundary circle
        weight (float): Transverse measure of the leaf
    """
    endpoints : tuple
    weight : float

    def __post_init__(self):
        t1, t2 = self.endpoints
        assert self.weight > 0, "Leaf weights must be positive"
        assert not np.isclose(np.mod(t1 - t2, 2 * np.pi), 0.0, atol=ENDPOINT_TOLERANCE) \
            and not np.isclose(np.mod(t1 - t2, 2 * np.pi), 2 * np.pi, atol=ENDPOINT_TOLERANCE), \
            "Leaf endpoints must be distinct"

    def ideal_points(self):
        """Null vectors (1, cos theta, sin theta) of the two endpoints"""
        return [mink_vec(1.0, [np.cos(t), np.sin(t)]) for t in self.endpoints]

    def sorted_endpoints(self):
        a, b = np.mod(self.endpoints, 2 * np.pi)
        return (a, b) if a < b else (b, a)


def _same_leaf(l1 : Leaf, l2 : Leaf) -> bool:
    a = np.asarray(l1.sorted_endpoints())
    b = np.asarray(l2.sorted_endpoints())
    return bool(np.all(np.abs(a - b) <= ENDPOINT_TOLERANCE))


def leaves_cross(l1 : Leaf, l2 : Leaf) -> bool:
    """True when the endpoint pairs interleave on the circle

    Leaves sharing an ideal endpoint are asymptotic, not crossing.
    """
    a1, a2 = l1.sorted_endpoints()
    inside = 0
    for t in l2.sorted_endpoints():
        if min(abs(t - a1), abs(t - a2)) <= ENDPOINT_TOLERANCE:
            return False
        if a1 < t < a2:
            inside += 1
    return inside == 1


class MeasuredLamination:
    """Finite measured geodesic lamination of the hyperbolic disk

    Leaves with coincident endpoints are merged into a single leaf carrying the
    sum of their weights, since transverse measures add up.

    Attributes:
    public:
        leaves (list): List of Leaf objects after merging

    Methods:
    public:
        validate(base_point : numpy.ndarray) -> RegionGraph: Region decomposition of the disk
        save(filename : str): Saves the lamination to a json file

    Example:
        >>> lam = MeasuredLamination([Leaf((np.pi/2, -np.pi/2), 1.0)])
        >>> graph = lam.validate()
        >>> spine = build_spine(lam, graph)

    Version:
        0.1
    """
    def __init__(self, leaves : list, debug : bool = False):
        self._object_type = "lamination"
        self._debug = debug
        merged = []
        for leaf in leaves:
            if not isinstance(leaf, Leaf):
                leaf = Leaf(tuple(leaf[:2]), float(leaf[2]))
            for k, other in enumerate(merged):
                if _same_leaf(leaf, other):
                    debug_info(self._debug, f"WARNING: Coincident leaves merged at endpoints {leaf.endpoints}")
                    merged[k] = Leaf(other.endpoints, other.weight + leaf.weight)
                    break
            else:
                merged.append(leaf)
        self.leaves = merged

    def __len__(self):
        return len(self.leaves)

    def raw_normals(self) -> np.ndarray:
        """Unit spacelike normals of the geodesic planes of the leaves, before orientation"""
        normals = np.zeros((len(self.leaves), 3))
        for i, leaf in enumerate(self.leaves):
            l1, l2 = leaf.ideal_points()
            normals[i] = normalize_spacelike(lorentz_cross(l1, l2))
        return normals

    def validate(self, base_point : np.ndarray = None):
        """Checks that no two leaves cross and enumerates the complementary regions

        Args:
            base_point (numpy.ndarray, optional): Point of the hyperboloid in the base region.
                Defaults to the disk center (1, 0, 0), pushed off a leaf if it lies on one.

        Returns:
            RegionGraph: Tree of complementary regions

        Raises:
            CrossingLeaves: If two leaves cross
        """
        for i in range(len(self.leaves)):
            for j in range(i + 1, len(self.leaves)):
                if leaves_cross(self.leaves[i], self.leaves[j]):
                    raise CrossingLeaves(i, j)
        return RegionGraph.from_lamination(self, base_point, debug=self._debug)

    def to_dict(self):
        return {"_object_type": self._object_type,
                "leaves": [[l.endpoints[0], l.endpoints[1], l.weight] for l in self.leaves]}

    @classmethod
    def from_dict(cls, data : dict):
        return cls([Leaf((l[0], l[1]), l[2]) for l in data["leaves"]])

    def save(self, filename : str):
        """Saves the lamination to a json file

        Args:
            filename (str): Name of the file to be saved
        """
        assert isinstance(filename, str), "Filename must be a string"
        with open(filename, "w") as f:
            json.dump(self.to_dict(), f, cls=NumpyEncoder, indent = 3)


def _push_off(point : np.ndarray, normal : np.ndarray, distance : float) -> np.ndarray:
    """Moves a hyperboloid point orthogonally to a leaf through it by the given distance"""
    return np.cosh(distance) * point + np.sinh(distance) * normal


def _leaf_midpoint(normal : np.ndarray) -> np.ndarray:
    """Point of the geodesic u^perp closest to the disk center"""
    e0 = mink_vec(1.0, [0.0, 0.0])
    w = e0 - lorentz_dot(e0, normal) * normal
    return w / np.sqrt(-lorentz_norm2(w))


class RegionGraph:
    """Tree of the complementary regions of a finite lamination

    Regions are identified by the sign vector of <u_j, x> over the leaf normals u_j.

    Attributes:
    public:
        regions (list): Region ids 0..L, region 0 is the base region
        points (numpy.ndarray): Representative interior point of every region on the hyperboloid
        adjacency (list): Triples (region, region, leaf) across each leaf
        base_region (int): Id of the base region
        normals (numpy.ndarray): Unit normals of the leaves oriented away from the base region
        signs (numpy.ndarray): Sign vector of every region
    """
    def __init__(self, points, adjacency, signs, normals, base_region = 0):
        self.points = np.asarray(points)
        self.regions = list(range(len(self.points)))
        self.adjacency = list(adjacency)
        self.signs = np.asarray(signs)
        self.normals = np.asarray(normals)
        self.base_region = base_region
        self._neighbours = {r: [] for r in self.regions}
        for r1, r2, leaf in self.adjacency:
            self._neighbours[r1].append((r2, leaf))
            self._neighbours[r2].append((r1, leaf))
        assert len(self.adjacency) == len(self.regions) - 1, "Region graph must have one edge per leaf"
        assert len(self._bfs(self.base_region)) == len(self.regions), "Region graph must be connected"

    @classmethod
    def from_lamination(cls, lam : MeasuredLamination, base_point : np.ndarray = None, debug = False):
        normals = lam.raw_normals()
        n_leaves = len(normals)
        midpoints = [_leaf_midpoint(u) for u in normals]
        # Half the distance from every leaf midpoint to the nearest other leaf
        offsets = []
        for i in range(n_leaves):
            others = [np.arcsinh(abs(lorentz_dot(normals[k], midpoints[i]))) for k in range(n_leaves) if k != i]
            offsets.append(0.5 * min(others + [1.0]))

        center = mink_vec(1.0, [0.0, 0.0]) if base_point is None else np.asarray(base_point, dtype=float)
        if base_point is None:
            for i in range(n_leaves):
                if abs(lorentz_dot(normals[i], center)) < 1e-12:
                    debug_info(debug, f"Disk center lies on leaf {i}, base point pushed off")
                    center = _push_off(center, -normals[i], offsets[i])
                    break
        # Orient the normals away from the base region
        for i in range(n_leaves):
            if lorentz_dot(normals[i], center) > 0:
                normals[i] = -normals[i]

        def sign_vector(x):
            return tuple(int(s) for s in np.sign(lorentz_dot(normals, x))) if n_leaves else ()

        points = [center]
        keys = {sign_vector(center): 0}
        adjacency = []
        for i in range(n_leaves):
            ends = []
            for side in (-1.0, 1.0):
                x = _push_off(midpoints[i], side * normals[i], offsets[i])
                key = sign_vector(x)
                if key not in keys:
                    keys[key] = len(points)
                    points.append(x)
                ends.append(keys[key])
            adjacency.append((ends[0], ends[1], i))
        signs = [None] * len(points)
        for key, r in keys.items():
            signs[r] = key
        return cls(points, adjacency, signs, normals, base_region = 0)

    def _bfs(self, start : int):
        """Breadth first traversal, returns {region: (parent, leaf)}"""
        tree = {start: (None, None)}
        queue = deque([start])
        while queue:
            r = queue.popleft()
            for s, leaf in self._neighbours[r]:
                if s not in tree:
                    tree[s] = (r, leaf)
                    queue.append(s)
        return tree

    def check_region(self, r : int):
        if r not in self._neighbours:
            raise UnknownRegion(f"Region {r} does not exist")

    def path_leaves(self, r1 : int, r2 : int) -> list:
        """Leaves crossed by the unique region path from r1 to r2, in order"""
        self.check_region(r1)
        self.check_region(r2)
        tree = self._bfs(r1)
        leaves = []
        r = r2
        while r != r1:
            r, leaf = tree[r]
            leaves.append(leaf)
        return leaves[::-1]

    def region_of(self, x : np.ndarray) -> int:
        """Region containing a hyperboloid point, or -1 when x lies on a leaf"""
        values = lorentz_dot(self.normals, x) if len(self.normals) else np.zeros(0)
        if np.any(np.abs(values) < CAUSAL_TOLERANCE):
            return -1
        keys = {tuple(int(v) for v in s): r for r, s in enumerate(self.signs)}
        return keys.get(tuple(int(s) for s in np.sign(values)), -1)


@dataclass
class SpineComplex:
    """Achronal simplicial complex whose future is a regular domain

    Attributes:
        vertices (numpy.ndarray): Array (V, n+1) of Minkowski points
        edges (list): Triples (i, j, leaf id or None)
        faces (list): Vertex cycles of convex planar spacelike polygons
        kind (str): "tree", "polygon" or "points"
        region_vertex (dict): Region id -> vertex id for lamination built spines
    """
    vertices : np.ndarray
    edges : list = field(default_factory=list)
    faces : list = field(default_factory=list)
    kind : str = TREE
    region_vertex : dict = field(default_factory=dict)

    def __post_init__(self):
        self.vertices = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        self.edges = [(int(e[0]), int(e[1]), None if len(e) < 3 or e[2] is None else int(e[2])) for e in self.edges]
        self.faces = [list(map(int, f)) for f in self.faces]
        assert self.vertices.shape[1] in (3, 4), "Spines live in R^{1,2} or R^{1,3}"
        assert np.all(np.isfinite(self.vertices)), "Spine vertices must be finite"
        assert self.kind in (TREE, POLYGON, POINTS), f"Unknown spine kind {self.kind}"
        # Boundary edges of faces are strata of their own
        present = {tuple(sorted(e[:2])) for e in self.edges}
        for face in self.faces:
            for k in range(len(face)):
                pair = tuple(sorted((face[k], face[(k + 1) % len(face)])))
                if pair not in present:
                    present.add(pair)
                    self.edges.append((pair[0], pair[1], None))

    @property
    def dimension(self) -> int:
        return self.vertices.shape[1] - 1

    def edge_length(self, k : int) -> float:
        i, j, _ = self.edges[k]
        return float(spacelike_length(self.vertices[j] - self.vertices[i]))

    def sample_points(self, per_cell : int = SAMPLES_PER_CELL) -> np.ndarray:
        """Vertices plus per_cell points on every edge and face"""
        points = [self.vertices]
        s = np.linspace(0.0, 1.0, per_cell)
        for i, j, _ in self.edges:
            points.append(self.vertices[i] + s[:, None] * (self.vertices[j] - self.vertices[i]))
        for face in self.faces:
            poly = self.vertices[face]
            center = poly.mean(axis=0)
            for k in range(per_cell):
                corner = poly[k % len(face)]
                points.append((center + (k + 1) / (per_cell + 1) * (corner - center))[None, :])
        return np.concatenate(points)

    def check_achronal(self, per_cell : int = SAMPLES_PER_CELL):
        """Checks that every difference of sampled spine points is spacelike or zero

        Raises:
            AchronalityViolation: If two sampled points are causally related
        """
        for i, j, _ in self.edges:
            d = self.vertices[j] - self.vertices[i]
            if lorentz_norm2(d) <= CAUSAL_TOLERANCE:
                raise AchronalityViolation(f"Edge ({i}, {j}) is not spacelike")
        points = self.sample_points(per_cell)
        for k in range(len(points)):
            diff = points[k + 1:] - points[k]
            q = lorentz_norm2(diff)
            zero = np.all(np.abs(diff) <= 1e-12, axis=-1)
            bad = (q < -CAUSAL_TOLERANCE) & ~zero
            if np.any(bad):
                raise AchronalityViolation(f"Spine points {points[k]} and {points[k + 1 + np.argmax(bad)]} are timelike related")
        if self.kind == TREE:
            self._check_tree()

    def _check_tree(self):
        n = len(self.vertices)
        parent = list(range(n))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i
        for i, j, _ in self.edges:
            ri, rj = find(i), find(j)
            if ri == rj:
                raise AchronalityViolation("Tree spine contains a cycle")
            parent[ri] = rj
        if len({find(i) for i in range(n)}) != 1:
            raise AchronalityViolation("Tree spine is not connected")

    def translated(self, shift : np.ndarray):
        """Copy of the spine translated by a Minkowski vector"""
        return SpineComplex(self.vertices + np.asarray(shift, dtype=float), list(self.edges),
                            [list(f) for f in self.faces], self.kind, dict(self.region_vertex))


def build_spine(lam : MeasuredLamination, graph : RegionGraph, debug : bool = False) -> SpineComplex:
    """Embeds the dual tree of a lamination in R^{1,2}

    The vertex of region R is the sum of w_j u_j over the leaves separating R from
    the base region, with u_j the unit normal of leaf j pointing away from the base.

    Returns:
        SpineComplex: Tree spine with one vertex per region, the base region at the origin

    Raises:
        AchronalityViolation: If the embedded tree fails the achronality check
    """
    vertices = np.zeros((len(graph.regions), 3))
    # Breadth first order visits parents before children
    tree = graph._bfs(graph.base_region)
    edges = []
    for r in tree:
        parent, leaf = tree[r]
        if parent is None:
            continue
        vertices[r] = vertices[parent] + lam.leaves[leaf].weight * graph.normals[leaf]
        edges.append((parent, r, leaf))
    kind = TREE if len(vertices) > 1 else POINTS
    spine = SpineComplex(vertices, edges, [], kind, {r: r for r in graph.regions})
    spine.check_achronal()
    debug_info(debug, f"Spine with {len(vertices)} vertices and {len(edges)} edges built")
    return spine


def tree_distance(graph : RegionGraph, lam : MeasuredLamination, r1 : int, r2 : int) -> float:
    """Dual tree distance: total weight of the leaves separating two regions

    Raises:
        UnknownRegion: If a region id does not exist
    """
    return float(sum(lam.leaves[j].weight for j in graph.path_leaves(r1, r2)))
