"""Regular domains realized as the future of a spacelike spine.

For a finite achronal spine Sigma the domain is Omega = I^+(Sigma) and the
cosmological time is the Lorentzian distance to the spine,

    T(p) = max over q in Sigma, p - q future timelike, of sqrt(-<p - q, p - q>).

The maximum splits into strata (vertices, edges, faces), each solved in closed
form: a concave quadratic on an edge, a Lorentz-orthogonal projection followed
by a planar convex projection on a face.
"""
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from CosmoTime.lamination import SpineComplex, TREE, POLYGON, POINTS
from CosmoTime.minkowski import (lorentz_dot, lorentz_norm2, spacelike_length, check_hyperbolic,
                                 lorentz_gram_schmidt, orthogonal_complement, hyperbolic_point,
                                 lorentz_cross, normalize_timelike, HYPERBOLOID_STRICT_TOLERANCE)
from CosmoTime.utils import (debug_info, OutsideDomain, NonConvexDomain, InvalidGradientLine,
                             DimensionMismatch)

OUTSIDE_THRESHOLD = 1e-14
TIE_TOLERANCE = 1e-9
AMBIGUITY_DISTANCE = 1e-6
LINE_TOLERANCE = 1e-8
CONVEXITY_PAIRS = 1000

VERTEX = "vertex"
EDGE = "edge"
FACE = "face"


@dataclass(frozen=True)
class Stratum:
    """Cell of the spine carrying a retraction point

    Attributes:
        kind (str): "vertex", "edge" or "face"
        index (int): Index of the vertex, edge or face
        coords (tuple): Edge parameter (s,) or planar coordinates of a face point; empty for vertices
    """
    kind : str
    index : int
    coords : tuple = ()


@dataclass
class CosmoEval:
    """Cosmological time, retraction and unit normal at a point

    The reconstruction p = r + T N holds up to rounding.

    Attributes:
        T (float): Cosmological time
        r (numpy.ndarray): Retraction point on the spine
        N (numpy.ndarray): Unit future normal on the hyperboloid
        stratum (Stratum): Spine cell containing r
        ambiguous (bool): True when another stratum ties within 1e-9 with a retraction more than 1e-6 away
    """
    T : float
    r : np.ndarray
    N : np.ndarray
    stratum : Stratum
    ambiguous : bool = False


@dataclass
class GradientLine:
    """Straight gradient line r + a N, a > 0, of the cosmological time

    Attributes:
        r (numpy.ndarray): Footpoint on the spine
        N (numpy.ndarray): Unit future normal
        stratum (Stratum): Spine cell containing r
    """
    r : np.ndarray
    N : np.ndarray
    stratum : Stratum

    def point_at(self, a : float) -> np.ndarray:
        return flow(self, a)


def flow(line : GradientLine, a : float) -> np.ndarray:
    """Point at cosmological time a on a gradient line, r + a N"""
    assert a > 0, "Cosmological times are positive"
    return line.r + a * line.N


def _nearest_in_polygon(Y : np.ndarray, polygon : np.ndarray):
    """Nearest points of a convex counterclockwise polygon to the rows of Y

    Args:
        Y (numpy.ndarray): Array (M, 2) of planar points
        polygon (numpy.ndarray): Array (K, 2) of polygon corners

    Returns:
        numpy.ndarray: Array (M, 2) of nearest points
        numpy.ndarray: Boolean array (M,), True for points inside the polygon
    """
    a = polygon
    b = np.roll(polygon, -1, axis=0)
    ab = b - a
    rel = Y[:, None, :] - a[None, :, :]
    cross = ab[None, :, 0] * rel[..., 1] - ab[None, :, 1] * rel[..., 0]
    inside = np.all(cross >= -1e-14, axis=1)
    t = np.clip(np.sum(rel * ab[None], axis=-1) / np.sum(ab * ab, axis=-1)[None], 0.0, 1.0)
    proj = a[None] + t[..., None] * ab[None]
    dist = np.sum((Y[:, None, :] - proj) ** 2, axis=-1)
    nearest = proj[np.arange(len(Y)), np.argmin(dist, axis=1)]
    return np.where(inside[:, None], Y, nearest), inside


class RegularDomain:
    """Future complete regular domain Omega = I^+(spine) of R^{1,n}

    Attributes:
    public:
        spine (SpineComplex): Initial singularity of the domain
        n (int): Spatial dimension
        strata (list): Stratum descriptors (vertices, then edges, then faces)

    Methods:
    public:
        cosmological_time(p : numpy.ndarray) -> CosmoEval: Exact cosmological time at p
        cosmological_time_batch(P : numpy.ndarray) -> dict: Vectorized evaluation
        contains(p : numpy.ndarray) -> bool: Membership test
        level_graph(a : float, X : numpy.ndarray) -> dict: Level set S_a as a graph over the base plane
        line_through(p : numpy.ndarray) -> GradientLine: Gradient line through a point of Omega
        gradient_line(r, N) -> GradientLine: Validated gradient line
        null_support_boundary(xbar, k) -> float: Inner approximation of the boundary graph
        singular_set() -> SingularSet: Spine with its intrinsic path metric

    Example:
        >>> dom = RegularDomain(SpineComplex(np.zeros((1, 3)), kind="points"))
        >>> dom.cosmological_time(np.array([2., 0., 0.])).T
        2.0

    Version:
        0.1
    """
    def __init__(self, spine : SpineComplex, check_convexity : bool = True, seed : int = 0, debug : bool = False):
        """Constructor of the regular domain

        Args:
            spine (SpineComplex): Achronal spine
            check_convexity (bool, optional): Runs the sampled midpoint convexity gate. Default is True
            seed (int, optional): Seed of the convexity gate samples. Default is 0
            debug (bool, optional): If True, prints debug information. Default is False

        Raises:
            AchronalityViolation: If the spine is not achronal
            NonConvexDomain: If a sampled midpoint of two domain points falls outside the domain
        """
        self._debug = debug
        self.spine = spine
        self.n = spine.dimension
        assert len(spine.vertices) > 0, "The spine must not be empty"
        spine.check_achronal()
        self._prepare_strata()
        if check_convexity and (len(spine.vertices) > 1):
            self._convexity_gate(seed)
        debug_info(self._debug, f"Regular domain in R^{{1,{self.n}}} with {len(self.strata)} strata")

    def _prepare_strata(self):
        spine = self.spine
        self._Q = spine.vertices
        self.strata = [(VERTEX, i) for i in range(len(self._Q))]
        q0, d, lengths = [], [], []
        for k, (i, j, _) in enumerate(spine.edges):
            diff = spine.vertices[j] - spine.vertices[i]
            L = float(spacelike_length(diff))
            q0.append(spine.vertices[i])
            d.append(diff / L)
            lengths.append(L)
            self.strata.append((EDGE, k))
        dim = self.n + 1
        self._q0 = np.asarray(q0).reshape(-1, dim)
        self._d = np.asarray(d).reshape(-1, dim)
        self._L = np.asarray(lengths)
        self._faces = []
        for k, face in enumerate(spine.faces):
            corners = spine.vertices[face]
            origin = corners[0]
            basis = lorentz_gram_schmidt([corners[1] - origin, corners[2] - origin])
            polygon = np.stack([lorentz_dot(corners - origin, e) for e in basis], axis=1)
            off_plane = corners - origin - polygon_coords_to_plane(polygon, basis)
            assert np.max(np.abs(off_plane)) < 1e-9, f"Face {k} is not planar"
            area = 0.5 * np.sum(polygon[:, 0] * np.roll(polygon[:, 1], -1) - np.roll(polygon[:, 0], -1) * polygon[:, 1])
            if area < 0:
                polygon = polygon[::-1]
            self._faces.append({"origin": origin, "basis": basis, "polygon": polygon,
                                "complement": orthogonal_complement(basis)})
            self.strata.append((FACE, k))

    def _convexity_gate(self, seed : int):
        from CosmoTime.sampling import Sampling
        sampler = Sampling(CONVEXITY_PAIRS, self.n, seed=seed, stream="convexity")
        P = sampler.domain_points(self)
        Q = sampler.domain_points(self)
        lam = sampler.generator.uniform(0.0, 1.0, CONVEXITY_PAIRS)[:, None]
        result = self.cosmological_time_batch(lam * P + (1 - lam) * Q)
        if not np.all(result["valid"]):
            bad = np.argmin(result["valid"])
            raise NonConvexDomain(f"Convex combination of {P[bad]} and {Q[bad]} leaves the domain")

    def _check_points(self, P : np.ndarray) -> np.ndarray:
        P = np.atleast_2d(np.asarray(P, dtype=float))
        if P.shape[-1] != self.n + 1:
            raise DimensionMismatch(f"Points of R^{{1,{P.shape[-1]-1}}} given to a domain of R^{{1,{self.n}}}")
        return P

    def _strata_retractions(self, P : np.ndarray):
        """Candidate retraction of every point on every stratum

        Returns:
            numpy.ndarray: Array (M, S, n+1) of candidate retraction points
            numpy.ndarray: Array (M, S, k) of stratum coordinates, padded with NaN
        """
        M = len(P)
        candidates = [np.broadcast_to(self._Q[None], (M,) + self._Q.shape)]
        coords = [np.full((M, len(self._Q), 2), np.nan)]
        if len(self._L):
            v = P[:, None, :] - self._q0[None]
            s = np.clip(lorentz_dot(v, self._d[None]), 0.0, self._L[None])
            candidates.append(self._q0[None] + s[..., None] * self._d[None])
            coords.append(np.stack([s, np.full_like(s, np.nan)], axis=-1))
        for face in self._faces:
            v = P - face["origin"]
            Y = np.stack([lorentz_dot(v, e) for e in face["basis"]], axis=1)
            Y, _ = _nearest_in_polygon(Y, face["polygon"])
            candidates.append((face["origin"] + polygon_coords_to_plane(Y, face["basis"]))[:, None, :])
            coords.append(Y[:, None, :])
        return np.concatenate(candidates, axis=1), np.concatenate(coords, axis=1)

    def cosmological_time_batch(self, P : np.ndarray) -> dict:
        """Cosmological time of many points at once

        Args:
            P (numpy.ndarray): Array (M, n+1) of points

        Returns:
            dict: Arrays "T" (M,), "r" (M, n+1), "N" (M, n+1), "stratum" (M,) global stratum index,
                "coords" (M, 2), "valid" (M,) membership in Omega, "ambiguous" (M,)
        """
        P = self._check_points(P)
        R, coords = self._strata_retractions(P)
        diff = P[:, None, :] - R
        T2 = -lorentz_norm2(diff)
        ok = (T2 > OUTSIDE_THRESHOLD) & (diff[..., 0] > 0)
        T = np.where(ok, np.sqrt(np.where(ok, T2, 1.0)), -np.inf)
        Tmax = np.max(T, axis=1)
        valid = np.isfinite(Tmax)
        # Lowest stratum index among the near maximizers wins
        ties = T >= (Tmax[:, None] - TIE_TOLERANCE)
        best = np.argmax(ties, axis=1)
        rows = np.arange(len(P))
        r = R[rows, best]
        spread = np.max(np.abs(R - r[:, None, :]), axis=-1)
        ambiguous = np.any(ties & (spread > AMBIGUITY_DISTANCE), axis=1) & valid
        Tbest = np.where(valid, T[rows, best], np.nan)
        N = (P - r) / np.where(valid, Tbest, 1.0)[:, None]
        if np.any(ambiguous):
            debug_info(self._debug, f"WARNING: {np.sum(ambiguous)} ambiguous retractions, lowest stratum index returned")
        return {"T": Tbest, "r": r, "N": N, "stratum": best, "coords": coords[rows, best],
                "valid": valid, "ambiguous": ambiguous}

    def _stratum(self, index : int, coords : np.ndarray) -> Stratum:
        kind, k = self.strata[index]
        if kind == VERTEX:
            return Stratum(VERTEX, k)
        if kind == EDGE:
            return Stratum(EDGE, k, (float(coords[0]),))
        return Stratum(FACE, k, (float(coords[0]), float(coords[1])))

    def cosmological_time(self, p : np.ndarray) -> CosmoEval:
        """Exact cosmological time, retraction and normal at a point

        Args:
            p (numpy.ndarray): Point of R^{1,n}

        Returns:
            CosmoEval: Time, retraction, normal and stratum

        Raises:
            OutsideDomain: If no spine point lies in the chronological past of p
        """
        result = self.cosmological_time_batch(p)
        if not result["valid"][0]:
            raise OutsideDomain(f"Point {np.asarray(p)} is not in the future of the spine")
        return CosmoEval(float(result["T"][0]), result["r"][0], result["N"][0],
                         self._stratum(int(result["stratum"][0]), result["coords"][0]),
                         bool(result["ambiguous"][0]))

    def contains(self, p : np.ndarray) -> bool:
        return bool(self.cosmological_time_batch(p)["valid"][0])

    def level_graph(self, a : float, X : np.ndarray) -> dict:
        """Level set S_a as the graph x^0 = h_a(xbar) over the base plane

        h_a(xbar) is the minimum over spine points q of q.t + sqrt(a^2 + |xbar - q.x|^2); the
        inner minimization is closed form on every stratum.

        Args:
            a (float): Level, a > 0
            X (numpy.ndarray): Array (M, n) of base plane points

        Returns:
            dict: Arrays "t" (M,) heights, "p" (M, n+1) level points, "r" (M, n+1) retractions,
                "N" (M, n+1) normals, "stratum" (M,) global stratum indices, "grad" (M, n) gradient of h_a
        """
        assert a > 0, "Levels must be positive"
        X = np.atleast_2d(np.asarray(X, dtype=float))
        assert X.shape[1] == self.n, "Base plane points have the wrong dimension"
        M = len(X)
        heights, feet = [], []
        w = X[:, None, :] - self._Q[None, :, 1:]
        heights.append(self._Q[None, :, 0] + np.sqrt(a ** 2 + np.sum(w ** 2, axis=-1)))
        feet.append(np.broadcast_to(self._Q[None], (M,) + self._Q.shape))
        if len(self._L):
            w = X[:, None, :] - self._q0[None, :, 1:]
            dbar = self._d[None, :, 1:]
            dt = self._d[None, :, 0]
            A = np.sum(dbar ** 2, axis=-1)
            B = np.sum(w * dbar, axis=-1)
            C = np.sum(w ** 2, axis=-1) + a ** 2
            s = (B - dt * np.sqrt(np.maximum(A * C - B ** 2, 0.0))) / A
            s = np.clip(s, 0.0, self._L[None])
            heights.append(self._q0[None, :, 0] + s * dt + np.sqrt(a ** 2 + np.sum((w - s[..., None] * dbar) ** 2, axis=-1)))
            feet.append(self._q0[None] + s[..., None] * self._d[None])
        for face in self._faces:
            t, foot = self._face_level(face, a, X)
            heights.append(t[:, None])
            feet.append(foot[:, None, :])
        heights = np.concatenate(heights, axis=1)
        feet = np.concatenate(feet, axis=1)
        best = np.argmin(heights, axis=1)
        rows = np.arange(M)
        t = heights[rows, best]
        p = np.concatenate([t[:, None], X], axis=1)
        r = feet[rows, best]
        N = (p - r) / a
        return {"t": t, "p": p, "r": r, "N": N, "stratum": best, "grad": N[:, 1:] / N[:, :1]}

    def _face_level(self, face : dict, a : float, X : np.ndarray):
        """Height of the level a above the interior of a face, +inf where the foot leaves the polygon"""
        nu = face["complement"]
        v0 = np.concatenate([np.zeros((len(X), 1)), X], axis=1) - face["origin"]
        alpha0 = -lorentz_dot(v0, nu[0])
        alpha1 = nu[0, 0]
        beta0 = np.stack([lorentz_dot(v0, e) for e in nu[1:]], axis=1) if len(nu) > 1 else np.zeros((len(X), 0))
        beta1 = -nu[1:, 0]
        A2 = alpha1 ** 2 - np.sum(beta1 ** 2)
        A1 = 2 * (alpha0 * alpha1 - beta0 @ beta1)
        A0 = alpha0 ** 2 - np.sum(beta0 ** 2, axis=1) - a ** 2
        t = (-A1 + np.sqrt(np.maximum(A1 ** 2 - 4 * A2 * A0, 0.0))) / (2 * A2)
        p = v0 + face["origin"]
        p[:, 0] = t
        v = p - face["origin"]
        alpha = -lorentz_dot(v, nu[0])
        component = alpha[:, None] * nu[0]
        for e in nu[1:]:
            component = component + lorentz_dot(v, e)[:, None] * e
        foot = p - component
        Y = np.stack([lorentz_dot(foot - face["origin"], e) for e in face["basis"]], axis=1)
        _, inside = _nearest_in_polygon(Y, face["polygon"])
        return np.where(inside & (alpha > 0), t, np.inf), foot

    def line_through(self, p : np.ndarray) -> GradientLine:
        """Gradient line through a point of the domain"""
        ev = self.cosmological_time(p)
        return GradientLine(ev.r, ev.N, ev.stratum)

    def gradient_line(self, r : np.ndarray, N : np.ndarray) -> GradientLine:
        """Validated gradient line with footpoint r and normal N

        The normal must lie in the normal region of the stratum of r, which is checked by
        evaluating the cosmological time at r + N and comparing its retraction with r.

        Raises:
            OffHyperboloid: If N is not a unit future timelike vector
            InvalidGradientLine: If r + N does not retract onto r
        """
        N = check_hyperbolic(N, HYPERBOLOID_STRICT_TOLERANCE * 100)
        ev = self.cosmological_time(np.asarray(r, dtype=float) + N)
        if np.max(np.abs(ev.r - r)) > LINE_TOLERANCE or abs(ev.T - 1.0) > LINE_TOLERANCE:
            raise InvalidGradientLine(f"Normal {N} is not in the normal region of the spine point {r}")
        return GradientLine(np.asarray(r, dtype=float), N, ev.stratum)

    def vertex_line(self, vertex : int, boost = None) -> GradientLine:
        """Gradient line of a spine vertex with normal given by a rapidity vector"""
        N = hyperbolic_point(np.zeros(self.n) if boost is None else boost)
        return self.gradient_line(self.spine.vertices[vertex], N)

    def edge_line(self, edge : int, s : float, rapidity : float = 0.0) -> GradientLine:
        """Gradient line of an interior edge point of a spine in R^{1,2}

        The normals of an edge point form the geodesic d^perp of the hyperboloid; it is
        parametrized by arclength from its point closest to (1, 0, 0).
        """
        assert self.n == 2, "Edge lines by rapidity are defined in R^{1,2}"
        assert 0 <= s <= self._L[edge], "Edge parameter out of range"
        d = self._d[edge]
        e0 = np.array([1.0, 0.0, 0.0])
        n0 = normalize_timelike(e0 - lorentz_dot(e0, d) * d)
        e = lorentz_cross(n0, d)
        e = e / np.sqrt(lorentz_norm2(e))
        N = np.cosh(rapidity) * n0 + np.sinh(rapidity) * e
        return self.gradient_line(self._q0[edge] + s * d, N)

    def face_line(self, face : int, coords) -> GradientLine:
        """Gradient line of an interior face point with the future unit normal of the face"""
        f = self._faces[face]
        r = f["origin"] + polygon_coords_to_plane(np.atleast_2d(coords), f["basis"])[0]
        return self.gradient_line(r, f["complement"][0])

    def null_support_boundary(self, xbar : np.ndarray, k : int = 64) -> float:
        """Inner approximation of the boundary graph from k sampled null support planes

        f(xbar) = max over directions w and spine points q of q.t + w . (xbar - q.x). For a fixed
        w the inner maximum over the spine is attained at a vertex.

        Args:
            xbar (numpy.ndarray): Base plane point
            k (int, optional): Number of sampled unit directions, k >= 8. Default is 64
        """
        assert k >= 8, "At least 8 directions are required"
        W = unit_directions(self.n, k)
        xbar = np.asarray(xbar, dtype=float)
        values = self._Q[None, :, 0] + W @ xbar[:, None] - W @ self._Q[:, 1:].T
        return float(np.max(values))

    def singular_set(self):
        """Initial singularity with its intrinsic path metric"""
        return SingularSet(self)


def polygon_coords_to_plane(Y : np.ndarray, basis : np.ndarray) -> np.ndarray:
    """Vector of the plane with the given coordinates in a Lorentz-orthonormal basis"""
    return np.asarray(Y) @ np.asarray(basis)


def unit_directions(n : int, k : int) -> np.ndarray:
    """k deterministic unit vectors of R^n, equispaced on the circle or a Fibonacci sphere"""
    if n == 2:
        angles = 2 * np.pi * np.arange(k) / k
        return np.stack([np.cos(angles), np.sin(angles)], axis=1)
    i = np.arange(k) + 0.5
    z = 1 - 2 * i / k
    phi = np.pi * (1 + 5 ** 0.5) * i
    rho = np.sqrt(1 - z ** 2)
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)


class SingularSet:
    """Spine of a regular domain with its intrinsic path metric

    Tree spines carry the edge weighted graph metric with Minkowski edge lengths, polygon spines the
    straight segment metric of the convex planar polygon, a single point the zero metric.

    Methods:
    public:
        locate(q : numpy.ndarray) -> Stratum: Spine cell containing a point
        distance(q1, q2) -> float: Path distance between two spine points or vertex ids
        vertex_matrix() -> numpy.ndarray: Distance matrix of the spine vertices
    """
    def __init__(self, domain : RegularDomain):
        self.domain = domain
        self.spine = domain.spine
        V = len(self.spine.vertices)
        if self.spine.kind == TREE and len(self.spine.edges):
            i = [e[0] for e in self.spine.edges]
            j = [e[1] for e in self.spine.edges]
            w = [self.spine.edge_length(k) for k in range(len(self.spine.edges))]
            graph = csr_matrix((w, (i, j)), shape=(V, V))
            self._D = shortest_path(graph, directed=False)
        elif self.spine.kind == POLYGON:
            diff = self.spine.vertices[:, None, :] - self.spine.vertices[None]
            self._D = spacelike_length(diff)
        else:
            self._D = np.zeros((V, V))

    def vertex_matrix(self) -> np.ndarray:
        return self._D.copy()

    def locate(self, q : np.ndarray) -> Stratum:
        """Stratum of a spine point, matched within 1e-8"""
        q = np.asarray(q, dtype=float)
        R, coords = self.domain._strata_retractions(q[None])
        gaps = np.max(np.abs(R[0] - q), axis=-1)
        index = int(np.argmax(gaps <= LINE_TOLERANCE)) if np.any(gaps <= LINE_TOLERANCE) else -1
        assert index >= 0, f"Point {q} is not on the spine"
        return self.domain._stratum(index, coords[0, index])

    def distance(self, q1, q2) -> float:
        """Intrinsic distance between spine points, given as vertex ids or Minkowski points"""
        v = self.spine.vertices
        p1 = v[q1] if np.isscalar(q1) else np.asarray(q1, dtype=float)
        p2 = v[q2] if np.isscalar(q2) else np.asarray(q2, dtype=float)
        if self.spine.kind == POINTS:
            return 0.0
        if self.spine.kind == POLYGON:
            return float(spacelike_length(p2 - p1))
        s1 = self._anchors(p1)
        s2 = self._anchors(p2)
        if s1[1] is not None and s1[1] == s2[1]:
            return float(abs(s1[2] - s2[2]))
        return float(min(o1 + self._D[a1, a2] + o2 for a1, o1 in s1[0] for a2, o2 in s2[0]))

    def _anchors(self, p : np.ndarray):
        """Vertices reachable from a tree point with their offsets, the edge index and parameter"""
        st = self.locate(p)
        if st.kind == VERTEX:
            return [(st.index, 0.0)], None, 0.0
        i, j, _ = self.spine.edges[st.index]
        s = st.coords[0]
        return [(i, s), (j, self.spine.edge_length(st.index) - s)], st.index, s
