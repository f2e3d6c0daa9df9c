"""Property testers for finite samples of metric spaces."""
import csv

import numpy as np

from CosmoTime.utils import IdMismatch, MetricViolation

TRIANGLE_FACTOR = 3.0
QUADRUPLE_NOISE_FACTOR = 5.0


class SampledMetric:
    """Finite metric with per entry error bars

    Attributes:
    public:
        ids (list): Point ids
        d (numpy.ndarray): Symmetric distance matrix with zero diagonal
        error (numpy.ndarray): Symmetric error bars, zero for exact metrics

    Methods:
    public:
        distance(x, y) -> float: Distance between two ids
        err(x, y) -> float: Error bar between two ids
        from_csv(filename : str) -> SampledMetric: Reads rows id,id,distance,error
        to_csv(filename : str): Writes rows id,id,distance,error

    Example:
        >>> m = SampledMetric(["x", "y"], np.array([[0., 1.], [1., 0.]]))
        >>> approx_midpoint_defect(m, "x", "y")
        0.5
    """
    def __init__(self, ids : list, d : np.ndarray, error : np.ndarray = None):
        """Constructor of the sampled metric

        Raises:
            MetricViolation: If d is not symmetric with zero diagonal or a triangle inequality
                fails by more than 3 times the error bars
        """
        self.ids = list(ids)
        self.d = np.asarray(d, dtype=float)
        self.error = np.zeros_like(self.d) if error is None else np.asarray(error, dtype=float)
        assert self.d.shape == (len(self.ids), len(self.ids)), "Distance matrix does not match the ids"
        assert self.error.shape == self.d.shape, "Error matrix does not match the distances"
        assert len(set(self.ids)) == len(self.ids), "Point ids must be unique"
        self._index = {x: i for i, x in enumerate(self.ids)}
        if not np.array_equal(self.d, self.d.T) or np.any(np.diag(self.d) != 0) or np.any(self.d < 0):
            raise MetricViolation("Distances must be symmetric, non-negative with zero diagonal")
        self._check_triangles()

    def _check_triangles(self):
        d, e = self.d, self.error
        # d[i,k] <= d[i,j] + d[j,k] for all triples, one middle point j at a time
        for j in range(len(self.ids)):
            slack = d[:, j][:, None] + d[j, :][None, :] - d + TRIANGLE_FACTOR * (e[:, j][:, None] + e[j, :][None, :] + e)
            if np.any(slack < 0):
                i, k = np.unravel_index(np.argmin(slack), slack.shape)
                raise MetricViolation(f"Triangle inequality fails for {self.ids[i]}, {self.ids[j]}, {self.ids[k]}")

    def __len__(self):
        return len(self.ids)

    def index(self, x) -> int:
        if x not in self._index:
            raise IdMismatch(f"Unknown point id {x}")
        return self._index[x]

    def distance(self, x, y) -> float:
        return float(self.d[self.index(x), self.index(y)])

    def err(self, x, y) -> float:
        return float(self.error[self.index(x), self.index(y)])

    def scaled(self, s : float):
        assert s > 0, "Scale factors must be positive"
        return SampledMetric(self.ids, s * self.d, s * self.error)

    @classmethod
    def from_csv(cls, filename : str):
        """Reads a metric from rows id,id,distance,error, header optional, one row per unordered pair"""
        rows = []
        with open(filename, "r", newline="") as f:
            for row in csv.reader(f):
                if not row or row[0].startswith("#"):
                    continue
                try:
                    rows.append((row[0], row[1], float(row[2]), float(row[3]) if len(row) > 3 else 0.0))
                except ValueError:
                    continue
        ids = sorted({r[0] for r in rows} | {r[1] for r in rows})
        index = {x: i for i, x in enumerate(ids)}
        d = np.zeros((len(ids), len(ids)))
        e = np.zeros_like(d)
        for x, y, value, error in rows:
            i, j = index[x], index[y]
            d[i, j] = d[j, i] = value
            e[i, j] = e[j, i] = error
        return cls(ids, d, e)

    def to_csv(self, filename : str):
        with open(filename, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["id", "id", "distance", "error"])
            for i in range(len(self.ids)):
                for j in range(i + 1, len(self.ids)):
                    writer.writerow([self.ids[i], self.ids[j], repr(float(self.d[i, j])), repr(float(self.error[i, j]))])


def _other_diagonal(D1 : float, a : float, b : float, c : float, e : float) -> float:
    """Second diagonal of the planar quadrilateral x1 y1 x2 y2 with sides a, b, c, e and diagonal |x1 x2| = D1

    y1 is placed on one side of the line x1 x2, y2 on the other; triangle inequalities are
    clamped, which gives the collinear configuration for non closable data.
    """
    if D1 <= 1e-15:
        return a + e
    u1 = (a ** 2 - b ** 2 + D1 ** 2) / (2 * D1)
    v1 = np.sqrt(max(a ** 2 - u1 ** 2, 0.0))
    u2 = (e ** 2 - c ** 2 + D1 ** 2) / (2 * D1)
    v2 = -np.sqrt(max(e ** 2 - u2 ** 2, 0.0))
    return float(np.hypot(u1 - u2, v1 - v2))


def cat0_four_point(m : SampledMetric, quadruple) -> float:
    """Margin of the CAT(0) four point condition of (x1, y1, x2, y2)

    The sides d(x1,y1), d(y1,x2), d(x2,y2), d(y2,x1) are kept in a planar quadrilateral with one hinge
    degree of freedom, parametrized by the diagonal |x1 x2|. The hinge is set where |x1 x2| = d(x1,x2),
    or at the closest attainable value, and the margin is |y1 y2| - d(y1,y2) there. When d(x1,x2)
    exceeds the largest attainable diagonal, the margin is the smaller of the two diagonal surpluses
    of that boundary configuration.

    Returns:
        float: Margin, >= 0 iff the quadruple passes
    """
    x1, y1, x2, y2 = quadruple
    a, b = m.distance(x1, y1), m.distance(y1, x2)
    c, e = m.distance(x2, y2), m.distance(y2, x1)
    dx, dy = m.distance(x1, x2), m.distance(y1, y2)
    lo = max(abs(a - b), abs(c - e))
    hi = min(a + b, c + e)
    if lo > hi:
        lo = hi = 0.5 * (lo + hi)
    if dx > hi:
        return float(min(hi - dx, _other_diagonal(hi, a, b, c, e) - dy))
    return float(_other_diagonal(max(dx, lo), a, b, c, e) - dy)


def approx_midpoint_defect(m : SampledMetric, x, y) -> float:
    """min over sampled z of max(d(x,z), d(y,z)) - d(x,y)/2"""
    i, j = m.index(x), m.index(y)
    return float(np.min(np.maximum(m.d[i], m.d[j])) - 0.5 * m.d[i, j])


def tree_four_point(m : SampledMetric, quadruple) -> float:
    """Defect of the tree four point condition of (x, y, z, w)

    defect = max(0, d(x,y) + d(z,w) - max(d(x,z) + d(y,w), d(x,w) + d(y,z))), zero for tree metrics.
    """
    x, y, z, w = quadruple
    lhs = m.distance(x, y) + m.distance(z, w)
    rhs = max(m.distance(x, z) + m.distance(y, w), m.distance(x, w) + m.distance(y, z))
    return float(max(0.0, lhs - rhs))


def bilipschitz_ratio(m1 : SampledMetric, m2 : SampledMetric):
    """Extreme ratios m1/m2 over the pairs of shared ids

    Pairs where both distances are below the combined error bar are skipped.

    Returns:
        tuple: (min ratio, max ratio), None entries when no pair qualifies

    Raises:
        IdMismatch: If the metrics have different id sets
    """
    if set(m1.ids) != set(m2.ids):
        raise IdMismatch("Metrics must share their point ids")
    order = [m2.index(x) for x in m1.ids]
    d2 = m2.d[np.ix_(order, order)]
    e = m1.error + m2.error[np.ix_(order, order)]
    i, j = np.triu_indices(len(m1), 1)
    keep = ~((m1.d[i, j] < e[i, j]) & (d2[i, j] < e[i, j]))
    assert np.all(d2[i, j][keep] > 0), "Second metric must be positive where the first is"
    ratios = m1.d[i, j][keep] / d2[i, j][keep]
    if len(ratios) == 0:
        return None, None
    return float(ratios.min()), float(ratios.max())


def quadruple_error(m : SampledMetric, quadruple) -> float:
    """Sum of the error bars of the six distances of a quadruple"""
    idx = [m.index(x) for x in quadruple]
    return float(sum(m.error[idx[p], idx[q]] for p in range(4) for q in range(p + 1, 4)))


def sample_quadruples(m : SampledMetric, count : int, sampler, max_attempts : int = 100) -> list:
    """Uniform quadruples of distinct ids whose six distances exceed 5 times their error bars

    Args:
        sampler (Sampling): Source of the random draws
        max_attempts (int, optional): Draws per requested quadruple before giving up. Default is 100

    Returns:
        list: Up to count quadruples of ids
    """
    if len(m) < 4:
        return []
    accepted = []
    off = ~np.eye(4, dtype=bool)
    for _ in range(max_attempts):
        for quad in sampler.quadruples(count, len(m)):
            block = m.d[np.ix_(quad, quad)]
            noise = QUADRUPLE_NOISE_FACTOR * m.error[np.ix_(quad, quad)]
            if np.all(block[off] > noise[off]):
                accepted.append(tuple(m.ids[k] for k in quad))
                if len(accepted) == count:
                    return accepted
    return accepted


def margin_histogram(values, bins : int = 20, filename : str = None):
    """Histogram of margins, written as rows left,right,count when a filename is given

    Returns:
        tuple: (counts, edges) as numpy.histogram
    """
    values = np.asarray(values, dtype=float)
    counts, edges = np.histogram(values, bins=bins) if len(values) else (np.zeros(bins, dtype=int), np.linspace(0, 1, bins + 1))
    if filename is not None:
        with open(filename, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["left", "right", "count"])
            for k in range(len(counts)):
                writer.writerow([repr(float(edges[k])), repr(float(edges[k + 1])), int(counts[k])])
    return counts, edges
