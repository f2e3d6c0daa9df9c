"""Lorentzian linear algebra on the Minkowski space R^{1,n}, n in {2, 3}.

Vectors are numpy arrays whose last axis holds (t, x_1, ..., x_n). All
functions accept stacked arrays of shape (..., n+1) unless stated otherwise.
"""
from dataclasses import dataclass

import numpy as np

from CosmoTime.utils import DimensionMismatch, OffHyperboloid

CAUSAL_TOLERANCE = 1e-12
HYPERBOLOID_TOLERANCE = 1e-8
HYPERBOLOID_STRICT_TOLERANCE = 1e-10

TIMELIKE = "timelike"
LIGHTLIKE = "lightlike"
SPACELIKE = "spacelike"
ZERO = "zero"

FUTURE = "future"
PAST = "past"
NONE = "none"


@dataclass(frozen=True)
class CausalClass:
    """Causal type of a Minkowski vector

    Attributes:
        kind (str): One of "timelike", "lightlike", "spacelike", "zero"
        orientation (str): "future" or "past" for causal vectors, "none" otherwise
    """
    kind : str
    orientation : str

    def __post_init__(self):
        causal = self.kind in (TIMELIKE, LIGHTLIKE)
        assert causal == (self.orientation != NONE), "Orientation is only defined for causal vectors"


def mink_vec(t : float, x) -> np.ndarray:
    """Builds a Minkowski vector from its time coordinate and spatial part

    Args:
        t (float): Time coordinate x^0
        x (array_like): Spatial coordinates, length 2 or 3

    Returns:
        numpy.ndarray: Vector (t, x_1, ..., x_n)

    Raises:
        AssertionError: If the spatial dimension is not 2 or 3 or a component is not finite
    """
    v = np.concatenate([[float(t)], np.asarray(x, dtype=float).reshape(-1)])
    assert v.shape[0] in (3, 4), "Only R^{1,2} and R^{1,3} are supported"
    assert np.all(np.isfinite(v)), "Minkowski vectors must have finite components"
    return v


def _check_dimensions(a : np.ndarray, b : np.ndarray):
    if np.shape(a)[-1] != np.shape(b)[-1]:
        raise DimensionMismatch(f"Cannot pair vectors of R^{{1,{np.shape(a)[-1]-1}}} and R^{{1,{np.shape(b)[-1]-1}}}")


def lorentz_dot(a : np.ndarray, b : np.ndarray):
    """Lorentzian form -a.t*b.t + sum a.x_i*b.x_i, broadcast over leading axes

    Raises:
        DimensionMismatch: If the vectors live in different dimensions
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _check_dimensions(a, b)
    return np.sum(a[..., 1:] * b[..., 1:], axis=-1) - a[..., 0] * b[..., 0]


def lorentz_norm2(v : np.ndarray):
    return lorentz_dot(v, v)


def spacelike_length(v : np.ndarray):
    """Length sqrt(<v,v>) of a spacelike (or null) vector, clamped at 0"""
    return np.sqrt(np.maximum(lorentz_norm2(v), 0.0))


def causal_class(v : np.ndarray) -> CausalClass:
    """Classifies a single vector by the sign of <v,v> and of its time component"""
    v = np.asarray(v, dtype=float)
    q = lorentz_norm2(v)
    if np.all(np.abs(v) <= CAUSAL_TOLERANCE):
        return CausalClass(ZERO, NONE)
    if q > CAUSAL_TOLERANCE:
        return CausalClass(SPACELIKE, NONE)
    kind = TIMELIKE if q < -CAUSAL_TOLERANCE else LIGHTLIKE
    return CausalClass(kind, FUTURE if v[0] > 0 else PAST)


def is_future_timelike(v : np.ndarray, threshold : float = 0.0):
    """Vectorized test -<v,v> > threshold and v.t > 0"""
    v = np.asarray(v, dtype=float)
    return (-lorentz_norm2(v) > threshold) & (v[..., 0] > 0)


def check_hyperbolic(v : np.ndarray, tolerance : float = HYPERBOLOID_TOLERANCE) -> np.ndarray:
    """Validates that v lies on the future sheet of the unit hyperboloid

    Raises:
        OffHyperboloid: If |<v,v> + 1| exceeds the tolerance or v is past oriented
    """
    v = np.asarray(v, dtype=float)
    if np.any(np.abs(lorentz_norm2(v) + 1.0) > tolerance) or np.any(v[..., 0] <= 0):
        raise OffHyperboloid(f"Vector {v} is not on the future unit hyperboloid")
    return v


def normalize_timelike(v : np.ndarray) -> np.ndarray:
    """Rescales a future timelike vector onto the unit hyperboloid"""
    v = np.asarray(v, dtype=float)
    return v / np.sqrt(-lorentz_norm2(v))[..., None]


def normalize_spacelike(v : np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.sqrt(lorentz_norm2(v))[..., None]


def hyperbolic_distance(u : np.ndarray, v : np.ndarray):
    """Distance arccosh(-<u,v>) between points of the hyperboloid model

    The argument of arccosh is clamped to >= 1 so that rounding noise for u close
    to v does not produce NaN.

    Raises:
        OffHyperboloid: If an input is off the hyperboloid beyond 1e-8
    """
    check_hyperbolic(u)
    check_hyperbolic(v)
    return np.arccosh(np.maximum(-lorentz_dot(u, v), 1.0))


def hyperbolic_point(boost) -> np.ndarray:
    """Image of the origin (1, 0, ..., 0) under the boost with rapidity vector beta

    The result is (cosh|beta|, sinh|beta| beta/|beta|).

    Args:
        boost (array_like): Rapidity vector of length n
    """
    beta = np.asarray(boost, dtype=float).reshape(-1)
    rho = np.linalg.norm(beta)
    if rho == 0.0:
        return mink_vec(1.0, np.zeros_like(beta))
    return mink_vec(np.cosh(rho), np.sinh(rho) * beta / rho)


def rapidity(v : np.ndarray) -> np.ndarray:
    """Inverse of hyperbolic_point"""
    v = check_hyperbolic(v)
    spatial = v[1:]
    norm = np.linalg.norm(spatial)
    if norm == 0.0:
        return np.zeros_like(spatial)
    return np.arcsinh(norm) * spatial / norm


def lorentz_cross(a : np.ndarray, b : np.ndarray) -> np.ndarray:
    """Vector of R^{1,2} Lorentz-orthogonal to a and b

    Uses J(a x b) with J = diag(-1, 1, 1), which satisfies <J(a x b), a> = 0.
    """
    assert np.shape(a)[-1] == 3 and np.shape(b)[-1] == 3, "The Lorentz cross product is defined on R^{1,2}"
    c = np.cross(a, b)
    c[..., 0] *= -1.0
    return c


def lorentz_gram_schmidt(vectors) -> np.ndarray:
    """Orthonormalizes spacelike vectors spanning a spacelike subspace

    Args:
        vectors (array_like): Rows spanning a spacelike subspace

    Returns:
        numpy.ndarray: Rows forming a Lorentz-orthonormal basis of the same subspace
    """
    basis = []
    for v in np.asarray(vectors, dtype=float):
        w = v.copy()
        for e in basis:
            w = w - lorentz_dot(w, e) * e
        norm2 = lorentz_norm2(w)
        assert norm2 > CAUSAL_TOLERANCE, "Vectors do not span a spacelike subspace"
        basis.append(w / np.sqrt(norm2))
    return np.asarray(basis)


def orthogonal_complement(basis : np.ndarray) -> np.ndarray:
    """Lorentz-orthonormal basis of the orthogonal complement of a spacelike subspace

    The first row is the future unit timelike vector of the complement, the
    remaining rows are spacelike.

    Args:
        basis (numpy.ndarray): Lorentz-orthonormal spacelike rows
    """
    dim = basis.shape[1]
    complement = []
    for e in np.eye(dim):
        w = e.copy()
        for b in list(basis):
            w = w - lorentz_dot(w, b) * b
        for c in complement:
            w = w - lorentz_dot(w, c) / lorentz_norm2(c) * c
        if np.abs(lorentz_norm2(w)) > 1e-9:
            complement.append(w / np.sqrt(np.abs(lorentz_norm2(w))))
        if len(complement) == dim - basis.shape[0]:
            break
    complement = np.asarray(complement)
    # Bring the timelike direction to the front and orient it to the future
    norms = lorentz_norm2(complement)
    order = np.argsort(norms)
    complement = complement[order]
    if complement[0, 0] < 0:
        complement[0] = -complement[0]
    return complement


def separating_normal_bound(n1 : np.ndarray, n2 : np.ndarray) -> float:
    """Upper bound 1/sqrt(<n1,n2>^2 - 1) on <v,n1> for unit spacelike v separating n1 and n2

    Any unit spacelike v with <v,n1> >= 0 and <v,n2> <= 0 satisfies
    0 <= <v,n1> <= 1/sqrt(<n1,n2>^2 - 1).
    """
    c = lorentz_dot(check_hyperbolic(n1), check_hyperbolic(n2))
    assert c ** 2 > 1.0, "The normals must be distinct"
    return 1.0 / np.sqrt(c ** 2 - 1.0)


def normal_pairing_bound(a : float, b : float, geometry : str = "flat") -> float:
    """Bound on |<N_p, x>| for a spacelike support plane at a point of level b below level a

    flat: a/b, de Sitter: sinh(a)/sinh(b), anti de Sitter: tan(a)/tan(b).
    """
    assert 0 < b <= a, "The levels must satisfy 0 < b <= a"
    if geometry == "flat":
        return a / b
    if geometry == "ds":
        return np.sinh(a) / np.sinh(b)
    if geometry == "ads":
        assert a < np.pi / 2, "Anti de Sitter levels must be below pi/2"
        return np.tan(a) / np.tan(b)
    raise ValueError(f"Unknown geometry {geometry}")
