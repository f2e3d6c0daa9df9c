"""De Sitter and anti de Sitter rescalings of flat regular domains in R^{1,2}.

Along the gradient of the cosmological time T the flat metric is rescaled to

    de Sitter:      -dT^2 / (1 - T^2)^2 + g_perp / (1 - T^2),    new time argth(T)
    anti de Sitter: -dT^2 / (1 + T^2)^2 + g_perp / (1 + T^2),    new time arctan(T)

so lengths inside a level are multiplied by cosh and cos of the new time.
"""
from dataclasses import dataclass

import numpy as np

from CosmoTime.domain import RegularDomain, GradientLine
from CosmoTime.levelset import MeshSettings, DistanceEstimate, level_distance
from CosmoTime.minkowski import lorentz_dot
from CosmoTime.utils import InvalidRange, FocalPoint

FLAT = "flat"
DE_SITTER = "ds"
ANTI_DE_SITTER = "ads"


def ds_time(T : float) -> float:
    """De Sitter cosmological time argth(T) of a flat time T in (0, 1)

    Raises:
        InvalidRange: If T is outside (0, 1)
    """
    if not 0 < T < 1:
        raise InvalidRange(f"De Sitter rescaling needs flat times in (0, 1), got {T}")
    return float(np.arctanh(T))


def ads_time(T : float) -> float:
    """Anti de Sitter cosmological time arctan(T) of a flat time T > 0

    Raises:
        InvalidRange: If T <= 0
    """
    if not T > 0:
        raise InvalidRange(f"Anti de Sitter rescaling needs positive flat times, got {T}")
    return float(np.arctan(T))


@dataclass
class WickGeometry:
    """Wick rotation of a flat regular domain of R^{1,2}

    Attributes:
        kind (str): "ds" or "ads"
        domain (RegularDomain): Flat domain, n = 2
    """
    kind : str
    domain : RegularDomain

    def __post_init__(self):
        assert self.kind in (DE_SITTER, ANTI_DE_SITTER), f"Unknown Wick geometry {self.kind}"
        assert self.domain.n == 2, "Wick rotations are defined for domains of R^{1,2}"

    def flat_level(self, a : float) -> float:
        """Flat time of the rescaled level a"""
        check_level(a, self.kind)
        return float(np.tanh(a) if self.kind == DE_SITTER else np.tan(a))

    def length_factor(self, a : float) -> float:
        check_level(a, self.kind)
        return float(np.cosh(a) if self.kind == DE_SITTER else np.cos(a))

    def conformal_factors(self, T):
        """Factors of the gradient direction and of its orthogonal complement at flat time T"""
        T = np.asarray(T, dtype=float)
        base = 1.0 - T ** 2 if self.kind == DE_SITTER else 1.0 + T ** 2
        return 1.0 / base ** 2, 1.0 / base


def check_level(a : float, kind : str):
    """Raises InvalidRange unless a is a valid rescaled level of the geometry"""
    if kind == DE_SITTER and not a > 0:
        raise InvalidRange(f"De Sitter levels must be positive, got {a}")
    if kind == ANTI_DE_SITTER and not 0 < a < np.pi / 2:
        raise InvalidRange(f"Anti de Sitter levels must lie in (0, pi/2), got {a}")


def wick_level_distance(geom : WickGeometry, a : float, line1 : GradientLine, line2 : GradientLine,
                        settings : MeshSettings = None) -> DistanceEstimate:
    """Intrinsic distance on the rescaled level a

    Computed on the flat level tanh(a) (de Sitter) or tan(a) (anti de Sitter) and multiplied by
    cosh(a) or cos(a).
    """
    flat = level_distance(geom.domain, geom.flat_level(a), line1, line2, settings)
    return flat.scaled(geom.length_factor(a))


def wick_bilip_bounds(kind : str, a : float, b : float):
    """Bounds on the ratio of the rescaled metrics of the levels a >= b

    De Sitter: (1, (sinh a / sinh b)^2). Anti de Sitter: ((cos a / cos b)^2, (sin a / sin b)^2).

    Raises:
        InvalidRange: If the levels are not ordered or outside the range of the geometry
    """
    check_level(a, kind)
    check_level(b, kind)
    if b > a:
        raise InvalidRange(f"Levels must satisfy a >= b, got a = {a}, b = {b}")
    if kind == DE_SITTER:
        return 1.0, float((np.sinh(a) / np.sinh(b)) ** 2)
    return float((np.cos(a) / np.cos(b)) ** 2), float((np.sin(a) / np.sin(b)) ** 2)


def curvature_transport(l1 : float, l2 : float, a : float, geometry : str = FLAT) -> float:
    """Gauss curvature of the parallel surface at distance a from a surface with principal curvatures l1, l2

    flat: principal curvatures transport as l / (1 + a l) and k = -l1 l2 / ((1 + a l1)(1 + a l2)).
    de Sitter: they transport as (l + tanh a) / (1 + l tanh a) and k = -l1(a) l2(a). The intrinsic
    curvature of the level in the de Sitter metric is 1 + k.

    Raises:
        FocalPoint: If the parallel surface crosses a focal point
    """
    assert a >= 0, "Transport distances must be non-negative"
    if geometry == FLAT:
        d1, d2 = 1.0 + a * l1, 1.0 + a * l2
        if d1 <= 0 or d2 <= 0:
            raise FocalPoint(f"Focal point reached before distance {a}")
        return float(-l1 * l2 / (d1 * d2))
    if geometry == DE_SITTER:
        t = np.tanh(a)
        d1, d2 = 1.0 + l1 * t, 1.0 + l2 * t
        if d1 <= 0 or d2 <= 0:
            raise FocalPoint(f"Focal point reached before distance {a}")
        return float(-(l1 + t) * (l2 + t) / (d1 * d2))
    raise ValueError(f"Unknown geometry {geometry}")


def wick_gauss_curvature(flat_curvature : float, T : float, kind : str) -> float:
    """Gauss curvature of a level in the rescaled metric from its flat curvature at flat time T

    The level metric is multiplied by 1/(1 - T^2) (de Sitter) or 1/(1 + T^2) (anti de Sitter),
    which divides the curvature by the same factor.
    """
    if kind == DE_SITTER:
        ds_time(T)
        return float(flat_curvature * (1.0 - T ** 2))
    ads_time(T)
    return float(flat_curvature * (1.0 + T ** 2))


def ds_k_barrier(b : float, H0 : float = 0.0, H1 : float = 0.0):
    """Bounds on the de Sitter cosmological time along the k-time level b

    The k-time level b lies between the cosmological levels
    upper = argcoth(sqrt((b^2 + 1) / b^2)),
    lower = argth(H0 / (b^2 + 2) + sqrt(H1^2 + (b^2 - 1)(b^2 + 2)) / (b^2 + 2)),
    where H0 <= H1 bound the mean curvature of the k-time level 1.

    Returns:
        tuple: (lower, upper)

    Raises:
        InvalidRange: If b <= 1 or an argument leaves the domain of argth
    """
    if not b > 1:
        raise InvalidRange(f"Barriers need b > 1, got {b}")
    assert H0 <= H1, "Mean curvature bounds must satisfy H0 <= H1"
    upper_arg = np.sqrt(b ** 2 / (b ** 2 + 1))
    lower_arg = H0 / (b ** 2 + 2) + np.sqrt(H1 ** 2 + (b ** 2 - 1) * (b ** 2 + 2)) / (b ** 2 + 2)
    if not -1 < lower_arg < 1:
        raise InvalidRange(f"argth argument {lower_arg} outside (-1, 1)")
    return float(np.arctanh(lower_arg)), float(np.arctanh(upper_arg))


def ds_k_barrier_gap_limit(H0 : float = 0.0) -> float:
    """Limit of upper - lower for b -> infinity, 1/2 log(3 - 2 H0)"""
    assert H0 < 1.5, "The limit needs H0 < 3/2"
    return float(0.5 * np.log(3.0 - 2.0 * H0))


def wick_normal_pairing(N : np.ndarray, n : np.ndarray, T, kind : str) -> np.ndarray:
    """|pairing| of the rescaled cosmological normal and the rescaled normal of a surface

    With cosh(theta) = |<N, n>| the flat angle between the normals and c = 1/(1 - T^2)
    (de Sitter) or 1/(1 + T^2) (anti de Sitter) the ratio of the normal and orthogonal
    conformal factors, the pairing is cosh(theta) / sqrt(cosh^2(theta) - c sinh^2(theta)).
    """
    T = np.asarray(T, dtype=float)
    ch = np.abs(lorentz_dot(N, n))
    sh2 = np.maximum(ch ** 2 - 1.0, 0.0)
    c = 1.0 / (1.0 - T ** 2) if kind == DE_SITTER else 1.0 / (1.0 + T ** 2)
    denominator = ch ** 2 - c * sh2
    return np.where(denominator > 0, ch / np.sqrt(np.where(denominator > 0, denominator, 1.0)), np.inf)


def wick_pairing_bound(T_sup : float, T_inf : float, kind : str) -> float:
    """sinh(argth T_sup) / sinh(argth T_inf) (de Sitter) or tan(arctan T_sup) / tan(arctan T_inf)"""
    if kind == DE_SITTER:
        return float(np.sinh(ds_time(T_sup)) / np.sinh(ds_time(T_inf)))
    return float(np.tan(ads_time(T_sup)) / np.tan(ads_time(T_inf)))
