"""Polynomial skew-product families on C^2 and their closed-form invariants.

The maps under study are

    F_t(z, w) = (z^d', w^d + t*(c_1(z) w^{d-1} + ... + c_d(z))),

restricted to the solid torus S^1 x C.  The coefficients c_k are polynomials
in z, which keeps every circle integral of |c_k|^2 (and the collision cross
term) exact via Parseval.  All operations here are pure and accept numpy
arrays wherever a complex argument makes sense.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CriticalPoint

_UNIT_TOL = 1e-12


@dataclass(frozen=True)
class CoeffPoly:
    """One coefficient polynomial c(z) = sum_j a_j z^j, possibly the zero polynomial."""

    coefficients: tuple[complex, ...] = ()

    def __post_init__(self):
        coeffs = tuple(complex(a) for a in self.coefficients)
        for a in coeffs:
            if not (math.isfinite(a.real) and math.isfinite(a.imag)):
                raise ValueError("coefficient polynomial has a non-finite entry")
        object.__setattr__(self, "coefficients", coeffs)

    def __call__(self, z):
        """Evaluate at z (scalar or ndarray) by Horner's rule."""
        if not self.coefficients:
            return np.zeros_like(np.asarray(z), dtype=complex) if isinstance(z, np.ndarray) else 0j
        acc = None
        for a in reversed(self.coefficients):
            acc = a if acc is None else acc * z + a
        return acc

    @property
    def is_zero(self) -> bool:
        return all(a == 0 for a in self.coefficients)

    def sup_circle_bound(self) -> float:
        """Upper bound for sup_{|z|=1} |c(z)| (triangle inequality; exact for monomials)."""
        return float(sum(abs(a) for a in self.coefficients))

    def mean_square_on_circle(self) -> float:
        """Exact value of the normalized circle integral of |c|^2 (Parseval)."""
        return float(sum(abs(a) ** 2 for a in self.coefficients))


@dataclass(frozen=True)
class SkewFamily:
    """Degrees (d, d') and the d fiber coefficient polynomials c_1..c_d."""

    d: int
    d_prime: int
    coeffs: tuple[CoeffPoly, ...]

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("fiber degree d must be >= 2")
        if self.d_prime < 2:
            raise ValueError("base degree d_prime must be >= 2")
        coeffs = tuple(
            c if isinstance(c, CoeffPoly) else CoeffPoly(tuple(c)) for c in self.coeffs
        )
        if len(coeffs) != self.d:
            raise ValueError(f"need exactly d={self.d} coefficient polynomials, got {len(coeffs)}")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def is_monomial(self) -> bool:
        """True when every c_k vanishes, i.e. the map is (z,w) -> (z^d', w^d) for all t."""
        return all(c.is_zero for c in self.coeffs)

    def sup_coefficient_sum(self) -> float:
        """Upper bound for sup_{|z|=1} sum_k |c_k(z)|."""
        return float(sum(c.sup_circle_bound() for c in self.coeffs))

    def absorbing_radius(self, t: complex) -> float:
        """Radius beyond which fiber orbits escape monotonically (crude, safe)."""
        return 4.0 * (1.0 + self.sup_coefficient_sum() * abs(t))

    def describe(self) -> str:
        parts = []
        for k, c in enumerate(self.coeffs, start=1):
            if not c.is_zero:
                parts.append(f"c{k}={list(c.coefficients)}")
        body = ", ".join(parts) if parts else "all c_k = 0"
        return f"d={self.d}, d'={self.d_prime}, {body}"


@dataclass(frozen=True)
class TorusPoint:
    """A point (z, w) with z kept on the unit circle (renormalized on construction)."""

    z: complex
    w: complex

    def __post_init__(self):
        z = complex(self.z)
        r = abs(z)
        if r == 0.0 or not math.isfinite(r):
            raise ValueError("base coordinate must be a nonzero finite complex number")
        if abs(r - 1.0) > _UNIT_TOL:
            z = z / r
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "w", complex(self.w))


# ---------------------------------------------------------------------------
# Vectorized fiber kernels (shared by the escape, continuation and pressure code)
# ---------------------------------------------------------------------------

def fiber_map(fam: SkewFamily, t: complex, z, w):
    """q_t(z, w) = w^d + t * sum_k c_k(z) w^{d-k}, vectorized over z, w."""
    acc = np.ones_like(np.asarray(w), dtype=complex) if isinstance(w, np.ndarray) else 1.0 + 0j
    for c in fam.coeffs:
        acc = acc * w + (0j if c.is_zero else t * c(z))
    return acc


def fiber_dw(fam: SkewFamily, t: complex, z, w):
    """d/dw of the fiber polynomial, vectorized over z, w."""
    d = fam.d
    acc = np.full_like(np.asarray(w), d, dtype=complex) if isinstance(w, np.ndarray) else complex(d)
    for k in range(1, d):
        c = fam.coeffs[k - 1]
        acc = acc * w + (0j if c.is_zero else t * (d - k) * c(z))
    return acc


def base_map(fam: SkewFamily, z):
    """z -> z^{d'}, renormalized to unit modulus to stop drift under iteration."""
    zn = z ** fam.d_prime
    return zn / np.abs(zn) if isinstance(zn, np.ndarray) else zn / abs(zn)


# ---------------------------------------------------------------------------
# Public map operations
# ---------------------------------------------------------------------------

def eval_map(fam: SkewFamily, t: complex, p: TorusPoint) -> TorusPoint:
    """Apply F_t once; the base coordinate is renormalized to the unit circle."""
    return TorusPoint(base_map(fam, p.z), fiber_map(fam, t, p.z, p.w))


def vertical_derivative(fam: SkewFamily, t: complex, p: TorusPoint) -> complex:
    """Vertical (fiber) derivative of F_t at p."""
    return fiber_dw(fam, t, p.z, p.w)


def potential(fam: SkewFamily, t: complex, p: TorusPoint) -> float:
    """Geometric potential -log|Jac F_t| = -log(d' |dq/dw|) on the unit base circle.

    Raises
    ------
    CriticalPoint
        If the vertical derivative is below 1e-30 in modulus.
    """
    dq = fiber_dw(fam, t, p.z, p.w)
    m = abs(dq)
    if m < 1e-30:
        raise CriticalPoint(f"vertical derivative vanished at z={p.z}, w={p.w}")
    return -math.log(fam.d_prime * m)


def potential_array(fam: SkewFamily, t: complex, z: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Vectorized geometric potential; raises CriticalPoint if any point is critical."""
    m = np.abs(fiber_dw(fam, t, z, w))
    if np.any(m < 1e-30):
        raise CriticalPoint("vertical derivative vanished on a batch point")
    return -(math.log(fam.d_prime) + np.log(m))


# ---------------------------------------------------------------------------
# Closed-form theory derived from the coefficients
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TheoreticalQuantities:
    """Exact second-order data computed from the coefficient polynomials.

    S               sum_k k^2 * (circle mean of |c_k|^2)
    I_theory        asymptotic boundary energy S/(d^2 log d)     (matching base degree)
    var_theory      asymptotic variance S/(2 d^2)
    ddot_delta      second parameter derivative of the pressure zero,
                    var_theory / (log d + log d')
    vd_coefficient  quadratic coefficient of the volume dimension, ddot_delta/4
    cross_term      collision correction 2d * Re-integral of c_d(z) conj(c_1(z^d)),
                    reported in the same units as S (informational)
    """

    S: float
    I_theory: float
    var_theory: float
    ddot_delta: float
    vd_coefficient: float
    cross_term: float


def collision_cross_term(fam: SkewFamily) -> float:
    """Exact value of 2d * Int Re[c_d(z) conj(c_1(z^d))] dLeb_1, via Fourier pairing.

    Only exponent pairs j = d*l survive the circle integral, so the value is
    2d * Re sum_l a_{d, d*l} * conj(a_{1, l}).
    """
    a_top = fam.coeffs[fam.d - 1].coefficients
    a_one = fam.coeffs[0].coefficients
    total = 0j
    for l, a1 in enumerate(a_one):
        j = fam.d * l
        if j < len(a_top):
            total += a_top[j] * np.conj(a1)
    return 2.0 * fam.d * float(total.real)


def theoretical_quantities(fam: SkewFamily) -> TheoreticalQuantities:
    """All closed-form targets; pure coefficient arithmetic, no numerics."""
    S = sum(k * k * fam.coeffs[k - 1].mean_square_on_circle() for k in range(1, fam.d + 1))
    d = fam.d
    log_d = math.log(d)
    denom = math.log(d) + math.log(fam.d_prime)
    var_theory = S / (2.0 * d * d)
    ddot = var_theory / denom
    return TheoreticalQuantities(
        S=float(S),
        I_theory=float(S / (d * d * log_d)),
        var_theory=float(var_theory),
        ddot_delta=float(ddot),
        vd_coefficient=float(ddot / 4.0),
        cross_term=collision_cross_term(fam),
    )


# ---------------------------------------------------------------------------
# Canonical test families used throughout the suite and the demos
# ---------------------------------------------------------------------------

def family_from_dict(d: int, d_prime: int, coefficient_lists) -> SkewFamily:
    """Build a family from nested [re, im] coefficient lists (the config format)."""
    polys = []
    for entry in coefficient_lists:
        polys.append(CoeffPoly(tuple(complex(re, im) for re, im in entry)))
    return SkewFamily(d=d, d_prime=d_prime, coeffs=tuple(polys))


FAMILY_A = SkewFamily(d=2, d_prime=2, coeffs=(CoeffPoly(), CoeffPoly((1,))))
FAMILY_B = SkewFamily(d=2, d_prime=2, coeffs=(CoeffPoly((0, 1)), CoeffPoly()))
FAMILY_C = SkewFamily(d=3, d_prime=3, coeffs=(CoeffPoly(), CoeffPoly(), CoeffPoly((1,))))
FAMILY_D = SkewFamily(d=2, d_prime=2, coeffs=(CoeffPoly((1,)), CoeffPoly((1,))))
