"""Fiberwise escape rate, the coordinate at infinity, and the basin conjugacy.

The escape rate G(z, w) = lim d^{-n} log+|Q_n| and the conformal coordinate
phi_z(w) (tangent to the identity at infinity, |phi| = e^G) are evaluated by
a telescoping product along the fiber orbit

    Q_{n+1} / Q_n^d = 1 + t * sum_k c_k(z_n) / Q_n^k,

which converges superexponentially once the orbit escapes.  The raw limit
d^{-n} log|Q_n| loses all precision long before it settles; the telescoped
form does not.

The conjugacy H_t from the reference map (z, w) -> (z^{d'}, w^d) to F_t is
the inverse coordinate, obtained by Newton iteration on phi_{t,z}(w) = omega.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

from .errors import BranchAmbiguity, NewtonDivergence, NotInBasin, SlowEscape
from .family import SkewFamily, TorusPoint, base_map, fiber_dw

_NEWTON_CAP = 50


@dataclass(frozen=True)
class GreenParams:
    """Truncation policy for the escape-rate limit."""

    escape_radius: float = 1e6
    max_iters: int = 200
    tol: float = 1e-12

    def __post_init__(self):
        if not self.escape_radius > 10:
            raise ValueError("escape_radius must exceed 10")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


def _apply_fiber(fam: SkewFamily, t: complex, z: complex, q: complex) -> complex:
    acc = 1.0 + 0j
    for c in fam.coeffs:
        acc = acc * q + (0j if c.is_zero else t * c(z))
    return acc


def _coeff_sum_over_powers(fam: SkewFamily, t: complex, z: complex, q: complex) -> complex:
    """t * sum_k c_k(z) q^{-k}, evaluated by Horner in 1/q (q != 0)."""
    inv = 1.0 / q
    acc = 0j
    for c in reversed(fam.coeffs):
        acc = (acc + (0j if c.is_zero else c(z))) * inv
    return t * acc


def _escape_orbit(fam: SkewFamily, t: complex, p: TorusPoint, params: GreenParams):
    """Iterate until |Q| clears the escape radius.

    Returns (n, z, q) at the first escaping iterate, or None when the orbit
    is certified bounded (never left the absorbing radius within max_iters).
    Raises SlowEscape for orbits that left the absorbing radius but did not
    reach the escape radius in time.
    """
    bound = fam.absorbing_radius(t)
    z, q = p.z, p.w
    left_bound = False
    for n in range(params.max_iters + 1):
        m = abs(q)
        if m > params.escape_radius:
            return n, z, q
        if m > bound:
            left_bound = True
        if n == params.max_iters:
            break
        q = _apply_fiber(fam, t, z, q)
        z = base_map(fam, z)
    if left_bound:
        raise SlowEscape(
            f"orbit left radius {bound:.3g} but not {params.escape_radius:.3g} "
            f"within {params.max_iters} iterations"
        )
    return None


def _tail_negligible(weight: float, sup: float, q_abs: float, guard: float, tol: float) -> bool:
    """True when all remaining telescoping factors are provably below tol."""
    if sup == 0.0 or q_abs > guard:
        return True
    return q_abs > 2.0 * sup and weight * (sup / (q_abs - sup)) < 0.5 * tol


def green(fam: SkewFamily, t: complex, p: TorusPoint, params: GreenParams | None = None) -> float:
    """Fiberwise escape rate G(z, w); zero on bounded orbits.

    Once the orbit passes the escape radius at step N, the exact identity
    d^{-N} log|Q_N| = log|w| + sum_{n<N} d^{-(n+1)} log|Q_{n+1}/Q_n^d|
    folds the consumed factors into a single term, and the remaining factors
    are summed until their rigorous bound drops below tol.
    """
    params = params or GreenParams()
    hit = _escape_orbit(fam, t, p, params)
    if hit is None:
        return 0.0
    n, z, q = hit
    d = fam.d
    weight = float(d) ** (-n)
    total = weight * math.log(abs(q))
    sup = fam.sup_coefficient_sum() * abs(t)
    guard = 10.0 ** (250.0 / d)
    while True:
        weight /= d
        if _tail_negligible(weight, sup, abs(q), guard, params.tol):
            return total
        total += weight * math.log(abs(1.0 + _coeff_sum_over_powers(fam, t, z, q)))
        q = _apply_fiber(fam, t, z, q)
        z = base_map(fam, z)


def _coord_and_log_derivative(
    fam: SkewFamily,
    t: complex,
    p: TorusPoint,
    params: GreenParams,
    want_derivative: bool = True,
):
    """Shared orbit pass computing phi and (optionally) phi'.

    Product factors are accumulated from the very first iterate; starting
    only after escape would leave an unresolvable d^N-th root of the escaped
    iterate.  The derivative is tracked through the logarithmic derivative
    U_n = Q_n'/Q_n, for which d^{-n} U_n converges to phi'/phi; tracking Q_n'
    itself overflows almost immediately.
    """
    hit = _escape_orbit(fam, t, p, params)
    if hit is None:
        raise NotInBasin(f"orbit of w={p.w} over z={p.z} stays bounded; escape rate is zero")
    n_escape = hit[0]

    d = fam.d
    z, q = p.z, p.w
    if q == 0:
        raise NotInBasin("w = 0 has no coordinate")
    log_phi = cmath.log(q)
    u = 1.0 / q
    sup = fam.sup_coefficient_sum() * abs(t)
    guard = 10.0 ** (250.0 / d)
    weight = 1.0
    n = 0
    while not (n >= n_escape and _tail_negligible(weight / d, sup, abs(q), guard, params.tol)):
        if q == 0:
            raise BranchAmbiguity("orbit passed through w = 0; product factor undefined")
        ratio = 1.0 + _coeff_sum_over_powers(fam, t, z, q)
        if ratio.real <= 0.0:
            raise BranchAmbiguity(
                f"factor {ratio:.6g} at step {n} is outside the principal branch domain"
            )
        weight /= d
        log_phi += weight * cmath.log(ratio)
        q_next = _apply_fiber(fam, t, z, q)
        if want_derivative:
            u = fiber_dw(fam, t, z, q) * u * (q / q_next)
        q = q_next
        z = base_map(fam, z)
        n += 1
    phi = cmath.exp(log_phi)
    return phi, (phi * weight * u if want_derivative else None)


def boettcher_coord(
    fam: SkewFamily, t: complex, p: TorusPoint, params: GreenParams | None = None
) -> complex:
    """Coordinate at infinity phi_z(w), tangent to the identity at infinity.

    Raises
    ------
    NotInBasin
        If the orbit never escapes (G = 0).
    BranchAmbiguity
        If a product factor leaves the right half plane, where the principal
        d-th root can disagree with the continuous branch.
    """
    phi, _ = _coord_and_log_derivative(
        fam, t, p, params or GreenParams(), want_derivative=False
    )
    return phi


def conjugacy_H(fam: SkewFamily, t: complex, z: complex, omega: complex) -> complex:
    """Fiber conjugacy H_{t,z}(omega): the unique w with phi_{t,z}(w) = omega.

    At t = 0 the coordinate is the identity and so is H.  The Newton seed is
    w = omega, valid because H is O(t)-close to the identity away from the
    unit circle.

    Raises
    ------
    NewtonDivergence
        After 50 Newton steps without meeting the residual target (omega too
        close to the unit circle for the requested t).
    """
    if abs(omega) <= 1.0:
        raise ValueError("conjugacy is only inverted outside the closed unit disc")
    params = GreenParams()
    w = omega
    target = 1e-11 * max(1.0, abs(omega))
    for _ in range(_NEWTON_CAP):
        try:
            phi, dphi = _coord_and_log_derivative(fam, t, TorusPoint(z, w), params)
        except (NotInBasin, BranchAmbiguity, SlowEscape) as exc:
            raise NewtonDivergence(f"iterate left the basin: {exc}") from exc
        residual = phi - omega
        if abs(residual) <= target:
            return w
        if dphi == 0:
            raise NewtonDivergence("vanishing coordinate derivative")
        w = w - residual / dphi
        if abs(w) <= 1.0:
            raise NewtonDivergence("Newton iterate fell inside the unit disc")
    raise NewtonDivergence(f"no convergence after {_NEWTON_CAP} steps at z={z}, omega={omega}")
