"""Infinitesimal deformation of the conjugacy and its statistics.

The first-order motion of the basin conjugacy is the vertical field

    v(z, w) = -(w/d) * sum_{k=1}^{d} sum_{n>=0} c_k(z^{d^n}) d^{-n} w^{-k d^n},

whose w-derivative has the grouped form

    dv/dw  = (1/d) * sum_{k,n} c_k(z^{d^n}) (k - d^{-n}) w^{-k d^n}.

The potential derivative at t = 0 is the real trace of the coboundary
g - g o F_0 with g = Re(dv/dw); an equivalent direct formula (continuous up
to the unit circle, where dv/dw itself diverges) is used for sampling:

    dot_phi0 = -Re[(1/d) sum_{k<d} (d-k) c_k(z) w^{-k} + (d-1) v(z,w)/w].

Two independent estimators of the same second-order quantity live here: the
asymptotic boundary energy of dv/dw (exact circle integrals via Parseval,
Monte Carlo in z, extrapolation in the radius), and the asymptotic variance
of dot_phi0 under the torus measure (Birkhoff sums, extrapolation in the
orbit length).  Everything requires a matching base degree d' = d: the
deformation series lives over the base z -> z^d.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._chunks import run_blocks
from .errors import OnCircle
from .family import SkewFamily, collision_cross_term

_TWO_PI = 2.0 * math.pi


def _require_matching_base(fam: SkewFamily, what: str):
    if fam.d_prime != fam.d:
        raise ValueError(f"{what} requires base degree d' equal to fiber degree d")


@dataclass(frozen=True)
class SeriesTruncation:
    """Number of retained n-levels in the deformation series."""

    N: int = 60

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("need at least one series level")

    def tail_bound(self, fam: SkewFamily) -> float:
        """Bound for the omitted tail of v on |w| >= 1, per unit |w|."""
        d = fam.d
        return (fam.sup_coefficient_sum() / d) * d ** (-self.N) / (1.0 - 1.0 / d)


# ---------------------------------------------------------------------------
# Series evaluation (array-native; scalar operations wrap the array kernels)
# ---------------------------------------------------------------------------

def _v_array(fam: SkewFamily, z, w, n_levels: int):
    """v(z, w) for arrays with |w| >= 1; plain truncation at n_levels."""
    d = fam.d
    zn = np.asarray(z, dtype=complex)
    u = 1.0 / np.asarray(w, dtype=complex)  # u = w^{-d^n}, starting at n = 0
    acc = np.zeros_like(zn)
    scale = 1.0
    for n in range(n_levels):
        level = np.zeros_like(zn)
        for c in reversed(fam.coeffs):
            level = (level + (0.0 if c.is_zero else c(zn))) * u
        acc = acc + scale * level
        scale /= d
        if scale < 1e-18:
            break
        u = u**d
        zn = zn**d
    return -(np.asarray(w, dtype=complex) / d) * acc


def _dw_v_array(fam: SkewFamily, z, w, n_levels: int):
    """dv/dw for arrays with |w| > 1 (diverges on the circle)."""
    d = fam.d
    zn = np.asarray(z, dtype=complex)
    u = 1.0 / np.asarray(w, dtype=complex)
    acc = np.zeros_like(zn)
    dinv = 1.0
    for n in range(n_levels):
        plain = np.zeros_like(zn)
        weighted = np.zeros_like(zn)
        for k in range(d, 0, -1):
            c = fam.coeffs[k - 1]
            ck = 0.0 if c.is_zero else c(zn)
            plain = (plain + ck) * u
            weighted = (weighted + k * ck) * u
        acc = acc + weighted - dinv * plain
        dinv /= d
        u = u**d
        zn = zn**d
    return acc / d


def _levels_for_modulus(fam: SkewFamily, w_abs_min: float, cap: int) -> int:
    """Levels needed so the omitted dv/dw tail is below ~1e-16 relative."""
    log_w = math.log(w_abs_min)
    need = math.log(46.0 / log_w) / math.log(fam.d)
    return max(4, min(cap, int(math.ceil(need)) + 1))


def v_series(
    fam: SkewFamily, z: complex, w: complex, trunc: SeriesTruncation | None = None
) -> complex:
    """Deformation field v at a single point with |w| >= 1.

    The truncation error is bounded by trunc.tail_bound(fam) * |w|.
    """
    _require_matching_base(fam, "the deformation series")
    trunc = trunc or SeriesTruncation()
    if abs(w) < 1.0 - 1e-12:
        raise ValueError("the series only converges on |w| >= 1")
    return complex(_v_array(fam, np.asarray([z]), np.asarray([w]), trunc.N)[0])


def dw_v_series(
    fam: SkewFamily, z: complex, w: complex, trunc: SeriesTruncation | None = None
) -> complex:
    """w-derivative of the deformation field, strictly outside the circle.

    The n-cutoff is chosen from |w| so the omitted tail is below 1e-14
    relative (capped at trunc.N levels).

    Raises
    ------
    OnCircle
        If |w| <= 1 + 1e-6, where no useful truncation exists.
    """
    _require_matching_base(fam, "the deformation series")
    trunc = trunc or SeriesTruncation()
    if abs(w) <= 1.0 + 1e-6:
        raise OnCircle(f"|w| = {abs(w):.8f} is too close to the unit circle")
    levels = _levels_for_modulus(fam, abs(w), trunc.N)
    return complex(_dw_v_array(fam, np.asarray([z]), np.asarray([w]), levels)[0])


def _dot_phi0_array(fam: SkewFamily, z, w, n_levels: int):
    """Potential derivative at t=0 on |w| >= 1 (real-valued array)."""
    d = fam.d
    zz = np.asarray(z, dtype=complex)
    ww = np.asarray(w, dtype=complex)
    inv = 1.0 / ww
    head = np.zeros_like(zz)
    for k in range(d - 1, 0, -1):
        c = fam.coeffs[k - 1]
        head = (head + (0.0 if c.is_zero else (d - k) * c(zz))) * inv
    v = _v_array(fam, zz, ww, n_levels)
    return -np.real(head / d + (d - 1) * v * inv)


def dot_phi0(fam: SkewFamily, z: complex, w: complex) -> float:
    """First parameter derivative of the geometric potential, at t = 0.

    Continuous up to the unit circle (unlike dv/dw), which is where the
    variance sampling happens.
    """
    _require_matching_base(fam, "the potential derivative")
    if abs(w) < 1.0 - 1e-12:
        raise ValueError("defined on |w| >= 1 only")
    return float(_dot_phi0_array(fam, np.asarray([z]), np.asarray([w]), SeriesTruncation().N)[0])


def coboundary_residual(fam: SkewFamily, z: complex, w: complex) -> float:
    """|dot_phi0 - (g - g o F_0)| with g = Re(dv/dw); zero in exact arithmetic.

    Both evaluations of g happen off the circle, hence the |w| > 1.05 guard.
    """
    _require_matching_base(fam, "the coboundary check")
    if abs(w) <= 1.05:
        raise ValueError("need |w| > 1.05 so both sides stay off the circle")
    g_here = dw_v_series(fam, z, w).real
    g_image = dw_v_series(fam, z**fam.d, w**fam.d).real
    return abs(dot_phi0(fam, z, w) - (g_here - g_image))


# ---------------------------------------------------------------------------
# Asymptotic boundary energy of dv/dw
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnergyEstimate:
    """Extrapolated boundary energy with its z-sampling standard error.

    levels holds one (m, r_m, E(r_m), N(r_m)) record per radius, where
    r_m = 1 + 2^-m and N(r_m) is the retained series depth.
    """

    I_est: float
    stderr: float
    levels: tuple[tuple[int, float, float, int], ...]


@dataclass(frozen=True)
class VarianceEstimate:
    """Extrapolated asymptotic variance from torus Birkhoff sums."""

    var_est: float
    stderr: float
    n: int
    samples: int


def _amplitude_table(fam: SkewFamily, z: np.ndarray, depth: int):
    """Squared grouped Fourier amplitudes of dv/dw at each retained exponent.

    Exponents k*d^n collide exactly for (k=d, n) and (k=1, n+1); the grouped
    amplitude at d^n (n >= 1) mixes c_d and c_1, which is where the collision
    cross term enters the energy.  Returns a list of (exponent, |A|^2 array).
    """
    d = fam.d
    zpow = [z]
    for _ in range(depth + 1):
        zpow.append(zpow[-1] ** d)
    entries = []
    c1 = fam.coeffs[0]
    cd = fam.coeffs[d - 1]
    for n in range(1, depth + 1):
        amp = np.zeros_like(z)
        if not cd.is_zero:
            amp = amp + (d - float(d) ** (-(n - 1))) * cd(zpow[n - 1])
        if not c1.is_zero:
            amp = amp + (1.0 - float(d) ** (-n)) * c1(zpow[n])
        if not (cd.is_zero and c1.is_zero):
            entries.append((float(d) ** n, np.abs(amp / d) ** 2))
    for k in range(2, d):
        c = fam.coeffs[k - 1]
        if c.is_zero:
            continue
        for n in range(0, depth + 1):
            amp = (k - float(d) ** (-n)) * c(zpow[n]) / d
            entries.append((float(k) * float(d) ** n, np.abs(amp) ** 2))
    return entries


def _depth_for_radius(d: int, m: int) -> int:
    """Series depth past which r^{-2 k d^n} < 1e-16 at r = 1 + 2^-m."""
    log_r = math.log1p(2.0 ** (-m))
    return int(math.ceil(math.log(18.5 / log_r) / math.log(d))) + 1


def energy_quadrature(
    fam: SkewFamily,
    m_range=range(4, 21),
    z_samples: int = 2000,
    seed: int | None = None,
    threads: int = 1,
) -> EnergyEstimate:
    """Asymptotic energy of dv/dw by exact circle integrals and extrapolation.

    For each radius r_m = 1 + 2^-m the circle integral of |dv/dw|^2 is the
    Parseval sum of the grouped amplitudes (exact for the truncated series);
    the z-average is Monte Carlo over uniform unit-circle samples.  The limit
    is the intercept of a least-squares fit E(r_m)/|log(r_m - 1)| = I + C/m,
    and the standard error comes from the spread of per-sample intercepts.
    """
    _require_matching_base(fam, "the boundary energy")
    ms = sorted(int(m) for m in m_range)
    if len(ms) < 2:
        raise ValueError("need at least two radius levels to extrapolate")
    if ms[0] < 4 or ms[-1] > 40:
        raise ValueError("radius levels must lie within [4, 40]")
    if z_samples < 100:
        raise ValueError("need at least 100 base-circle samples")
    if seed is None:
        raise ValueError("a seed is required; estimates must be reproducible")

    rng = np.random.Generator(np.random.Philox(seed))
    z = np.exp(1j * _TWO_PI * rng.random(z_samples))

    depth_max = _depth_for_radius(fam.d, ms[-1])
    entries = _amplitude_table(fam, z, depth_max)

    # Intercept of y_m = I + C/m as a fixed linear functional of the y_m.
    design = np.stack([np.ones(len(ms)), 1.0 / np.asarray(ms, dtype=float)], axis=1)
    pinv = np.linalg.pinv(design)
    weights = pinv[0]

    per_sample = np.zeros(z_samples)
    level_records = []
    for j, m in enumerate(ms):
        r = 1.0 + 2.0 ** (-m)
        log_r = math.log(r)
        e_of_z = np.zeros(z_samples)
        for exponent, amp2 in entries:
            damping = math.exp(-2.0 * exponent * log_r)
            if damping < 1e-18:
                continue
            e_of_z += amp2 * damping
        y = e_of_z / (m * math.log(2.0))
        per_sample += weights[j] * y
        level_records.append((m, r, float(np.mean(e_of_z)), _depth_for_radius(fam.d, m)))

    i_est = float(np.mean(per_sample))
    spread = float(np.std(per_sample, ddof=1)) if z_samples > 1 else 0.0
    return EnergyEstimate(
        I_est=i_est,
        stderr=spread / math.sqrt(z_samples),
        levels=tuple(level_records),
    )


def energy_closed_form(fam: SkewFamily, include_cross_term: bool = False) -> float:
    """Exact energy S/(d^2 log d), optionally with the collision cross term.

    The distinct-exponent argument behind the plain closed form silently
    drops the (k=d, n) vs (k=1, n+1) exponent collision; when both c_1 and
    c_d are nonzero the cross term survives the circle integral.  Both
    variants are exposed so quadrature can adjudicate.
    """
    _require_matching_base(fam, "the boundary energy")
    d = fam.d
    s_value = sum(k * k * fam.coeffs[k - 1].mean_square_on_circle() for k in range(1, d + 1))
    if include_cross_term:
        s_value += collision_cross_term(fam)
    return float(s_value) / (d * d * math.log(d))


# ---------------------------------------------------------------------------
# Asymptotic variance of dot_phi0 on the torus
# ---------------------------------------------------------------------------

def variance_mc(
    fam: SkewFamily,
    n: int = 40,
    samples: int = 100_000,
    seed: int | None = None,
    threads: int = 1,
) -> VarianceEstimate:
    """Monte Carlo asymptotic variance of dot_phi0 under Leb x Leb.

    Birkhoff sums are accumulated along exact torus orbits of the reference
    map; the 1/n correction is removed by the two-point extrapolation
    (S_n^2 - S_h^2)/(n - h) with h = n//2, evaluated per sample so the
    standard error accounts for the correlation between the two lengths.
    The estimate is clamped at zero (the limit is a variance).
    """
    _require_matching_base(fam, "the torus variance")
    if n < 10:
        raise ValueError("need a Birkhoff length of at least 10")
    if samples < 10_000:
        raise ValueError("need at least 1e4 samples")
    if seed is None:
        raise ValueError("a seed is required; estimates must be reproducible")
    half = n // 2
    levels = SeriesTruncation().N
    d = fam.d

    rng = np.random.Generator(np.random.Philox(seed))
    angles = rng.random((2, samples))

    def block_stats(a: int, b: int):
        z = np.exp(1j * _TWO_PI * angles[0, a:b])
        w = np.exp(1j * _TWO_PI * angles[1, a:b])
        s = np.zeros(b - a)
        s_half = None
        for j in range(n):
            s += _dot_phi0_array(fam, z, w, levels)
            if j + 1 == half:
                s_half = s.copy()
            z = z**d
            z /= np.abs(z)
            w = w**d
            w /= np.abs(w)
        u = (s * s - s_half * s_half) / (n - half)
        return float(np.sum(u)), float(np.sum(u * u))

    parts = run_blocks(samples, block_stats, threads=threads)
    total = math.fsum(p[0] for p in parts)
    total_sq = math.fsum(p[1] for p in parts)
    mean = total / samples
    var_of_u = max(0.0, total_sq / samples - mean * mean)
    stderr = math.sqrt(var_of_u / samples)
    return VarianceEstimate(
        var_est=max(0.0, mean), stderr=stderr, n=n, samples=samples
    )
