"""Periodic points on the Julia set and preimage fans.

At t = 0 the period-n points on the torus are the explicit lattice
{z^{d'^n - 1} = 1} x {w^{d^n - 1} = 1}.  For t != 0 they are tracked by a
Newton homotopy in t on the fiber return equation Q^{(n)}_{z,t}(w) = w with
the base coordinate frozen (the base map never depends on t).  A repelling
multiplier certifies that each tracked point stayed on the continued Julia
set rather than falling onto an attracting cycle.

The fiber composition Q^{(n)} is always evaluated by running the orbit;
expanding the degree-d^n polynomial would explode immediately.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from ._chunks import run_blocks
from .errors import BudgetExceeded, NonHyperbolicContinuation, RootFindingFailure
from .family import SkewFamily, TorusPoint, eval_map

_TWO_PI = 2.0 * math.pi
_MIN_MULTIPLIER = 1.01
_MAX_HALVINGS = 3


@dataclass(frozen=True)
class ContinuationConfig:
    """Homotopy step policy.  steps=None means max(5, ceil(|t|/0.01))."""

    steps: int | None = None
    newton_tol: float = 1e-12
    max_newton: int = 30

    def __post_init__(self):
        if self.steps is not None and self.steps < 1:
            raise ValueError("need at least one continuation step")

    def resolved_steps(self, t: complex) -> int:
        if self.steps is not None:
            return self.steps
        return max(5, int(math.ceil(abs(t) / 0.01)))


@dataclass(frozen=True)
class PeriodicOrbitPoint:
    """A point of Fix(F_t^n) near the torus."""

    n: int
    base_index: int
    z: complex
    w: complex
    continued_to_t: complex = 0j
    converged: bool = True


def lattice_size(fam: SkewFamily, n: int) -> int:
    return (fam.d_prime**n - 1) * (fam.d**n - 1)


def _check_budget(fam: SkewFamily, n: int, budget: int):
    size = lattice_size(fam, n)
    if size > budget:
        raise BudgetExceeded(
            f"period-{n} lattice has {size} points, over the budget of {budget}"
        )
    return size


def lattice_arrays(fam: SkewFamily, n: int, budget: int = 1 << 25):
    """Flat (z, w) arrays of the full t=0 lattice, base-major order."""
    _check_budget(fam, n, budget)
    mb = fam.d_prime**n - 1
    mf = fam.d**n - 1
    zs = np.exp(1j * _TWO_PI * np.arange(mb) / mb)
    ws = np.exp(1j * _TWO_PI * np.arange(mf) / mf)
    return np.repeat(zs, mf), np.tile(ws, mb)


def enumerate_t0(fam: SkewFamily, n: int, budget: int = 1 << 25) -> list[PeriodicOrbitPoint]:
    """All (d'^n - 1)(d^n - 1) torus periodic points of the reference map."""
    z, w = lattice_arrays(fam, n, budget)
    mf = fam.d**n - 1
    return [
        PeriodicOrbitPoint(n=n, base_index=i // mf, z=complex(z[i]), w=complex(w[i]))
        for i in range(z.size)
    ]


# ---------------------------------------------------------------------------
# Vectorized fiber-return Newton and the t-homotopy
# ---------------------------------------------------------------------------

def _base_ladder(fam: SkewFamily, z: np.ndarray, n: int) -> list[np.ndarray]:
    """Base orbit z, z^{d'}, ..., z^{d'^{n-1}}, renormalized to the circle."""
    ladder = [z]
    for _ in range(n - 1):
        nxt = ladder[-1] ** fam.d_prime
        ladder.append(nxt / np.abs(nxt))
    return ladder


def _coeff_ladder(fam: SkewFamily, ladder: list[np.ndarray]):
    """c_k evaluated along the base ladder; None marks a zero polynomial."""
    return [
        [None if c.is_zero else c(zj) for c in fam.coeffs] for zj in ladder
    ]


def _return_map(fam, t, coeff_ladder, w, with_dt=False):
    """Q^{(n)}(w), its w-derivative and optionally its t-derivative."""
    d = fam.d
    q = w
    dqw = np.ones_like(w)
    dqt = np.zeros_like(w) if with_dt else None
    for row in coeff_ladder:
        acc_w = np.full_like(w, float(d))
        for k in range(1, d):
            ck = row[k - 1]
            acc_w = acc_w * q + (0j if ck is None else t * (d - k) * ck)
        if with_dt:
            acc_t = np.zeros_like(w)
            for k in range(1, d + 1):
                ck = row[k - 1]
                acc_t = acc_t * q + (0j if ck is None else ck)
            dqt = acc_w * dqt + acc_t
        dqw = acc_w * dqw
        acc = np.ones_like(w)
        for k in range(1, d + 1):
            ck = row[k - 1]
            acc = acc * q + (0j if ck is None else t * ck)
        q = acc
    return q, dqw, dqt


def _newton_return(fam, t, coeff_ladder, w, tol, max_newton):
    """Newton on Q^{(n)}(w) = w for the whole block.

    Returns (w, dqw, ok_mask) with dqw evaluated at the returned points.
    """
    w = w.copy()
    for _ in range(max_newton):
        q, dqw, _ = _return_map(fam, t, coeff_ladder, w)
        g = q - w
        ok = np.abs(g) < tol
        if ok.all():
            return w, dqw, ok
        denom = dqw - 1.0
        bad = denom == 0
        if bad.any():
            denom = np.where(bad, 1.0, denom)
        step = np.where(ok | bad, 0.0, g / denom)
        w = w - step
    q, dqw, _ = _return_map(fam, t, coeff_ladder, w)
    ok = (np.abs(q - w) < tol) & np.isfinite(w)
    return w, dqw, ok


def _advance_segment(fam, coeff_ladder, w, t_from, t_to, cfg, spacing, depth=0):
    """One predictor-corrector homotopy segment, bisected on failure.

    The Euler predictor w + dt * (-dQ/dt)/(dQ/dw - 1) seeds Newton within
    O(dt^2) of the tracked root; without it the seed error is O(dt), which
    exceeds the root spacing 2*pi/(d^n - 1) already at moderate n and makes
    Newton hop onto a neighboring or attracting root.  A displacement cap
    and an intermediate repelling check turn any such hop into a bisection.
    """
    dt = t_to - t_from
    _, dqw, dqt = _return_map(fam, t_from, coeff_ladder, w, with_dt=True)
    velocity = -dqt / (dqw - 1.0)
    predicted = w + dt * velocity
    w_next, dqw_next, ok = _newton_return(
        fam, t_to, coeff_ladder, predicted, cfg.newton_tol, cfg.max_newton
    )
    move_cap = np.minimum(
        0.25 * abs(dt) * (np.abs(velocity) + 1.0) + 1e-12, 0.35 * spacing
    )
    ok &= np.abs(w_next - predicted) <= move_cap
    ok &= np.abs(dqw_next) > 1.005
    if ok.all():
        return w_next
    if depth >= _MAX_HALVINGS:
        raise NonHyperbolicContinuation(
            f"{int((~ok).sum())} points failed tracking on [{t_from}, {t_to}] "
            f"after {_MAX_HALVINGS} halvings"
        )
    mid = 0.5 * (t_from + t_to)
    w_mid = _advance_segment(fam, coeff_ladder, w, t_from, mid, cfg, spacing, depth + 1)
    return _advance_segment(fam, coeff_ladder, w_mid, mid, t_to, cfg, spacing, depth + 1)


def continue_lattice(
    fam: SkewFamily,
    n: int,
    t_target: complex,
    cfg: ContinuationConfig | None = None,
    budget: int = 1 << 25,
    threads: int = 1,
):
    """Continue the whole t=0 lattice to t_target.

    Returns (z, w, multiplier) arrays in lattice order.  The multiplier is
    |dQ^{(n)}/dw| at the continued point; every point must be repelling
    (> 1.01) or NonHyperbolicContinuation is raised.
    """
    cfg = cfg or ContinuationConfig()
    z0, w0 = lattice_arrays(fam, n, budget)
    steps = cfg.resolved_steps(t_target)
    spacing = _TWO_PI / (fam.d**n - 1)

    def work(a: int, b: int):
        z = z0[a:b]
        w = w0[a:b].copy()
        ladder = _coeff_ladder(fam, _base_ladder(fam, z, n))
        if t_target != 0:
            for s in range(1, steps + 1):
                t_prev = t_target * ((s - 1) / steps)
                t_cur = t_target * (s / steps)
                w = _advance_segment(fam, ladder, w, t_prev, t_cur, cfg, spacing)
        _, dq, _ = _return_map(fam, t_target, ladder, w)
        return w, np.abs(dq)

    parts = run_blocks(z0.size, work, threads=threads)
    w = np.concatenate([p[0] for p in parts])
    mult = np.concatenate([p[1] for p in parts])
    if np.any(mult < _MIN_MULTIPLIER):
        worst = float(mult.min())
        raise NonHyperbolicContinuation(
            f"continued point with multiplier {worst:.6f} <= {_MIN_MULTIPLIER} "
            f"at t={t_target} (parameter outside the safe regime)"
        )
    return z0, w, mult


def continue_in_t(
    fam: SkewFamily,
    point: PeriodicOrbitPoint,
    t_target: complex,
    cfg: ContinuationConfig | None = None,
) -> PeriodicOrbitPoint:
    """Track a single periodic point from its current parameter to t_target."""
    cfg = cfg or ContinuationConfig()
    if not point.converged:
        raise ValueError("cannot continue an unconverged point")
    n = point.n
    z = np.asarray([point.z])
    w = np.asarray([point.w], dtype=complex)
    ladder = _coeff_ladder(fam, _base_ladder(fam, z, n))
    spacing = _TWO_PI / (fam.d**n - 1)
    t0 = point.continued_to_t
    if t_target != t0:
        steps = cfg.resolved_steps(t_target - t0)
        for s in range(1, steps + 1):
            t_prev = t0 + (t_target - t0) * ((s - 1) / steps)
            t_cur = t0 + (t_target - t0) * (s / steps)
            w = _advance_segment(fam, ladder, w, t_prev, t_cur, cfg, spacing)
    _, dq, _ = _return_map(fam, t_target, ladder, w)
    mult = float(np.abs(dq[0]))
    if mult < _MIN_MULTIPLIER:
        raise NonHyperbolicContinuation(
            f"multiplier {mult:.6f} <= {_MIN_MULTIPLIER} at t={t_target}"
        )
    return PeriodicOrbitPoint(
        n=n,
        base_index=point.base_index,
        z=point.z,
        w=complex(w[0]),
        continued_to_t=complex(t_target),
        converged=True,
    )


# ---------------------------------------------------------------------------
# Simultaneous polynomial root finding (Aberth-Ehrlich) and preimage fans
# ---------------------------------------------------------------------------

def poly_roots(coeffs) -> list[complex]:
    """All roots of a polynomial given by descending-power coefficients.

    Aberth-Ehrlich simultaneous iteration; multiplicities come back as
    repeated roots.  Degree is capped at 64.

    Raises
    ------
    RootFindingFailure
        If the iteration stalls before meeting the residual target.
    """
    c = np.asarray(list(coeffs), dtype=complex)
    if c.size == 0 or c[0] == 0:
        raise ValueError("leading coefficient must be nonzero")
    degree = c.size - 1
    if degree > 64:
        raise ValueError("degree capped at 64")
    if degree == 0:
        return []
    roots = _aberth(c[None, :])[0]
    residual = _polyval_rows(c[None, :], roots[None, :])[0]
    if np.any(np.abs(residual) >= 1e-9 * (1.0 + float(np.max(np.abs(c))))):
        raise RootFindingFailure("root residual exceeds the contract tolerance")
    order = np.lexsort((np.abs(roots), np.round(np.mod(np.angle(roots), _TWO_PI), 12)))
    return [complex(r) for r in roots[order]]


def _polyval_rows(coeff_rows: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Row-wise Horner evaluation; coeff_rows (N, deg+1), w (N, m)."""
    p = np.zeros_like(w)
    for a in coeff_rows.T:
        p = p * w + a[:, None]
    return p


def _aberth(coeff_rows: np.ndarray, max_iter: int = 500) -> np.ndarray:
    """Batched Aberth-Ehrlich: coeff_rows is (N, deg+1), leading first."""
    rows = coeff_rows / coeff_rows[:, :1]
    deg = rows.shape[1] - 1

    # Cauchy bound, shrunk, with an angular offset to break symmetry stalls.
    radius = 1.0 + np.max(np.abs(rows[:, 1:]), axis=1)
    angles = _TWO_PI * (np.arange(deg) + 0.37) / deg
    w = 0.65 * radius[:, None] * np.exp(1j * (angles[None, :] + 0.21))

    target = 1e-12 * (1.0 + np.max(np.abs(rows), axis=1))[:, None]
    for _ in range(max_iter):
        p = np.zeros_like(w)
        dp = np.zeros_like(w)
        for a in rows.T:
            dp = dp * w + p
            p = p * w + a[:, None]
        if np.all(np.abs(p) < target):
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(dp == 0, 0.25 + 0j, p / np.where(dp == 0, 1, dp))
            diff = w[:, :, None] - w[:, None, :]
            inv = np.where(diff == 0, 0, 1.0 / np.where(diff == 0, 1, diff))
            s = inv.sum(axis=2)
            denom = 1.0 - ratio * s
            step = np.where(np.abs(denom) < 1e-30, ratio, ratio / np.where(denom == 0, 1, denom))
        mask = np.abs(p) >= target
        w = w - np.where(mask, step, 0.0)
    else:
        raise RootFindingFailure("Aberth iteration stalled on an ill-conditioned cluster")
    return w


def _quadratic_roots(b: np.ndarray, c: np.ndarray):
    """Roots of w^2 + b w + c = 0, numerically stable pairing."""
    disc = np.sqrt(b * b - 4.0 * c)
    # Choose the sign that avoids cancellation in -b -/+ disc.
    flip = (np.real(np.conj(b) * disc) > 0) * (-2.0) + 1.0
    disc = disc * flip
    r1 = 0.5 * (-b + disc)
    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = np.where(r1 == 0, 0.5 * (-b - disc), c / np.where(r1 == 0, 1, r1))
    return r1, r2


def fiber_preimage_batch(fam: SkewFamily, t: complex, z: np.ndarray, w: np.ndarray):
    """All d fiber preimages per node: roots of q_t(z, .) = w, shape (N, d)."""
    d = fam.d
    cs = [(0j if c.is_zero else t * c(z)) for c in fam.coeffs]
    if d == 2:
        b = cs[0] if isinstance(cs[0], np.ndarray) else np.full_like(w, cs[0])
        r1, r2 = _quadratic_roots(b, cs[1] - w)
        return np.stack([r1, r2], axis=1)
    rows = np.empty((w.size, d + 1), dtype=complex)
    rows[:, 0] = 1.0
    for k in range(1, d + 1):
        rows[:, k] = cs[k - 1]
    rows[:, d] -= w
    return _aberth(rows)


def preimages(fam: SkewFamily, t: complex, p: TorusPoint) -> list[TorusPoint]:
    """The d' * d preimages of p under F_t, base-root-major, residual < 1e-9."""
    dp = fam.d_prime
    base_roots = np.exp((np.log(p.z) + 1j * _TWO_PI * np.arange(dp)) / dp)
    base_roots /= np.abs(base_roots)
    fibers = fiber_preimage_batch(
        fam, t, base_roots, np.full(dp, p.w, dtype=complex)
    )
    out = []
    for i in range(dp):
        order = np.lexsort(
            (np.abs(fibers[i]), np.round(np.mod(np.angle(fibers[i]), _TWO_PI), 12))
        )
        for j in order:
            cand = TorusPoint(complex(base_roots[i]), complex(fibers[i][j]))
            image = eval_map(fam, t, cand)
            if abs(image.z - p.z) > 1e-9 or abs(image.w - p.w) > 1e-9:
                raise RootFindingFailure(
                    f"preimage residual {abs(image.w - p.w):.3e} exceeds 1e-9"
                )
            out.append(cand)
    return out
