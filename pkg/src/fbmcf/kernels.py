"""Backward Gaussian kernels, mass cutoffs, and their reflected variants.

The mass cutoff at radius ``kappa`` is

    phi(x, t) = (1 - kappa^(-1/2) tau^(-3/4) (|x|^2 - alpha tau))_+^4,   tau = -t,

a parabolically scale-invariant bump whose support shrinks like tau^(3/8).
Its reflected companion ``phi~(x, t) = phi(x~, t)`` uses the barrier mirror
map; the pair enters the reflected, truncated heat kernel

    f = rho phi + rho~ phi~

used by the density module.  This module also provides a finite-difference
heat-operator sampler for the subsolution inequalities the cutoffs satisfy,
and a runtime calibration of the cutoff constant ``alpha``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .barrier import Barrier, measured_c1
from .errors import (CalibrationFailure, KappaTooLarge, NonNegativeTime)

ALPHA_GRID_MAX = 2.0 ** 10


def beta0_squared(alpha):
    """Support-time constant: tau <= beta0^2 kappa^2 keeps spt phi in B_{kappa/20}."""
    return ((1.0 + alpha) * 20.0 ** 2) ** (-4.0 / 3.0)


@dataclass(frozen=True)
class KernelParams:
    """Cutoff and monotonicity parameters (flow dimension n, cutoff radius kappa).

    ``beta0_sq`` and the default monotonicity horizon ``tau0`` are derived
    from ``alpha``; ``tau0`` may be shrunk but never exceeds beta0^2 kappa^2.
    """

    n: int = 1
    kappa: float = 1.0
    alpha: float = 8.0
    tau0: float = field(default=None)  # type: ignore[assignment]
    c1: float = 2.0

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.alpha < 0.5:
            raise ValueError("alpha must be at least 1/2")
        if self.tau0 is None:
            object.__setattr__(self, "tau0", self.beta0_sq * self.kappa ** 2)
        if self.tau0 > self.beta0_sq * self.kappa ** 2 * (1 + 1e-12):
            raise ValueError("tau0 must satisfy tau0 <= beta0^2 kappa^2")

    @property
    def beta0_sq(self):
        return beta0_squared(self.alpha)

    @classmethod
    def for_barrier(cls, S: Barrier, kappa=None, alpha=8.0, n=1, c1=None):
        """Construct parameters validated against the barrier's admissible bound."""
        c1 = measured_c1(S) if c1 is None else c1
        r_s = S.global_reflection_scale()
        bound = r_s / c1
        if kappa is None:
            kappa = bound
        if kappa > bound * (1 + 1e-12):
            raise KappaTooLarge(
                f"kappa={kappa:.6g} exceeds the admissible bound r_S/c1="
                f"{bound:.6g} required for the monotone Gaussian quantity")
        return cls(n=n, kappa=float(kappa), alpha=float(alpha), c1=float(c1))


def _tau(t):
    t = np.asarray(t, dtype=float)
    tau = -t
    if np.any(tau <= 0):
        raise NonNegativeTime("backward kernels need t < 0")
    return tau


def heat_kernel(x, t, n=1):
    """Backward Gaussian rho(x, t) = (4 pi tau)^(-n/2) exp(-|x|^2 / 4 tau)."""
    tau = _tau(t)
    x = np.asarray(x, dtype=float)
    sq = np.sum(np.atleast_2d(x) ** 2, axis=-1)
    if x.ndim == 1:
        sq = sq[0]
    return (4.0 * np.pi * tau) ** (-n / 2.0) * np.exp(-sq / (4.0 * tau))


def cutoff_argument(x, t, params: KernelParams):
    """The scale-free argument s with phi = (1 - s)_+^4."""
    tau = _tau(t)
    x = np.asarray(x, dtype=float)
    sq = np.sum(np.atleast_2d(x) ** 2, axis=-1)
    if x.ndim == 1:
        sq = sq[0]
    k = params.kappa
    return k ** (-0.5) * tau ** (-0.75) * (sq - params.alpha * tau)


def cutoff(x, t, params: KernelParams):
    """Mass cutoff phi at radius kappa; C^3 across its support edge."""
    s = cutoff_argument(x, t, params)
    return np.clip(1.0 - s, 0.0, None) ** 4


def reflected_cutoff(S: Barrier, x, t, params: KernelParams):
    """phi~(x, t) = phi(x~, t); zero where x leaves the reflection tube.

    Outside the reach tube the reflected support cannot contain the mirror
    image for admissible (kappa, tau), so the zero extension is exact there.
    """
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    feet = np.atleast_2d(S.project(pts))
    d = np.linalg.norm(pts - feet, axis=-1)
    ok = d < S.reach * (1.0 - 1e-12)
    out = np.zeros(len(pts))
    if np.any(ok):
        mirror = 2.0 * feet[ok] - pts[ok]
        out[ok] = np.atleast_1d(cutoff(mirror, t, params))
    return out[0] if np.asarray(x).ndim == 1 else out


def reflected_truncated_kernel(S: Barrier, X0, x, t, params: KernelParams):
    """f(x, t) = phi rho (x - x0, t - t0) + phi rho (x~ - x0, t - t0).

    The mirror image is taken of x itself and then recentered at x0.
    """
    x0 = np.asarray(X0[:2], dtype=float)
    t0 = float(X0[2]) if len(X0) > 2 else 0.0
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    dt = np.asarray(t, dtype=float) - t0
    rel = pts - x0
    direct = cutoff(rel, dt, params) * heat_kernel(rel, dt, params.n)
    feet = np.atleast_2d(S.project(pts))
    d = np.linalg.norm(pts - feet, axis=-1)
    ok = d < S.reach * (1.0 - 1e-12)
    reflected = np.zeros(len(pts))
    if np.any(ok):
        mirror_rel = 2.0 * feet[ok] - pts[ok] - x0
        reflected[ok] = np.atleast_1d(
            cutoff(mirror_rel, dt, params) * heat_kernel(mirror_rel, dt, params.n))
    out = np.atleast_1d(direct) + reflected
    return out[0] if np.asarray(x).ndim == 1 else out


def heat_operator(fn, x, t, L, kappa=1.0):
    """(d_t - tr_L D^2) fn at (x, t) by Richardson-extrapolated central differences.

    ``L`` is a unit direction spanning the 1-plane.  The spatial step is tied
    to the cutoff radius (h = 1e-4 kappa) and halved once for extrapolation;
    the time step follows parabolic scaling, guarded so tau stays positive.
    """
    x = np.asarray(x, dtype=float)
    e = np.asarray(L, dtype=float)
    e = e / np.linalg.norm(e)
    tau = -np.asarray(t, dtype=float)
    h = 1e-4 * kappa

    def second(hh):
        return (fn(x + hh * e, t) - 2.0 * fn(x, t) + fn(x - hh * e, t)) / hh ** 2

    d2 = (4.0 * second(h / 2.0) - second(h)) / 3.0

    ht = np.minimum(1e-4 * tau, 0.25 * tau)

    def first(hh):
        return (fn(x, t + hh) - fn(x, t - hh)) / (2.0 * hh)

    d1 = (4.0 * first(ht / 2.0) - first(ht)) / 3.0
    return d1 - d2


# -- inequality sampling -------------------------------------------------------

@dataclass
class HeatOperatorSample:
    case: str
    x: np.ndarray
    tau: float
    value: float
    value_scaled: float


def sample_heat_operator_cases(S: Barrier, params: KernelParams, n_samples=10_000,
                               seed=0, seam_halfwidth=0.15):
    """Sampled subsolution inequality for phi and phi~ in the three admissible cases.

    Case A: the kernel center lies in the closed admissible side within
    kappa/10 of the barrier and x ranges over the admissible side.
    Case B: the center lies on the barrier and x is arbitrary in the tube.
    Case C: the center lies on a tangent line of the barrier at a point y,
    with |x - y| <= min(|y|/10, r_S/c1).

    Samples whose cutoff argument lands within ``seam_halfwidth`` of the C^3
    support seam s = 1 are redrawn: the finite-difference stencil cannot
    straddle the seam, and the operator vanishes identically beyond it.

    Returns a list of :class:`HeatOperatorSample` with both the raw operator
    value and the parabolically normalized value (raw * kappa^(1/2) tau^(3/4)).
    """
    rng = np.random.default_rng(seed)
    kappa = params.kappa
    tau_max = params.beta0_sq * kappa ** 2
    out = []
    boundary = S.boundary_samples(256)
    reach_ok = (lambda pts: np.atleast_1d(S.distance(pts)) < S.reach * 0.98) \
        if np.isfinite(S.reach) else (lambda pts: np.ones(len(np.atleast_2d(pts)), bool))

    for case in ("A", "B", "C"):
        collected = 0
        guard = 0
        while collected < n_samples and guard < 200:
            guard += 1
            m = min(4096, 2 * (n_samples - collected) + 256)
            tau = tau_max * 10.0 ** rng.uniform(-2.0, 0.0, m)
            anchors = boundary[rng.integers(len(boundary), size=m)]
            normals = np.atleast_2d(S.normal(anchors))

            if case in ("A", "B"):
                # x near the kernel center: parametrize by the cutoff argument
                s_arg = rng.uniform(-3.0, 1.0 - seam_halfwidth, m)
                radius_sq = params.alpha * tau + s_arg * kappa ** 0.5 * tau ** 0.75
                keep = radius_sq > 0
                tau, radius_sq = tau[keep], radius_sq[keep]
                anchors, normals = anchors[keep], normals[keep]
                m = len(tau)
                ang = rng.uniform(0.0, 2.0 * np.pi, m)
                probe = np.sqrt(radius_sq)[:, None] * np.stack(
                    [np.cos(ang), np.sin(ang)], axis=-1)
                if case == "A":
                    depth = rng.uniform(0.0, kappa / 10.0, m)
                    centers = anchors - depth[:, None] * normals
                else:
                    centers = anchors
                x_world = centers + probe
                ok = (np.atleast_1d(S.omega_signed(x_world)) >= 0) if case == "A" \
                    else np.ones(m, dtype=bool)
            else:
                # center on the tangent line at the anchor; x within |y|/10 of y
                tang = np.stack([-normals[:, 1], normals[:, 0]], axis=-1)
                slide = kappa * 10.0 ** rng.uniform(-1.5, -0.3, m) * np.where(
                    rng.uniform(size=m) < 0.5, -1.0, 1.0)
                centers = anchors + slide[:, None] * tang
                lim = np.minimum(np.abs(slide) / 10.0,
                                 S.global_reflection_scale() / params.c1)
                ang = rng.uniform(0.0, 2.0 * np.pi, m)
                rad = lim * np.sqrt(rng.uniform(0.0, 1.0, m))
                x_world = anchors + rad[:, None] * np.stack(
                    [np.cos(ang), np.sin(ang)], axis=-1)
                ok = np.ones(m, dtype=bool)

            ok &= reach_ok(x_world)
            # both cutoff arguments must avoid the C^3 support seam
            s_direct = cutoff_argument(x_world - centers, -tau, params)
            ok &= np.abs(np.atleast_1d(s_direct) - 1.0) > seam_halfwidth
            feet_w = np.atleast_2d(S.project(x_world))
            mirror_rel = 2.0 * feet_w - x_world - centers
            s_mirror = cutoff_argument(mirror_rel, -tau, params)
            ok &= np.abs(np.atleast_1d(s_mirror) - 1.0) > seam_halfwidth

            idx = np.nonzero(ok)[0][: n_samples - collected]
            if len(idx) == 0:
                continue
            dirs = _unit_dirs(rng, len(idx))
            for reflected in (False, True):
                vals = _heat_operator_batch(
                    S, centers[idx], x_world[idx], tau[idx], dirs, params,
                    reflected=reflected)
                scaled = vals * kappa ** 0.5 * tau[idx] ** 0.75
                for j, i in enumerate(idx):
                    out.append(HeatOperatorSample(
                        case=case, x=(x_world[i] - centers[i]), tau=float(tau[i]),
                        value=float(vals[j]), value_scaled=float(scaled[j])))
            collected += len(idx)
        if collected < n_samples:
            raise CalibrationFailure(f"could not draw enough case-{case} samples")
    return out


def _heat_operator_batch(S, centers, xs, taus, dirs, params, reflected):
    """Vectorized (d_t - tr_L D^2) of the (reflected) cutoff over sample batches."""
    kappa = params.kappa
    B = len(xs)
    h = 1e-4 * kappa
    ht = np.minimum(1e-4 * taus, 0.25 * taus)

    def evaluate(points, tau_pts):
        if reflected:
            feet = np.atleast_2d(S.project(points))
            points = 2.0 * feet - points
        rel = points - np.tile(centers, (points.shape[0] // B, 1))
        return cutoff(rel, -tau_pts, params)

    # spatial stencil: offsets 0, +-h, +-h/2 along dirs, all at time -tau
    offs = np.array([0.0, 1.0, -1.0, 0.5, -0.5])
    pts = (xs[None, :, :] + offs[:, None, None] * h * dirs[None, :, :]).reshape(-1, 2)
    tau_rep = np.tile(taus, len(offs))
    f = evaluate(pts, tau_rep).reshape(len(offs), B)
    sec_h = (f[1] - 2.0 * f[0] + f[2]) / h ** 2
    sec_h2 = (f[3] - 2.0 * f[0] + f[4]) / (h / 2.0) ** 2
    d2 = (4.0 * sec_h2 - sec_h) / 3.0

    # temporal stencil at x: tau -+ ht, tau -+ ht/2  (t = -tau)
    tgrid = np.concatenate([taus - ht, taus + ht, taus - ht / 2.0, taus + ht / 2.0])
    pts_t = np.tile(xs, (4, 1))
    g = evaluate(pts_t, tgrid).reshape(4, B)
    first_h = (g[0] - g[1]) / (2.0 * ht)
    first_h2 = (g[2] - g[3]) / ht
    d1 = (4.0 * first_h2 - first_h) / 3.0
    return d1 - d2


def support_probe(S: Barrier, params: KernelParams, n_probes=1000, seed=0):
    """Check the support claims: spt phi in B_{kappa/20} and, for centers within
    kappa/10 of the barrier, spt(phi + phi~) in B_{kappa/2}.

    Returns the worst margin (positive means all probes confirm the claims).
    """
    rng = np.random.default_rng(seed)
    kappa = params.kappa
    tau_max = params.beta0_sq * kappa ** 2
    worst = np.inf
    boundary = S.boundary_samples(128)
    for _ in range(n_probes):
        tau = tau_max * rng.uniform(0.05, 1.0)
        anchor = boundary[rng.integers(len(boundary))]
        n = S.normal(anchor)
        center = anchor - rng.uniform(0.0, kappa / 10.0) * n
        r = rng.uniform(0.0, kappa) * 1.2
        ang = rng.uniform(0.0, 2.0 * np.pi)
        x = center + r * np.array([np.cos(ang), np.sin(ang)])
        phi = float(cutoff(x - center, -tau, params))
        if phi > 0.0 and np.linalg.norm(x - center) > kappa / 20.0:
            worst = min(worst, kappa / 20.0 - np.linalg.norm(x - center))
        if S.distance(x) < S.reach * 0.98:
            tot = phi + float(cutoff(S.reflect_point(x) - center, -tau, params))
            if tot > 0.0 and np.linalg.norm(x - center) > kappa / 2.0:
                worst = min(worst, kappa / 2.0 - np.linalg.norm(x - center))
    return worst if np.isfinite(worst) else 1.0


def calibrate_alpha(draft: KernelParams, S: Barrier, sample_budget=2000, seed=0):
    """Smallest dyadic alpha >= 1/2 making the cutoff subsolution inequality hold.

    The check evaluates the sufficient bracket from the subsolution estimate,

        -3 q^2 / (4 tau) - alpha/4 + 2 n + c_meas * |q| / r_S  <=  0,

    over seeded admissible samples (q the kernel-frame position of x or its
    mirror), with the curvature constant c_meas measured from the barrier's
    mirror Hessian.  Flat barriers have c_meas = 0, so the smallest passing
    value is the dyadic ceiling of 8 n.
    """
    rng = np.random.default_rng(seed)
    n = draft.n
    kappa = draft.kappa
    r_s = S.global_reflection_scale()
    c_meas = _measured_curvature_constant(S, kappa, rng) if not S.is_flat() else 0.0

    alpha = 0.5
    while alpha <= ALPHA_GRID_MAX:
        params = KernelParams(n=n, kappa=kappa, alpha=alpha, c1=draft.c1)
        tau_max = params.beta0_sq * kappa ** 2
        tau = tau_max * 10.0 ** rng.uniform(-2, 0, sample_budget)
        q = np.sqrt(tau)[:, None] * rng.uniform(0.0, 6.0, (sample_budget, 1)) \
            * _unit_dirs(rng, sample_budget)
        qq = np.linalg.norm(q, axis=-1)
        bracket = (-3.0 * qq ** 2 / (4.0 * tau) - alpha / 4.0 + 2.0 * n
                   + c_meas * qq / r_s)
        if np.max(bracket) <= 0.0:
            return alpha
        alpha *= 2.0
    raise CalibrationFailure("no alpha <= 2^10 satisfies the sampled inequality")


def _unit_dirs(rng, m):
    ang = rng.uniform(0, 2 * np.pi, m)
    return np.stack([np.cos(ang), np.sin(ang)], axis=-1)


def _measured_curvature_constant(S: Barrier, kappa, rng, n_probe=200):
    """Empirical c with |tr_L D^2 |x~|^2 - 2n| <= c (d + |x~|)/r_S, n = 1."""
    r_s = S.global_reflection_scale()
    boundary = S.boundary_samples(64)
    worst = 0.0
    h = 1e-5 * kappa
    for _ in range(n_probe):
        anchor = boundary[rng.integers(len(boundary))]
        nvec = S.normal(anchor)
        x = anchor - rng.uniform(-0.4, 0.4) * r_s * nvec \
            + rng.uniform(-0.4, 0.4) * r_s * np.array([-nvec[1], nvec[0]])
        if S.distance(x) >= 0.9 * S.reach:
            continue
        e = _unit_dirs(rng, 1)[0]

        def f(p):
            return np.sum((S.reflect_point(p) - anchor) ** 2)

        second = (f(x + h * e) - 2.0 * f(x) + f(x - h * e)) / h ** 2
        mirror = S.reflect_point(x) - anchor
        denom = (S.distance(x) + np.linalg.norm(mirror)) / r_s
        if denom > 1e-9:
            worst = max(worst, abs(second - 2.0) / denom)
    return 1.5 * worst


def write_heat_operator_csv(samples, path):
    """Diagnostic CSV with columns (case, x1, x2, tau, value, value_scaled)."""
    lines = ["case,x1,x2,tau,value,value_scaled"]
    for s in samples:
        lines.append("%s,%.17g,%.17g,%.17g,%.17g,%.17g"
                     % (s.case, s.x[0], s.x[1], s.tau, s.value, s.value_scaled))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
