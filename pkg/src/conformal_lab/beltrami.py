"""Level curves of (x, y) -> ((x^2+y^2)/(x^2-y^2))^(p-1) x y and the Beltrami operator they define.

With x = |h_w| and y = |h_wbar| a power-profile map has Hopf modulus
|Phi| = p K^(p-1) x y, so on a level set y = A_k(x) is determined by x.  The
operator B(w, xi) = conj(Phi)/|Phi| A_k(|xi|) xi/|xi| recovers h_wbar from
h_w.  Only A(t) = t^p is supported here.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .distortion import distortion_of
from .errors import DomainError, MeshMismatchError, SingularArgumentError
from .hopf import HopfField
from .mesh import DiscreteMap, DiskMesh

MAX_BISECTIONS = 200
THETA_GRID = 720


# -- level curves ----------------------------------------------------------

def level_relation(p, k, x, y):
    """(p-1) log((x^2+y^2)/(x^2-y^2)) + log x + log y - log k; zero on the level curve."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return (p - 1) * np.log((x * x + y * y) / (x * x - y * y)) + np.log(x) + np.log(y) - np.log(k)


def _check_level_args(p, k, x):
    if not p >= 1:
        raise DomainError(f"need p >= 1 (p - 1 = {p - 1})")
    if np.any(np.asarray(k) <= 0) or np.any(np.asarray(x) <= 0):
        raise DomainError("k and x must be positive")


def level_solve_array(p: float, k, x) -> np.ndarray:
    """Vectorized A_k(x); NaN where no solution with 0 < y < x exists (only possible at p = 1).

    Bisection on the log form, which is strictly increasing in y.  The
    bracket uses y <= k/x (the distortion factor is >= 1) and, when
    y < x/2, the factor is below (5/3)^(p-1).
    """
    _check_level_args(p, k, x)
    k, x = np.broadcast_arrays(np.asarray(k, dtype=float), np.asarray(x, dtype=float))
    k, x = k.astype(float).ravel(), x.astype(float).ravel()
    if p == 1:
        y = k / x
        return np.where(y < x, y, np.nan)
    lo = np.minimum(0.5 * x, k / (x * (5.0 / 3.0) ** (p - 1)))
    hi = np.minimum(x, k / x)
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        done = (mid <= lo) | (mid >= hi)
        if np.all(done):
            break
        below = level_relation(p, k, x, mid) < 0
        lo = np.where(below & ~done, mid, lo)
        hi = np.where(~below & ~done, mid, hi)
    g_lo = np.abs(level_relation(p, k, x, lo))
    g_hi = np.abs(level_relation(p, k, x, hi))
    return np.where(g_lo <= g_hi, lo, hi)


def level_solve(p: float, k: float, x: float) -> float | None:
    """y = A_k(x), or None when 0 < y < x has no solution (p = 1 with x <= sqrt(k))."""
    y = float(level_solve_array(p, k, x)[0])
    return None if np.isnan(y) else y


def V_and_W(p: float, k: float, x: float) -> tuple[float, float]:
    """V = A_k(x)/x in (0, 1) and W = x A_k(x)."""
    y = level_solve(p, k, x)
    if y is None:
        raise DomainError(f"no level-curve point at x = {x} for p = {p}, k = {k}")
    return y / x, x * y


def level_curve(p: float, k: float, x_min: float, x_max: float, n: int) -> np.ndarray:
    """(n, 2) array of (x, A_k(x)) on a uniform x grid."""
    x = np.linspace(x_min, x_max, n)
    return np.column_stack([x, level_solve_array(p, k, x)])


@dataclass
class MonotonicityRow:
    x: float
    V: float
    W: float
    dV: float
    dW: float
    V_decreasing: bool
    W_increasing: bool
    V_identity_err: float
    W_identity_err: float

    @property
    def passed(self) -> bool:
        return self.V_decreasing and self.W_increasing and self.V_identity_err <= 1e-6 \
            and self.W_identity_err <= 1e-6


@dataclass
class MonotonicityReport:
    p: float
    k: float
    rows: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def as_dict(self) -> dict:
        return {"p": self.p, "k": self.k, "passed": self.passed,
                "rows": [dict(vars(r), passed=r.passed) for r in self.rows]}


def monotonicity_check(p: float, k: float, x_grid, rel_step: float = 1e-5) -> MonotonicityReport:
    """Finite-difference V', W' and the two differentiated level identities."""
    x = np.asarray(x_grid, dtype=float)
    hstep = rel_step * x
    y0 = level_solve_array(p, k, x)
    yp = level_solve_array(p, k, x + hstep)
    ym = level_solve_array(p, k, x - hstep)
    V, W = y0 / x, x * y0
    dV = (yp / (x + hstep) - ym / (x - hstep)) / (2 * hstep)
    dW = ((x + hstep) * yp - (x - hstep) * ym) / (2 * hstep)
    lhs_v = dV * (4 * (p - 1) * V / (1 - V**4) + 1 / V)
    rhs_v = -2 / x
    d8 = x**8 - W**4
    lhs_w = dW * (4 * (p - 1) * x**4 * W / d8 + 1 / W)
    rhs_w = 8 * (p - 1) * x**3 * W**2 / d8
    err_v = np.abs(lhs_v - rhs_v) / np.abs(rhs_v)
    # at p = 1 both sides of the W identity vanish; compare against the size of the terms
    scale_w = np.maximum(np.abs(rhs_w), np.abs(dW / W) + (p == 1) * np.abs(W) / x)
    err_w = np.abs(lhs_w - rhs_w) / np.where(scale_w > 0, scale_w, 1.0)
    if p > 1:
        w_inc = dW > 0
    else:
        w_inc = np.abs(dW) <= 1e-6 * np.abs(W) / x
    rep = MonotonicityReport(float(p), float(k))
    for i in range(len(x)):
        rep.rows.append(MonotonicityRow(float(x[i]), float(V[i]), float(W[i]), float(dV[i]),
                                        float(dW[i]), bool(dV[i] < 0), bool(w_inc[i]),
                                        float(err_v[i]), float(err_w[i])))
    return rep


# -- the Beltrami operator --------------------------------------------------

def hopf_level(p: float, phi_abs, k_convention: str = "scaled"):
    """Level value k for a Hopf modulus: |Phi|/p (scaled) or |Phi| (raw)."""
    if k_convention == "scaled":
        return np.asarray(phi_abs) / p
    if k_convention == "raw":
        return np.asarray(phi_abs)
    raise ValueError(f"unknown k convention {k_convention!r}")


def eval_B_array(p: float, Phi, xi, k_convention: str = "scaled", singular: str = "raise"):
    """Vectorized B for per-point Hopf values Phi and arguments xi.

    Returns 0 where Phi = 0.  Where xi = 0 and Phi != 0 either raises
    :class:`SingularArgumentError` or (``singular="nan"``) returns NaN.
    """
    Phi = np.asarray(Phi, dtype=complex)
    xi = np.asarray(xi, dtype=complex)
    Phi, xi = np.broadcast_arrays(Phi, xi)
    out = np.zeros(Phi.shape, dtype=complex)
    aP, ax = np.abs(Phi), np.abs(xi)
    bad = (aP > 0) & (ax == 0)
    if np.any(bad) and singular == "raise":
        raise SingularArgumentError("B(w, 0) is undefined where Phi(w) != 0")
    live = (aP > 0) & (ax > 0)
    if np.any(live):
        k = hopf_level(p, aP[live], k_convention)
        y = level_solve_array(p, k, ax[live])
        out[live] = np.conj(Phi[live]) / aP[live] * y * xi[live] / ax[live]
    out[bad] = np.nan
    return out


@dataclass
class BeltramiOp:
    p: float
    phi_sampler: Callable[[complex], complex]
    k_convention: str = "scaled"

    def __post_init__(self):
        if not self.p > 1 and self.p != 1:
            raise DomainError("BeltramiOp needs p >= 1")


def eval_B(op: BeltramiOp, w, xi) -> complex:
    Phi = complex(op.phi_sampler(w))
    xi = complex(xi)
    if Phi == 0:
        return 0j
    if xi == 0:
        raise SingularArgumentError("B(w, 0) is undefined where Phi(w) != 0")
    k = float(hopf_level(op.p, abs(Phi), op.k_convention))
    y = level_solve(op.p, k, abs(xi))
    if y is None:
        raise DomainError(f"|xi| = {abs(xi)} below the level curve's range for p = {op.p}")
    return np.conj(Phi) / abs(Phi) * y * xi / abs(xi)


# -- ellipticity ------------------------------------------------------------

def F_theta(a, b, t, s, theta):
    """Squared Lipschitz quotient as a function of the angle between zeta and xi."""
    c = np.cos(theta)
    return (a * a * t * t + b * b * s * s - 2 * a * b * s * t * c) / (t * t + s * s - 2 * s * t * c)


def _ellipticity_chunk(p, n, seed_seq, n_theta, k_convention):
    rng = np.random.default_rng(seed_seq)
    k = np.exp(rng.uniform(np.log(1e-2), np.log(1e2), n))
    t = np.sqrt(k) * np.exp(rng.uniform(np.log(0.05), np.log(20.0), n))
    s = np.sqrt(k) * np.exp(rng.uniform(np.log(0.05), np.log(20.0), n))
    az = rng.uniform(0, 2 * np.pi, n)
    ax = rng.uniform(0, 2 * np.pi, n)
    beta = rng.uniform(0, 2 * np.pi, n)
    zeta, xi = t * np.exp(1j * az), s * np.exp(1j * ax)
    keep = zeta != xi
    zeta, xi, k, t, s, beta = zeta[keep], xi[keep], k[keep], t[keep], s[keep], beta[keep]
    Phi = (p * k if k_convention == "scaled" else k) * np.exp(1j * beta)
    Bz = eval_B_array(p, Phi, zeta, k_convention)
    Bx = eval_B_array(p, Phi, xi, k_convention)
    quotient = np.abs(Bz - Bx) / np.abs(zeta - xi)
    a, b = np.abs(Bz) / t, np.abs(Bx) / s  # V(t), V(s)
    first = (a * t + b * s) / (t + s)
    bound = np.maximum(a, b)
    m1 = first - quotient
    m2 = bound - first
    sign = (a - b) * (s * s * b - t * t * a) / (np.maximum(a, b) * np.maximum(s * s * b, t * t * a))

    theta = 2 * np.pi * np.arange(THETA_GRID) / THETA_GRID
    ct = min(n_theta, len(a))
    theta_fail = 0
    theta_checked = 0
    for lo in range(0, ct, 2000):
        sl = slice(lo, min(ct, lo + 2000))
        F = F_theta(a[sl, None], b[sl, None], t[sl, None], s[sl, None], theta[None, :])
        flat = (F.max(1) - F.min(1)) <= 1e-12 * F.max(1)
        j = np.argmax(F, axis=1)
        off = np.abs(theta[j] - np.pi) > 2 * np.pi / THETA_GRID + 1e-12
        theta_fail += int(np.sum(off & ~flat))
        theta_checked += sl.stop - sl.start
    return {
        "n": int(len(a)),
        "viol_first": int(np.sum(m1 < -1e-10)),
        "viol_bound": int(np.sum(m2 < -1e-10)),
        "viol_sign": int(np.sum(sign < -1e-10)),
        "worst_first_margin": float(m1.min()),
        "worst_bound_margin": float(np.min(bound - quotient)),
        "max_quotient": float(quotient.max()),
        "max_V": float(bound.max()),
        "worst_sign": float(sign.min()),
        "theta_checked": theta_checked,
        "theta_fail": theta_fail,
    }


def ellipticity_sample(p: float, n_samples: int, seed: int = 42, n_theta_tuples: int = 10_000,
                       chunk: int = 50_000, threads: int = 1, k_convention: str = "scaled") -> dict:
    """Random check of the Lipschitz bound on B, the sign claim and the theta = pi maximum.

    Samples are split into fixed chunks with spawned seeds, so the result
    does not depend on ``threads``.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if not p > 1:
        raise DomainError("ellipticity sampling needs p > 1")
    sizes = [min(chunk, n_samples - i) for i in range(0, n_samples, chunk)]
    seqs = np.random.SeedSequence(seed).spawn(len(sizes))
    theta_left = n_theta_tuples
    jobs = []
    for sz, sq in zip(sizes, seqs):
        nt = min(theta_left, sz)
        theta_left -= nt
        jobs.append((sz, sq, nt))

    def run(job):
        return _ellipticity_chunk(p, job[0], job[1], job[2], k_convention)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(run, jobs))
    else:
        parts = [run(j) for j in jobs]
    total = {k: sum(pt[k] for pt in parts) for k in
             ("n", "viol_first", "viol_bound", "viol_sign", "theta_checked", "theta_fail")}
    for key, red in (("worst_first_margin", min), ("worst_bound_margin", min), ("max_quotient", max),
                     ("max_V", max), ("worst_sign", min)):
        total[key] = red(pt[key] for pt in parts)
    total.update({"p": float(p), "seed": int(seed), "n_samples": int(n_samples),
                  "min_ellipticity_gap": 1.0 - total["max_V"],
                  "violations": total["viol_first"] + total["viol_bound"] + total["viol_sign"]})
    return total


# -- residuals on meshes ----------------------------------------------------

@dataclass
class BeltramiResidual:
    per_triangle: np.ndarray
    max_residual: float
    L2_residual: float
    n_singular: int
    mode: str

    def summary(self) -> dict:
        return {"max_residual": self.max_residual, "L2_residual": self.L2_residual,
                "n_singular": self.n_singular, "mode": self.mode}


def fit_holomorphic(mesh: DiskMesh, Phi: np.ndarray, degree: int = 6):
    """Area-weighted least-squares polynomial sum c_n w^n through triangle samples of Phi."""
    z = mesh.barycenters
    V = np.vander(z, degree + 1, increasing=True)
    sw = np.sqrt(mesh.areas)
    coef, *_ = np.linalg.lstsq(V * sw[:, None], Phi * sw, rcond=None)
    return lambda w: np.polyval(coef[::-1], w)


def beltrami_residual(mesh: DiskMesh, hmap: DiscreteMap, hopf, p: float,
                      k_convention: str = "scaled") -> BeltramiResidual:
    """Per-triangle |h_wbar - B(w, h_w)| / |h_w|.

    ``hopf`` is a :class:`HopfField` of the same map (self-consistency mode)
    or a callable w -> Phi(w) evaluated at barycenters (cross mode).
    """
    f = distortion_of(mesh, hmap)
    if isinstance(hopf, HopfField):
        Phi, mode = hopf.Phi, "self"
    else:
        Phi, mode = np.asarray(hopf(mesh.barycenters), dtype=complex), "cross"
    B = eval_B_array(p, Phi, f.h_w, k_convention, singular="nan")
    ax = np.abs(f.h_w)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.abs(f.h_wbar - B) / ax
    r = np.where((ax == 0) & (np.abs(f.h_wbar) == 0) & (np.abs(Phi) == 0), 0.0, r)
    singular = ~np.isfinite(r)
    good = ~singular
    w = mesh.areas[good]
    return BeltramiResidual(
        r,
        float(np.max(r[good])) if good.any() else float("nan"),
        float(np.sqrt(np.sum(w * r[good] ** 2) / np.sum(w))) if good.any() else float("nan"),
        int(singular.sum()),
        mode,
    )


def quasiregularity_of_difference(mesh: DiskMesh, map_g: DiscreteMap, map_h: DiscreteMap, p: float,
                                  deltas=(0.1, 0.2, 0.4), rel_tol: float = 1e-2) -> dict:
    """Beltrami coefficient of eta = g - h on interior disks |w| <= 1 - delta.

    The per-triangle bound |mu_eta| <= max(|mu_g|, |mu_h|) is only asserted
    where each map satisfies the other's Beltrami relation up to ``rel_tol``
    times |eta_w|; elsewhere the triangle is flagged.  When no triangle
    qualifies the difference is below what the two maps resolve and the
    report is marked ``noise_limited``.
    """
    map_g.check_on(mesh)
    map_h.check_on(mesh)
    if map_g.mesh_ref and map_h.mesh_ref and map_g.mesh_ref != map_h.mesh_ref:
        raise MeshMismatchError("maps live on different meshes")
    eta = map_g.values - map_h.values
    scale = max(np.max(np.abs(map_g.values)), np.max(np.abs(map_h.values)), 1e-300)
    report: dict = {"p": float(p), "max_abs_eta": float(np.max(np.abs(eta)))}
    if np.max(np.abs(eta)) <= 1e-15 * scale:
        report["status"] = "degenerate: zero difference"
        return report
    fe = distortion_of(mesh, DiscreteMap(eta, mesh.ident))
    fg, fh = distortion_of(mesh, map_g), distortion_of(mesh, map_h)
    dscale = np.max(np.abs(fg.h_w)) + np.max(np.abs(fh.h_w))
    if np.max(np.abs(fe.h_w)) <= 1e-13 * dscale and np.max(np.abs(fe.h_wbar)) <= 1e-13 * dscale:
        report["status"] = "derivative-degenerate"
        return report
    report["status"] = "ok"
    ew = np.abs(fe.h_w)
    live = ew > 1e-14 * dscale
    mu_eta = np.where(live, np.abs(fe.h_wbar) / np.where(live, ew, 1.0), np.inf)
    mu_g, mu_h = np.abs(fg.h_wbar / fg.h_w), np.abs(fh.h_wbar / fh.h_w)
    Phi_g = p * fg.K ** (p - 1) * fg.h_w * np.conj(fg.h_wbar)
    Phi_h = p * fh.K ** (p - 1) * fh.h_w * np.conj(fh.h_wbar)
    # defect of each map in the other's relation
    d_h = np.abs(fh.h_wbar - eval_B_array(p, Phi_g, fh.h_w, singular="nan"))
    d_g = np.abs(fg.h_wbar - eval_B_array(p, Phi_h, fg.h_w, singular="nan"))
    defect = np.nan_to_num(d_g + d_h, nan=np.inf)
    checked = live & (defect <= rel_tol * ew)
    slack = defect * (1 / np.where(live, ew, 1.0) + 1 / np.minimum(np.abs(fg.h_w), np.abs(fh.h_w)))
    ok = mu_eta <= np.maximum(mu_g, mu_h) + slack + 1e-12
    r = np.abs(mesh.barycenters)
    per_delta = {}
    for d in deltas:
        inside = r <= 1 - d
        sel = inside & live
        per_delta[str(d)] = {
            "sup_mu_eta": float(np.max(mu_eta[sel])) if sel.any() else float("nan"),
            "M": float(np.max(np.abs(Phi_g[inside]))),
            "eps": float(np.min(np.abs(fg.h_wbar[inside]))),
            "k": float(np.max(mu_g[inside])),
            "n_triangles": int(inside.sum()),
        }
    report.update({
        "per_delta": per_delta,
        "n_checked": int(checked.sum()),
        "n_inequality_ok": int(np.sum(ok & checked)),
        "n_flagged": int(np.sum(live & ~checked)),
        "n_zero_eta_w": int(np.sum(~live)),
        "noise_limited": bool(not checked.any()),
    })
    return report
