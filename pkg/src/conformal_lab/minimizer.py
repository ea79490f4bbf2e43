"""Feasible descent for the discrete energy sum(area * A(K) * J).

Boundary values are fixed by the trace of a circle homeomorphism; interior
vertex positions are free.  Every accepted iterate keeps all triangle
Jacobians above ``jac_floor`` times the minimum Jacobian of the start.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .boundary import CircleHomeo
from .distortion import _require_admissible, distortion
from .errors import InitError, StallError
from .mesh import DiscreteMap, DiskMesh
from .oracles import harmonic_extension_fem
from .profile import EnergyProfile, validate_profile

log = logging.getLogger(__name__)

EPS = np.finfo(float).eps


@dataclass
class MinimizeConfig:
    profile: EnergyProfile
    grad_tol: float = 1e-8
    max_iters: int = 20000
    armijo_c: float = 1e-4
    shrink: float = 0.5
    jac_floor: float = 1e-3
    seed: int = 0
    memory: int = 10
    direction: str = "lbfgs"  # lbfgs | sobolev | diagonal
    max_backtracks: int = 40

    def __post_init__(self):
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not (0 < self.armijo_c < 1 and 0 < self.shrink < 1 and self.jac_floor > 0):
            raise ValueError("need armijo_c, shrink in (0, 1) and jac_floor > 0")
        if self.direction not in ("lbfgs", "sobolev", "diagonal"):
            raise ValueError(f"unknown direction {self.direction!r}")


@dataclass
class MinimizeResult:
    map: DiscreteMap
    energy: float
    iterations: int
    final_grad_norm: float
    min_J: float
    converged: bool
    history: list = field(default_factory=list)  # (iter, energy, grad_norm, min_J)
    init: str = "harmonic"


def _rdot(a, b) -> float:
    """Real inner product of complex vectors viewed as R^2n."""
    return float(np.sum(a.real * b.real + a.imag * b.imag))


class EnergyProblem:
    """Energy and gradient over interior vertex values, boundary held fixed."""

    def __init__(self, mesh: DiskMesh, boundary_values: np.ndarray, profile: EnergyProfile):
        self.mesh = mesh
        self.profile = profile
        self.I = mesh.interior_ids
        self.base = np.zeros(mesh.n_vertices, dtype=complex)
        self.base[mesh.boundary_ids] = boundary_values
        Dw, Dwbar = mesh.wirtinger_operators
        self.Dw, self.Dwbar = Dw, Dwbar
        self.DwH = Dw.conj().T.tocsr()
        self.DwbarH = Dwbar.conj().T.tocsr()
        self.area = mesh.areas
        self.vertex_area = mesh.vertex_areas[self.I]

    def full(self, x: np.ndarray) -> np.ndarray:
        v = self.base.copy()
        v[self.I] = x
        return v

    def field(self, x):
        v = self.full(x)
        return distortion_from_values(self, v)

    def energy(self, x, fld=None) -> float:
        fld = self.field(x) if fld is None else fld
        return float(np.sum(self.area * self.profile.eval(fld.K) * fld.J))

    def gradient_full(self, fld) -> np.ndarray:
        x, y = fld.h_w, fld.h_wbar
        X, Y, J = np.abs(x) ** 2, np.abs(y) ** 2, fld.J
        A = self.profile.eval(fld.K)
        dA = self.profile.deriv(fld.K)
        fX = A - 2 * Y * dA / J
        fY = 2 * X * dA / J - A
        return self.DwH @ (self.area * 2 * x * fX) + self.DwbarH @ (self.area * 2 * y * fY)

    def gradient(self, x, fld=None) -> np.ndarray:
        fld = self.field(x) if fld is None else fld
        return self.gradient_full(fld)[self.I]

    def grad_norm(self, g) -> float:
        """Sup over interior vertices of |gradient| per unit dual area."""
        if len(g) == 0:
            return 0.0
        return float(np.max(np.abs(g) / self.vertex_area))


def distortion_from_values(problem: EnergyProblem, values):
    from .mesh import WirtingerDerivs

    return distortion(WirtingerDerivs(problem.Dw @ values, problem.Dwbar @ values))


def energy_gradient(mesh: DiskMesh, hmap: DiscreteMap, profile: EnergyProfile) -> np.ndarray:
    """Gradient of sum(area A(K) J) w.r.t. each interior vertex, as d/dRe + i d/dIm."""
    hmap.check_on(mesh)
    prob = EnergyProblem(mesh, hmap.values[mesh.boundary_ids], profile)
    fld = distortion_from_values(prob, hmap.values)
    _require_admissible(fld, strict=True)
    return prob.gradient_full(fld)[mesh.interior_ids]


def _precondition(problem: EnergyProblem, cfg: MinimizeConfig, g):
    if cfg.direction == "diagonal":
        return g / problem.vertex_area
    lu = problem.mesh.interior_stiffness_lu
    return lu.solve(np.ascontiguousarray(g.real)) + 1j * lu.solve(np.ascontiguousarray(g.imag))


def _lbfgs_direction(problem, cfg, g, mem):
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(mem):
        a = rho * _rdot(s, q)
        alphas.append(a)
        q -= a * y
    r = _precondition(problem, cfg, q)
    if mem:
        s, y, _ = mem[-1]
        Hy = _precondition(problem, cfg, y)
        r *= _rdot(s, y) / _rdot(y, Hy)
    for (s, y, rho), a in zip(mem, reversed(alphas)):
        b = rho * _rdot(y, r)
        r += (a - b) * s
    return -r


def run_descent(problem: EnergyProblem, x0: np.ndarray, cfg: MinimizeConfig,
                init: str = "harmonic") -> MinimizeResult:
    x = np.asarray(x0, dtype=complex).copy()
    fld = problem.field(x)
    if np.any(fld.J <= 0):
        raise InitError(
            f"initial map is not orientation preserving (min J = {fld.J.min():.3e}); "
            "try a finer mesh"
        )
    floor = cfg.jac_floor * float(fld.J.min())
    E = problem.energy(x, fld)
    g = problem.gradient(x, fld)
    gn = problem.grad_norm(g)
    history = [(0, E, gn, float(fld.J.min()))]
    mem: list = []
    rejected = 0
    it = 0
    while gn > cfg.grad_tol and it < cfg.max_iters:
        it += 1
        if cfg.direction == "lbfgs":
            d = _lbfgs_direction(problem, cfg, g, mem)
        else:
            d = -_precondition(problem, cfg, g)
        slope = _rdot(g, d)
        if not slope < 0:
            mem.clear()
            d = -_precondition(problem, cfg, g)
            slope = _rdot(g, d)
        t = 1.0
        accepted = False
        for _ in range(cfg.max_backtracks):
            xn = x + t * d
            fn = problem.field(xn)
            if np.all(fn.J > floor):
                En = problem.energy(xn, fn)
                if np.isfinite(En):
                    if En <= E + cfg.armijo_c * t * slope:
                        accepted = True
                    elif abs(En - E) <= 64 * EPS * abs(E):
                        # energy change below roundoff: fall back on the slope along d
                        gnew = problem.gradient(xn, fn)
                        if abs(_rdot(gnew, d)) <= 0.9 * abs(slope):
                            accepted = True
                    if accepted:
                        break
            rejected += 1
            if rejected >= cfg.max_backtracks:
                raise StallError(
                    f"line search rejected {rejected} consecutive trial steps at iteration {it}",
                    {"iteration": it, "energy": E, "grad_norm": gn, "min_J": float(fld.J.min()),
                     "step": t},
                )
            t *= cfg.shrink
        if not accepted:
            mem.clear()
            continue
        rejected = 0
        gnew = problem.gradient(xn, fn)
        s, yv = xn - x, gnew - g
        sy = _rdot(s, yv)
        if cfg.direction == "lbfgs" and sy > 0:
            mem.append((s, yv, 1.0 / sy))
            if len(mem) > cfg.memory:
                mem.pop(0)
        x, fld, E, g = xn, fn, En, gnew
        gn = problem.grad_norm(g)
        history.append((it, E, gn, float(fld.J.min())))
        if it % 500 == 0:
            log.debug("iter %d energy %.15g grad %.3e", it, E, gn)
    return MinimizeResult(
        DiscreteMap(problem.full(x), problem.mesh.ident),
        E, it, gn, float(fld.J.min()), bool(gn <= cfg.grad_tol), history, init,
    )


def perturbed_start(mesh: DiskMesh, harmonic: np.ndarray, seed: int, amplitude: float | None = None):
    """Harmonic start plus seeded interior noise, pulled back toward the start until J > 0."""
    rng = np.random.default_rng(seed)
    if amplitude is None:
        amplitude = 0.05 * mesh.mesh_size
    I = mesh.interior_ids
    r = amplitude * np.sqrt(rng.uniform(size=len(I)))
    noise = r * np.exp(2j * np.pi * rng.uniform(size=len(I)))
    Dw, Dwbar = mesh.wirtinger_operators
    s = 1.0
    for _ in range(60):
        v = harmonic.copy()
        v[I] += s * noise
        hw, hwb = Dw @ v, Dwbar @ v
        if np.all(np.abs(hw) ** 2 - np.abs(hwb) ** 2 > 0):
            return v
        s *= 0.5
    return harmonic.copy()


def minimize(mesh: DiskMesh, h0: CircleHomeo, cfg: MinimizeConfig, init: str = "harmonic",
             seed: int | None = None) -> MinimizeResult:
    """Minimize the discrete conformal energy with boundary values h0.

    ``init`` is ``"harmonic"`` (discrete harmonic extension) or
    ``"perturbed"`` (harmonic plus seeded noise of amplitude 0.05 * mesh size).
    """
    if cfg.profile.kind != "power":
        rep = validate_profile(cfg.profile)
        if not rep.passed:
            raise ValueError(f"profile failed validation: {rep.as_dict()}")
    harm = harmonic_extension_fem(mesh, h0).values
    if init == "harmonic":
        start = harm
    elif init == "perturbed":
        start = perturbed_start(mesh, harm, cfg.seed if seed is None else seed)
    else:
        raise ValueError(f"unknown init {init!r}")
    problem = EnergyProblem(mesh, harm[mesh.boundary_ids], cfg.profile)
    return run_descent(problem, start[mesh.interior_ids], cfg, init)


@dataclass
class UniquenessReport:
    results: list
    pairwise_linf: np.ndarray
    energy_spread: float
    all_converged: bool

    @property
    def max_pairwise_linf(self) -> float:
        n = len(self.results)
        if n < 2:
            return 0.0
        return float(np.max(self.pairwise_linf[np.triu_indices(n, 1)]))

    @property
    def partial(self) -> bool:
        return not self.all_converged

    def as_dict(self) -> dict:
        return {
            "n_restarts": len(self.results),
            "inits": [r.init for r in self.results],
            "energies": [r.energy for r in self.results],
            "iterations": [r.iterations for r in self.results],
            "converged": [r.converged for r in self.results],
            "final_grad_norms": [r.final_grad_norm for r in self.results],
            "min_J": [r.min_J for r in self.results],
            "max_pairwise_linf": self.max_pairwise_linf,
            "pairwise_linf": self.pairwise_linf.tolist(),
            "energy_spread": self.energy_spread,
            "partial": self.partial,
        }


def restart_seeds(seed: int, n: int) -> list[int]:
    """Independent per-restart seeds drawn from one root seed."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def uniqueness_probe(mesh: DiskMesh, h0: CircleHomeo, cfg: MinimizeConfig, n_restarts: int,
                     seed: int = 0, threads: int = 1) -> UniquenessReport:
    """One harmonic start plus n_restarts - 1 perturbed starts; compare the minimizers."""
    if n_restarts < 2:
        raise ValueError("n_restarts must be >= 2")
    seeds = restart_seeds(seed, n_restarts - 1)
    jobs = [("harmonic", None)] + [("perturbed", s) for s in seeds]

    def run(job):
        init, s = job
        return minimize(mesh, h0, cfg, init, seed=s)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    vals = np.array([r.map.values for r in results])
    n = len(results)
    dist = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            dist[i, j] = dist[j, i] = np.max(np.abs(vals[i] - vals[j]))
    energies = [r.energy for r in results]
    return UniquenessReport(results, dist, float(max(energies) - min(energies)),
                            all(r.converged for r in results))
