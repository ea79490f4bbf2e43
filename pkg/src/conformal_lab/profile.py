"""Convex integrands A : [1, inf) -> [1, inf) for the distortion energies."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError

GRID_POINTS = 512


@dataclass(frozen=True)
class EnergyProfile:
    p: float
    eval: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]
    kind: str = "custom"

    def __call__(self, t):
        return self.eval(t)

    @property
    def is_power(self) -> bool:
        return self.kind == "power"


def power_profile(p: float) -> EnergyProfile:
    """A(t) = t**p, A'(t) = p t**(p-1)."""
    p = float(p)
    if not p >= 1:
        raise DomainError(f"power profile needs p >= 1, got {p}")
    if p == 1.0:
        return EnergyProfile(1.0, lambda t: np.asarray(t, dtype=float) * 1.0,
                             lambda t: np.ones_like(np.asarray(t, dtype=float)), "power")
    return EnergyProfile(p, lambda t: np.power(t, p), lambda t: p * np.power(t, p - 1.0), "power")


def custom_profile(eval, deriv, p: float) -> EnergyProfile:
    """Wrap a user-supplied A, A' and claimed exponent; run :func:`validate_profile` before use."""
    return EnergyProfile(float(p), eval, deriv, "custom")


@dataclass
class CheckRow:
    name: str
    passed: bool
    worst_t: float
    worst_value: float


@dataclass
class ValidationReport:
    t_max: float
    rows: list[CheckRow] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def row(self, name: str) -> CheckRow:
        return next(r for r in self.rows if r.name == name)

    def as_dict(self) -> dict:
        return {
            "t_max": self.t_max,
            "passed": self.passed,
            "rows": [vars(r) for r in self.rows],
            "flags": list(self.flags),
        }


def validate_profile(profile: EnergyProfile, t_max: float = 100.0) -> ValidationReport:
    """Check A(1) >= 1, monotonicity, convexity, p A <= t A' and A' against finite differences.

    Violations are report rows, never exceptions.  Growth much faster than
    t**p is flagged but does not fail the report.
    """
    if not t_max >= 2:
        raise DomainError("t_max must be >= 2")
    t = np.geomspace(1.0, t_max, GRID_POINTS)
    A = np.asarray(profile.eval(t), dtype=float)
    dA = np.asarray(profile.deriv(t), dtype=float)
    rep = ValidationReport(float(t_max))

    rep.rows.append(CheckRow("A(1) >= 1", bool(A[0] >= 1.0), 1.0, float(A[0] - 1.0)))

    steps = np.diff(A)
    i = int(np.argmin(steps))
    rep.rows.append(CheckRow("nondecreasing", bool(steps[i] >= 0), float(t[i + 1]), float(steps[i])))

    mid = np.asarray(profile.eval(0.5 * (t[:-1] + t[1:])), dtype=float)
    gap = 0.5 * (A[:-1] + A[1:]) - mid  # >= 0 for convex A
    tol = 1e-10 * np.maximum(1.0, np.abs(A[1:]))
    i = int(np.argmin(gap + tol))
    rep.rows.append(CheckRow("convex", bool(np.all(gap >= -tol)), float(t[i]), float(gap[i])))

    slack = t * dA - profile.p * A  # condition p A(t) <= t A'(t)
    tol = 1e-12 * np.abs(t * dA)
    i = int(np.argmin(slack + tol))
    rep.rows.append(CheckRow("p A(t) <= t A'(t)", bool(np.all(slack >= -tol)), float(t[i]), float(slack[i])))

    h = 1e-5 * t
    ev = lambda s: np.asarray(profile.eval(s), dtype=float)  # noqa: E731
    fd = (ev(t + h) - ev(t - h)) / (2 * h)
    # A is only defined on [1, inf): second-order one-sided stencil at the left end
    fd[0] = (-3 * ev(t[:1]) + 4 * ev(t[:1] + h[:1]) - ev(t[:1] + 2 * h[:1]))[0] / (2 * h[0])
    rel = np.abs(fd - dA) / np.maximum(np.abs(dA), 1e-300)
    i = int(np.argmax(rel))
    rep.rows.append(CheckRow("A' matches finite differences", bool(rel[i] <= 1e-6), float(t[i]), float(rel[i])))

    growth = t[-1] * dA[-1] / A[-1]
    if growth > 1.1 * profile.p + 0.1:
        rep.flags.append(
            f"growth exponent t A'/A = {growth:.3g} at t = {t[-1]:.3g} exceeds claimed p = {profile.p:.3g}"
        )
    return rep


def dominates_identity(profile: EnergyProfile, t_max: float = 100.0) -> bool:
    """A(t) >= t on the validation grid (the coercivity bound used by the minimizer)."""
    t = np.geomspace(1.0, t_max, GRID_POINTS)
    return bool(np.all(np.asarray(profile.eval(t)) >= t * (1 - 1e-14)))
