"""Circle homeomorphisms used as boundary data, and their traces on a mesh.

A homeomorphism is stored through a lift phi : R -> R with
phi(theta + 2 pi) = phi(theta) + 2 pi; the boundary map is
exp(i theta) -> exp(i phi(theta)).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, FormatError, NotHomeomorphismError
from .mesh import DiskMesh

MODULUS_GRID = 4096


@dataclass(frozen=True)
class CircleHomeo:
    phi: Callable[[np.ndarray], np.ndarray]
    dphi: Callable[[np.ndarray], np.ndarray]
    family: str
    params: dict = field(default_factory=dict)

    def __call__(self, theta):
        return self.phi(np.asarray(theta, dtype=float))

    def boundary_map(self, z):
        """Apply the homeomorphism to points on the unit circle."""
        return np.exp(1j * self.phi(np.angle(z)))

    def compose(self, inner: "CircleHomeo") -> "CircleHomeo":
        """self o inner."""
        return CircleHomeo(
            lambda t: self.phi(inner.phi(t)),
            lambda t: self.dphi(inner.phi(t)) * inner.dphi(t),
            f"{self.family}*{inner.family}",
            {"outer": dict(self.params), "inner": dict(inner.params)},
        )

    @property
    def modulus(self) -> float:
        return quasisymmetry_modulus(self)

    def spec(self) -> str:
        return format_boundary(self)


def quasisymmetry_modulus(h0: CircleHomeo, n: int = MODULUS_GRID) -> float:
    """Grid estimate of sup |phi(t+s) - phi(t)| / |phi(t) - phi(t-s)|."""
    theta = 2 * np.pi * np.arange(n) / n
    ks = np.unique(np.geomspace(1, n // 2, 24).astype(int))
    base = h0.phi(theta)
    rho = 1.0
    for k in ks:
        s = 2 * np.pi * k / n
        fwd = h0.phi(theta + s) - base
        bwd = base - h0.phi(theta - s)
        rho = max(rho, float(np.max(fwd / bwd)))
    return rho


def identity_homeo() -> CircleHomeo:
    return CircleHomeo(lambda t: np.asarray(t, dtype=float) * 1.0,
                       lambda t: np.ones_like(np.asarray(t, dtype=float)), "identity", {})


def rotation(alpha: float) -> CircleHomeo:
    alpha = float(alpha)
    return CircleHomeo(lambda t: t + alpha, lambda t: np.ones_like(np.asarray(t, dtype=float)),
                       "rot", {"alpha": alpha})


def sine_family(eps: float, m: int) -> CircleHomeo:
    """phi(theta) = theta + eps sin(m theta); a homeomorphism iff |eps| m < 1."""
    eps = float(eps)
    if int(m) != m or m < 1:
        raise DomainError("m must be a positive integer")
    m = int(m)
    if abs(eps) * m >= 1:
        raise NotHomeomorphismError(f"|eps| m = {abs(eps) * m} >= 1: phi' changes sign")
    return CircleHomeo(lambda t: t + eps * np.sin(m * t), lambda t: 1 + eps * m * np.cos(m * t),
                       "sine", {"eps": eps, "m": m})


def mobius_trace(a: complex, alpha: float = 0.0) -> CircleHomeo:
    """Boundary values of z -> e^{i alpha} (z - a) / (1 - conj(a) z)."""
    a = complex(a)
    if abs(a) >= 1:
        raise DomainError("Mobius parameter needs |a| < 1")
    alpha = float(alpha)

    def phi(t):
        t = np.asarray(t, dtype=float)
        return t + alpha + 2 * np.angle(1 - a * np.exp(-1j * t))

    def dphi(t):
        return (1 - abs(a) ** 2) / np.abs(np.exp(1j * np.asarray(t, dtype=float)) - a) ** 2

    return CircleHomeo(phi, dphi, "mobius", {"a": a, "alpha": alpha})


def _parse_complex(s: str) -> complex:
    try:
        return complex(s.replace(" ", "").replace("i", "j"))
    except ValueError as exc:
        raise FormatError(f"bad complex number {s!r}") from exc


def _parse_one(term: str) -> CircleHomeo:
    name, _, rest = term.strip().partition(":")
    kv = {}
    for item in filter(None, rest.split(",")):
        k, eq, v = item.partition("=")
        if not eq:
            raise FormatError(f"expected key=value in {term!r}")
        kv[k.strip()] = v.strip()
    try:
        if name in ("identity", "id"):
            return identity_homeo()
        if name == "rot":
            return rotation(float(kv.get("alpha", 0.0)))
        if name == "sine":
            return sine_family(float(kv["eps"]), int(kv.get("m", 1)))
        if name == "mobius":
            return mobius_trace(_parse_complex(kv.get("a", "0")), float(kv.get("alpha", 0.0)))
    except KeyError as exc:
        raise FormatError(f"missing parameter {exc} in {term!r}") from exc
    except ValueError as exc:
        if isinstance(exc, (DomainError, NotHomeomorphismError)):
            raise
        raise FormatError(f"bad parameter in {term!r}: {exc}") from exc
    raise FormatError(f"unknown boundary family {name!r}")


def parse_boundary(text: str) -> CircleHomeo:
    """Parse ``sine:eps=0.3,m=1``, ``rot:alpha=0.7``, ``mobius:a=0.3+0.1i`` or ``identity``.

    Terms joined with ``*`` are composed right to left.
    """
    terms = [t for t in text.split("*") if t.strip()]
    if not terms:
        raise FormatError("empty boundary specification")
    out = _parse_one(terms[-1])
    for t in reversed(terms[:-1]):
        out = _parse_one(t).compose(out)
    return out


def format_boundary(h0: CircleHomeo) -> str:
    if h0.family == "identity":
        return "identity"
    if h0.family == "rot":
        return f"rot:alpha={h0.params['alpha']!r}"
    if h0.family == "sine":
        return f"sine:eps={h0.params['eps']!r},m={h0.params['m']}"
    if h0.family == "mobius":
        a = h0.params["a"]
        return f"mobius:a={a.real!r}{a.imag:+.17g}i,alpha={h0.params['alpha']!r}"
    raise FormatError(f"cannot format composite boundary {h0.family!r}")


def boundary_angles(mesh: DiskMesh) -> np.ndarray:
    ang = np.mod(np.angle(mesh.vertices[mesh.boundary_ids]), 2 * np.pi)
    ang[ang > 2 * np.pi - 1e-9] = 0.0
    return ang


def trace_on_mesh(h0: CircleHomeo, mesh: DiskMesh) -> np.ndarray:
    """Values exp(i phi(theta_j)) at the boundary vertices, in ``mesh.boundary_ids`` order."""
    return np.exp(1j * h0.phi(boundary_angles(mesh)))


def is_cyclically_ordered(values: np.ndarray) -> bool:
    """Points on the circle visited counterclockwise exactly once."""
    steps = np.mod(np.diff(np.angle(np.append(values, values[:1]))), 2 * np.pi)
    return bool(np.all(steps > 0) and abs(steps.sum() - 2 * np.pi) < 1e-9)
