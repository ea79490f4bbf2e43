"""Discrete minimizers of the conformal energy sum A(K) J on the unit disk, with diagnostics.

Submodules:

* ``mesh``: disk triangulations, piecewise-linear maps, Wirtinger derivatives
* ``profile``: energy profiles A(t)
* ``boundary``: circle homeomorphisms used as boundary data
* ``distortion``: pointwise distortion, energies and the inverse-map duality
* ``minimizer``: feasible descent and restart probes
* ``variation``: inner variations and weak forms
* ``hopf``: the Ahlfors-Hopf differential
* ``beltrami``: level curves and the Beltrami operator they define
* ``oracles``: harmonic extensions and conformal reference maps
"""

__version__ = "0.1.0"

from .boundary import CircleHomeo, identity_homeo, mobius_trace, parse_boundary, rotation, sine_family
from .distortion import distortion_of, duality_gap, energy_plain, energy_star, resample_inverse
from .mesh import DiscreteMap, DiskMesh, build_disk_mesh, identity_map, map_from_function, wirtinger
from .minimizer import MinimizeConfig, minimize, uniqueness_probe
from .profile import custom_profile, power_profile, validate_profile

__all__ = [
    "CircleHomeo", "DiscreteMap", "DiskMesh", "MinimizeConfig", "build_disk_mesh", "custom_profile",
    "distortion_of", "duality_gap", "energy_plain", "energy_star", "identity_homeo", "identity_map",
    "map_from_function", "minimize", "mobius_trace", "parse_boundary", "power_profile",
    "resample_inverse", "rotation", "sine_family", "uniqueness_probe", "validate_profile", "wirtinger",
]
