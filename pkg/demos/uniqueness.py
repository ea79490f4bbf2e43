"""
Restart probe: one harmonic start and several perturbed starts all land on
the same discrete minimizer.

The difference eta = g - h of two solutions of the same Beltrami equation
is quasiregular, with |mu_eta| <= max(|mu_g|, |mu_h|).  Between restarts the
difference is pure solver roundoff, so there is nothing to measure; the
second half builds two affine maps that share a Hopf value but differ by a
genuine amount, where the inequality can be seen.
"""

import itertools

import numpy as np

from conformal_lab.beltrami import level_solve, quasiregularity_of_difference
from conformal_lab.boundary import sine_family
from conformal_lab.hopf import hopf_field
from conformal_lab.mesh import build_disk_mesh, map_from_function
from conformal_lab.minimizer import MinimizeConfig, uniqueness_probe
from conformal_lab.profile import power_profile

mesh = build_disk_mesh(4)
probe = uniqueness_probe(mesh, sine_family(0.3, 1), MinimizeConfig(power_profile(2)), 4, seed=7)
print("starts:", probe.as_dict()["inits"])
print("max pairwise |g - h|_inf:", probe.max_pairwise_linf, " energy spread:", probe.energy_spread)
for i, j in itertools.combinations(range(4), 2):
    q = quasiregularity_of_difference(mesh, probe.results[i].map, probe.results[j].map, 2)
    print(f"  pair {i}{j}: {q['status']}, noise limited: {q.get('noise_limited')}")

# Two affine maps with the same Phi: g = z + 0.3 conj(z), h = x z + y e^{i arg Phi} conj(z)
p = 2
g = map_from_function(mesh, lambda z: z + 0.3 * np.conj(z))
Phi = hopf_field(mesh, g, power_profile(p)).Phi[0]
y = level_solve(p, abs(Phi) / p, 2.0)
h = map_from_function(mesh, lambda z: 2.0 * z + y * np.exp(1j * np.angle(Phi)) * np.conj(z))
q = quasiregularity_of_difference(mesh, g, h, p)
print("affine pair:", q["status"], "sup |mu_eta| =", q["per_delta"]["0.1"]["sup_mu_eta"],
      "max |mu_g| =", q["per_delta"]["0.1"]["k"], f"({q['n_inequality_ok']}/{q['n_checked']} triangles ok)")
