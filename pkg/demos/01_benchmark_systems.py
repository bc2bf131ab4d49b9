#!/usr/bin/env python3
"""Simulate the two benchmark systems and inspect derivative estimates.

Walks through the data-generation half of the pipeline: fixed-step RK4
rollouts of the neuron spiking model and the glycolysis oscillator,
followed by five-point-stencil derivative estimation.
"""

import numpy as np

from lqdyn import dynsys

# A spiking neuron: two variables, cubic voltage nonlinearity.
p = dynsys.FhnParams()
print(f"neuron params: {p}")
traj = dynsys.integrate(lambda x: dynsys.rhs_fhn(x, p), [0.1, 0.1],
                        (0.0, 200.0), 5000)
v = traj.states[:, 0]
print(f"simulated {traj.num_points} points, spacing {traj.spacing:.4f}s")
print(f"voltage range: [{v.min():.3f}, {v.max():.3f}]")
spikes = int(np.sum((v[:-1] < 0) & (v[1:] >= 0)))
print(f"upward zero crossings (spike count): {spikes}")

# Derivative estimation: the stencil drops two samples at each end.
ds = dynsys.stencil_derivatives(traj)
print(f"stencil kept {ds.states.shape[0]} of {traj.num_points} samples")

# Check the estimate against the true field along the trajectory.
true_derivs = dynsys.rhs_fhn(ds.states, p)
err = np.max(np.abs(ds.derivs - true_derivs))
print(f"worst stencil error vs true field: {err:.2e}")

# The seven-species glycolysis oscillator, parameters from the shipped
# config file.
gp = dynsys.default_glycolysis_params()
ranges = dynsys.load_packaged_config("glycolysis")["ic_ranges"]
ic = dynsys.sample_initial_conditions(ranges, 1, seed=7)[0]
print(f"\nglycolysis initial condition: {np.round(ic, 3)}")
gtraj = dynsys.integrate(lambda x: dynsys.rhs_glycolysis(x, gp), ic,
                         (0.0, 10.0), 4000)
print(f"simulated {gtraj.num_points} points over [0, 10]")
for i in range(7):
    col = gtraj.states[:, i]
    print(f"  S{i + 1}: range [{col.min():.3f}, {col.max():.3f}]")
