#!/usr/bin/env python3
"""Fit linear-quadratic operators per component and gate them.

The residual of the decoupled least-squares fit tells which components
are exactly linear-quadratic (kept analytic) and which need a residual
network. On the neuron model the recovery variable w is linear, so it
gates analytic with coefficients matching the true equation; the voltage
v carries a cubic term and fails the gate.
"""

import numpy as np

from lqdyn import dynsys, features, opinf

p = dynsys.FhnParams()
ics = dynsys.sample_initial_conditions([(-1, 1), (-1, 1)], 10, seed=11)
blocks = []
for ic in ics:
    traj = dynsys.integrate(lambda x: dynsys.rhs_fhn(x, p), ic,
                            (0.0, 200.0), 5000)
    blocks.append(dynsys.stencil_derivatives(traj))
ds = features.build_dataset(blocks, split_seed=22)
print(f"dataset: {ds.num_rows} rows, {int(ds.train_mask.sum())} train")

names = ["v", "w"]
for i in range(2):
    ops = opinf.fit_linquad(ds, i)
    report = opinf.residual_stats(ds, ops)
    gate = opinf.gate_component(report, threshold=1e-3)
    print(f"\ncomponent {names[i]}: rel_rms = {report.rel_rms:.3e} "
          f"-> {gate.kind}")
    print(f"  a_row = {np.round(ops.a_row, 6)}")
    print(f"  q_row = {np.round(ops.q_row, 6)}")
    print(f"  bias  = {ops.bias:.6f}")

print("\ntrue w equation: dw/dt = (v + 0.7 - 0.8 w) / 12.5")
print(f"  expected a_row = [{1 / 12.5}, {-0.8 / 12.5}], bias = {0.7 / 12.5}")
