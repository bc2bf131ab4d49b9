#!/usr/bin/env python3
"""Train the full neuron model and test it on an unseen initial condition.

A reduced-budget version of the full benchmark run: the recovery
variable is analytic from the gate, the voltage gets a small residual
network trained jointly with its operators. Takes about half a minute.
"""

import numpy as np

from lqdyn import dynsys, features, model, neural, opinf, optim

p = dynsys.FhnParams()
rhs = lambda x: dynsys.rhs_fhn(x, p)  # noqa: E731

print("generating 10 trajectories...")
ics = dynsys.sample_initial_conditions([(-1, 1), (-1, 1)], 10, seed=11)
blocks = [dynsys.stencil_derivatives(
    dynsys.integrate(rhs, ic, (0.0, 200.0), 5000)) for ic in ics]
ds = features.build_dataset(blocks, split_seed=22)

hyper = optim.HyperParams(epochs=60, learning_rate=5e-4, batch_size=512,
                          weight_decay=1e-4, seed=33)
components = []
for i, name in enumerate(["v", "w"]):
    ops = opinf.fit_linquad(ds, i)
    gate = opinf.gate_component(opinf.residual_stats(ds, ops), 1e-3)
    if gate.kind == opinf.ANALYTIC:
        print(f"{name}: analytic (rel_rms {gate.rel_rms:.1e})")
        components.append(neural.ComponentModel(ops=ops, gate=gate,
                                                net=None))
    else:
        print(f"{name}: training a (10 wide, 2 block) network...")
        comp, hist = optim.train_component(ds, i, (10, 2), hyper, ops,
                                           gate, shuffle_seed=44)
        print(f"{name}: best validation MSE {hist.val_loss.min():.2e} "
              f"in {hist.wall_seconds:.0f}s")
        components.append(comp)

lqm = model.LQModel(n=2, components=tuple(components),
                    kind=model.CONTINUOUS,
                    metadata={"variable_names": ["v", "w"]})

test_ic = dynsys.sample_initial_conditions([(-1, 1), (-1, 1)], 1,
                                           seed=55)[0]
print(f"\ntest initial condition (unseen): {np.round(test_ic, 3)}")
truth = dynsys.integrate(rhs, test_ic, (0.0, 100.0), 2500)
pred = model.simulate_model(lqm, test_ic, (0.0, 100.0), 2500)
met = model.evaluate(truth, pred)
print(f"relative L2 error over [0, 100]: v {met.rel_l2[0]:.4f}, "
      f"w {met.rel_l2[1]:.4f}")
print(f"max pointwise error: {met.max_abs:.4f}")

model.save_model(lqm, "neuron_model.json")
print("saved neuron_model.json (reload with lqdyn.load_model)")
