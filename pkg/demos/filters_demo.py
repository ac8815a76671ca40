"""Twin experiment: track a Lorenz-96 truth with the EnKF and the particle
filter, starting either near the truth or from a badly biased prior.

Run with:  python3 demos/filters_demo.py   (about half a minute)
"""

import numpy as np

from filterstab import (
    BpfConfig,
    EnkfConfig,
    GaussianSpec,
    ModelConfig,
    ObservationModel,
    bpf_run,
    enkf_run,
    ensemble_spread,
    generate_truth,
    make_propagator,
    observe,
    scaled_l2_error,
    spin_up,
)

cfg = ModelConfig()
x0 = spin_up(seed=0, cfg=cfg, n_iterations=20_000)
n = 100  # five model time units
truth = generate_truth(x0, n, cfg)
obs = ObservationModel.alternate(cfg.d, sigma2=0.4)
rec = observe(truth, obs, seed=1)
propagate = make_propagator(cfg)

# Two initial ensembles: centered on the truth, and offset by 4 in every
# coordinate with a wider spread.
init_good = GaussianSpec(mean=x0, variance_scale=0.1)
init_bad = GaussianSpec(mean=x0 + 4.0, variance_scale=1.0)

ecfg = EnkfConfig(N=500, localization_radius=2.0, sigma2=obs.sigma2)
pcfg = BpfConfig(N=500, sigma2=obs.sigma2)  # jitter std sqrt(0.5)

runs = {
    "enkf / good init": enkf_run(init_good, rec, obs, ecfg, propagate, seed=2),
    "enkf / bad init": enkf_run(init_bad, rec, obs, ecfg, propagate, seed=3),
    "bpf  / good init": bpf_run(init_good, rec, obs, pcfg, propagate, seed=4),
    "bpf  / bad init": bpf_run(init_bad, rec, obs, pcfg, propagate, seed=5),
}

print(f"scaled L2 error ||mean - truth|| / sqrt(d), spread in parentheses")
print(f"{'time':>6}", *(f"{k:>18}" for k in runs))
for k in (0, 10, 20, 40, 60, 80, 100):
    row = [f"{truth.times[k]:6.2f}"]
    for run in runs.values():
        e = scaled_l2_error(run[k], truth.states[k])
        s = ensemble_spread(run[k])
        row.append(f"{e:8.3f} ({s:5.3f})")
    print(*row)

print(
    "\nBoth filters forget the biased initialization within a couple of time"
    "\nunits; the particle filter keeps a wider cloud because of the"
    "\nresampling jitter, while the localized EnKF concentrates tightly."
)
