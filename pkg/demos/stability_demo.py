"""A miniature filter-stability experiment, end to end.

Runs one reduced-size slice per filter (smaller ensembles, fewer
realizations, and a shorter horizon than the full study), fits the
exponential decay a * exp(-lambda t) + c to the mean divergence between the
well-initialized and badly-initialized filtering distributions, and reports
the RMSE correlation. Writes the standard report files to demo_output/.

Run with:  python3 demos/stability_demo.py   (a few minutes)
"""

from filterstab import (
    ExperimentConfig,
    ModelConfig,
    report,
    run_single,
    truth_initial_state,
)

config = ExperimentConfig(
    model=ModelConfig(d=10, F=10.0, g=0.05, dt=0.01),
    sigma2=0.4,
    n_steps=80,            # four model time units
    n_realizations=3,
    ensemble_size=200,
    epsilon=0.01,
    spin_up_iterations=20_000,
    master_seed=0,
)

print("spinning up the truth ...")
x0 = truth_initial_state(config)

slices = []
for fk in ("enkf", "bpf"):
    print(f"running {fk} slice (g={config.model.g}, sigma2={config.sigma2}) ...")
    sl = run_single(config, filter_kind=fk, x0_true=x0)
    slices.append(sl)
    f = sl.fit
    print(f"  D_eps at t=0: {sl.div.mean[0]:.2f}, at the end: {sl.div.mean[-1]:.2f}")
    if f.success:
        print(f"  fit: a = {f.a:.3f} +/- {f.ci_a:.2f}, "
              f"lambda = {f.lam:.3f} +/- {f.ci_lam:.2f}, "
              f"c = {f.c:.3f} +/- {f.ci_c:.2f}  (R^2 = {f.r2:.3f})")
    else:
        print(f"  fit failed: {f.message}")
    print(f"  Pearson r (mean D_eps vs biased-init RMSE) = {sl.corr.pearson_r:.3f}")

paths = report(slices, "demo_output")
print("\nwrote:", *paths, sep="\n  ")
print(
    "\nThe divergence decays roughly exponentially for both filters and then"
    "\nplateaus; the particle filter's plateau sits higher than the EnKF's"
    "\nbecause the resampling jitter keeps its clouds from coalescing."
)
