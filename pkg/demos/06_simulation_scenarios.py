"""Monte-Carlo scenario harness at demo scale.

Runs a reduced-replicate version of the first preset scenario (material
variation dominant, envelope dimension known) and of the fixed-design
scenario used to compare empirical and asymptotic coefficient spread.
Full-scale runs live in the acceptance tests and the `simulate` CLI.
"""
import numpy as np

from spenvelope import OptimOptions, run_scenario, scenario_config

opts = OptimOptions(multistart=1)

cfg = scenario_config(1, n=80, reps=8, seed=5, opts=opts, n_jobs=2)
res = run_scenario(cfg)
print("scenario 1 (n=80, 8 replicates)")
for key in ("angle_spe", "angle_pe", "err_spe", "err_pe", "err_gls"):
    mean, se = res.summary[key]
    print("  %-10s %.4f (se %.4f)" % (key, mean, se))

cfg5 = scenario_config(5, n=80, reps=40, seed=6, opts=opts, n_jobs=2)
res5 = run_scenario(cfg5)
beta1 = res5.records["beta1_spe"]
print("\nscenario 5 (fixed basis and sites, 40 replicates)")
print("  empirical sd of beta1:  %.4f" % np.std(beta1, ddof=1))
print("  asymptotic sd (truth):  %.4f" % res5.overlay["asymptotic_sd"])
print("  histogram counts:", np.histogram(beta1, bins=8)[0].tolist())
