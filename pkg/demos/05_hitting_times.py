"""
Hitting times with censoring
============================

Chains start flat at the floor and run until nine tenths of the sites
reach the target level, or until the horizon.  Runs that never get there
are censored and counted as infinite in the quantiles.
"""

from psos.experiments import HittingConfig, hitting_time_experiment

cfg = HittingConfig(p=2, beta=0.5, a=0.5, L_list=(4, 6, 8), n_seeds=8, T_max=5000, H={4: 2, 6: 2, 8: 2})
res = hitting_time_experiment(cfg)
for L, d in res["per_L"].items():
    print(f"L={L}: median {d['median']}  quartiles ({d['q1']}, {d['q3']})  censored {d['n_censored']}/8")
print("fit:", res["fit"])
print("spearman:", res["spearman"])
