"""Scaled-down versions of the two Monte Carlo studies.

The full-size runs (250 and 200 replications) are what the acceptance suite
executes; here 40 replications keep the runtime near a minute.
"""

import sys

from gb3reg.simulation import ScenarioConfig, link_choice_study, recovery_study

reps = int(sys.argv[1]) if len(sys.argv) > 1 else 40

print(f"Parameter recovery, logit quantile link, tau = 0.25, {reps} replications")
for n in (100, 305):
    rep = recovery_study(ScenarioConfig(n=n, replications=reps, seed=1))
    print(f"\n  n = {n} (dropped {rep.n_dropped})")
    print("  param    true     bias      SE    RMSE    CP")
    for r in rep.rows():
        print(f"  {r['parameter']:<7}{r['true']:6.2f} {r['bias']:8.4f} {r['se']:7.4f} "
              f"{r['rmse']:7.4f} {r['cp']:5.2f}")

print("\nWhich link wins when the truth is probit?")
rep = link_choice_study(ScenarioConfig(true_link="probit", n=100, replications=reps, seed=2))
for crit, pct in rep.percentages.items():
    print(f"  {crit:<5}", "  ".join(f"{lk} {v:5.1f}%" for lk, v in pct.items()))
