"""Run the classical baselines on a batch of synthetic instances.

Generates a small pool, then compares the due-date sort, the lookahead
construction heuristic at a few parameterizations, and simulated annealing
at two step budgets.
"""
import numpy as np

from swapsched.baselines import SAConfig, SHConfig, sa_optimize, sh_schedule
from swapsched.bench import GeneratorConfig, generate_instance
from swapsched.schedcore import ObjectiveConfig, combined_objective, edd_sort

cfg = ObjectiveConfig()
gen = GeneratorConfig(n_jobs=12, n_stations=4, station_time_s=208.0,
                      due_slack_s=300.0, due_noise_s=600.0, seed=2024, count=8)
pool = [generate_instance(gen, i) for i in range(gen.count)]
print(f"pool: {len(pool)} instances, N={gen.n_jobs}, W={gen.n_stations}")

rows = []
for name, run in [
    ("EDD", lambda inst, j: edd_sort(inst)),
    ("SH-n4ms4", lambda inst, j: sh_schedule(inst, SHConfig(window=4, max_skip=4))),
    ("SH-n6ms8", lambda inst, j: sh_schedule(inst, SHConfig(window=6, max_skip=8))),
    ("SA-300", lambda inst, j: sa_optimize(inst, edd_sort(inst),
                                           SAConfig(steps=300, seed=j), cfg).best_perm),
    ("SA-5000", lambda inst, j: sa_optimize(inst, edd_sort(inst),
                                            SAConfig(steps=5000, seed=j), cfg).best_perm),
]:
    fcs, f2s = [], []
    for j, inst in enumerate(pool):
        perm = run(inst, j)
        rep = combined_objective(inst, perm, edd_sort(inst), cfg)
        fcs.append(rep.fc)
        f2s.append(rep.f2)
    rows.append((name, np.mean(fcs), np.mean(f2s), sum(fc <= 0 for fc in fcs)))

print(f"\n{'method':<10} {'mean fc':>9} {'mean f2':>9} {'no impr':>8}")
for name, fc, f2, ni in rows:
    print(f"{name:<10} {fc:>9.4f} {f2:>9.1f} {ni:>8d}")

# The SA trace records the search trajectory at a configurable stride.
inst = pool[0]
res = sa_optimize(inst, edd_sort(inst), SAConfig(steps=2000, seed=0), cfg,
                  trace_stride=400)
print(f"\nSA trace on {inst.id} (step, fc, accepted):")
for entry in res.trace:
    print("  ", entry)
print(f"accepted {res.accepted}/{res.steps} proposals; best fc {res.best_report.fc:.4f}")
