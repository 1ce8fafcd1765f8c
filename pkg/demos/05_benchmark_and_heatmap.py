"""Reproduce the benchmark protocol at desk scale and export a heatmap.

Generates train/test splits, runs the configured methods through the
harness (identity, lookahead variants, SA at matched budgets, uniform-random
multirun), prints the aggregated table, and writes the buffer-time heatmap
of one instance before and after a short annealing run.
"""
from pathlib import Path

from swapsched.baselines import SAConfig, sa_optimize
from swapsched.bench import (GeneratorConfig, export_heatmap,
                             generate_instances, load_pool, run_benchmark)
from swapsched.schedcore import ObjectiveConfig, edd_sort

out = Path("demo_bench_out")
obj = ObjectiveConfig()

for split, seed in (("train", 301), ("test", 302)):
    generate_instances(GeneratorConfig(n_jobs=12, n_stations=4, due_slack_s=300.0,
                                       due_noise_s=600.0, seed=seed, count=10),
                       out / split)
splits = {name: load_pool(out / name) for name in ("train", "test")}

methods = [
    {"type": "identity", "name": "EDD"},
    {"type": "sh", "window": 4, "max_skip": 4},
    {"type": "sh", "window": 6, "max_skip": 8},
    {"type": "sa", "steps": 300},
    {"type": "sa", "steps": 1800},
    {"type": "random_mr", "runs_per_policy": 30, "step_budget": 10},
]
run_benchmark(splits, methods, obj, seed=0, out_dir=out / "results")
print((out / "results" / "table.txt").read_text())
print("per-instance records:", out / "results" / "results.jsonl")

# heatmap: buffer times before vs after local search
inst = splits["train"][0]
sigma0 = edd_sort(inst)
improved = sa_optimize(inst, sigma0, SAConfig(steps=2000, seed=0), obj).best_perm
export_heatmap(inst, sigma0, out / "before.csv", out / "before.svg")
export_heatmap(inst, improved, out / "after.csv", out / "after.svg")
print(f"heatmaps written to {out}/before.svg and {out}/after.svg")
