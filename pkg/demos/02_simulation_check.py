"""
Monte-Carlo cross-check at desk scale
=====================================

Simulates the two-phase network with the light desk preset and compares the
estimates with the analytic values. A few thousand realizations take about a
minute on one core; set MMTC_THREADS to use more workers.
"""
import sys

from mmtc import desk_params, evaluate
from mmtc.simulator import SimConfig, estimate_multi

runs = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
params = desk_params(n_channels=10)
config = SimConfig.desk(n_runs=runs, master_seed=1)

# every TW value reuses the same realizations
sims = estimate_multi(params, config, [50.0, 150.0, 300.0])

print(f"{runs} realizations, N={params.n_channels}")
print("TW     metric           analytic   sim      stderr")
for tw, est in sims.items():
    rep = evaluate(params.with_(resource_tw=tw))
    for name in ("p_suc1", "p_suc2", "p_mtd_success", "p_channel_util"):
        e = est[name]
        print(f"{tw:<6g} {name:<16} {getattr(rep, name):.4f}     {e.mean:.4f}   {e.stderr:.4f}")

# Per-MTD and per-aggregator views differ from the typical-cluster and
# typical-cell averages the analysis uses
est = sims[150.0]
print("\nnon-drop, typical cluster vs per MTD:", f"{est['p_nondrop'].mean:.4f}", f"{est['p_nondrop_mtd'].mean:.4f}")
print("relaying, typical cell vs per aggregator:", f"{est['p_suc2'].mean:.4f}", f"{est['p_suc2_aggregator'].mean:.4f}")
print("void cells: sim", f"{est['p_void'].mean:.4f}")
