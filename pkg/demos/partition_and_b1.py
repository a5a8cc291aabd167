"""Partition function and b_1 on both sides of the scaling limit.

ln Z_n - ln Z_n^GUE - 2 n^{1/3} tau_1 approaches -I(s), and the
second-derivative oracle b1_oracle approaches b_1(s).
Run: python3 demos/partition_and_b1.py   (about 2 min)
"""
from pgue import experiments as ex

tau = (1.0, 1.0)
rows = ex.run(ex.ExperimentConfig(experiment="partition-limit", n_list=(32, 64, 128), tau=tau))
for r in rows:
    print(f"n = {r.labels['n']:4d}  finite {r.finite_value:+.6f}  limit {r.limit_value:+.6f}"
          f"  r_n = {r.abs_error:.4f}")

rows = ex.run(ex.ExperimentConfig(experiment="b1-crosscheck", n_list=(64, 128),
                                  grid=(0.0, 2.0, 4.0), tau=tau))
for r in rows:
    print(f"n = {r.labels['n']:4d}  s = {r.labels['s']:4.1f}  b1_oracle {r.finite_value:+.6f}"
          f"  b_1(s) {r.limit_value:+.6f}  diff {r.abs_error:.1e}")
