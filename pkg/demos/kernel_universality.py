"""Finite-n Christoffel-Darboux kernel at the soft edge against K_Psi.

The finite-n kernel is evaluated at lam + u/(2 n^{2/3}) with the
perturbation strengths t_k placed by the multiple scaling.
Run: python3 demos/kernel_universality.py   (about 1 min)
"""
from pgue import experiments as ex

cfg = ex.ExperimentConfig(experiment="kernel-limit", n_list=(64, 128, 256), s=0.0)
rows = ex.run(cfg)
e = ex.grid_max_errors(rows)
for n in sorted(e):
    print(f"n = {n:4d}   max grid error e_n = {e[n]:.3e}")
print(f"e_256 / e_64 = {e[256] / e[64]:.3f}  (n^(-1/3) rate would give {4 ** (-1 / 3):.3f})")
# the density is exponentially small next to the singular point u = 0
for u in (-1.0, 0.5):
    for r in rows:
        if r.labels["u"] == u and r.labels["v"] == u:
            print(f"n = {r.labels['n']:4d}  K_n({u}, {u}) = {r.finite_value:.6e}"
                  f"   K_Psi = {r.limit_value:.6e}")
