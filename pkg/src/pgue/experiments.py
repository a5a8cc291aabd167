"""Experiment drivers comparing finite-n quantities with their limits.

Each ``cmd_*`` takes an ExperimentConfig and returns a list of
ReportRow.  Rows serialize to CSV with the fixed columns in ``COLUMNS``;
the ``u``/``v`` columns hold grid points (kernel), lambda and the
identity index (identities), or ``*`` for a row that summarizes a grid.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
import csv
import io
import math
import time

import gmpy2
import numpy as np
from gmpy2 import mpfr

from . import orthopoly as op
from . import painleve as pv
from . import psi
from .scaling import (DEFAULT_PREC, EnsembleSpec, TauVector, ensemble_from_tau,
                      lambda_of_sloc, precision, s_of_lambda, t_from_tau, weight_w)

EXPERIMENTS = ("kernel-limit", "partition-limit", "identities", "outer-partition",
               "b1-crosscheck")

COLUMNS = ("experiment", "n", "m", "s", "tau", "u", "v", "finite_value", "limit_value",
           "abs_error", "precision_bits", "rtol", "wall_ms")


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


def _floats(x):
    if isinstance(x, str):
        x = [p for p in x.replace(";", ",").split(",") if p.strip()]
    return tuple(float(p) for p in x)


def _ints(x):
    if isinstance(x, str):
        x = [p for p in x.split(",") if p.strip()]
    return tuple(int(p) for p in x)


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameters of one experiment run (flat key = value file format)."""
    experiment: str = "kernel-limit"
    n_list: tuple = (64, 128, 256)
    m: int = 1
    tau: tuple = (1.0, 1.0)
    s: float = 0.0
    grid: tuple = (-2.0, -1.0, -0.5, 0.5, 1.0, 2.0)
    precision_bits: int = DEFAULT_PREC
    rtol: float = 1e-10
    output_path: str = ""
    t: tuple = (0.01, 0.001)
    lam_list: tuple = (1.5,)
    outer_exponent: float = 0.4
    s0: float = 6.0
    s_min: float = -4.0
    s_max: float = 30.0
    ds: float = 0.25
    R: float = 60.0
    workers: int = 1

    _CONVERT = {"n_list": _ints, "tau": _floats, "grid": _floats, "t": _floats,
                "lam_list": _floats, "m": int, "precision_bits": int, "workers": int,
                "s": float, "rtol": float, "outer_exponent": float, "s0": float,
                "s_min": float, "s_max": float, "ds": float, "R": float,
                "experiment": str, "output_path": str}

    def __post_init__(self):
        for f in fields(self):
            conv = self._CONVERT[f.name]
            try:
                object.__setattr__(self, f.name, conv(getattr(self, f.name)))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {f.name}: {exc}") from None
        if len(self.tau) != 2 * self.m:
            raise ConfigError("tau must have length 2m")
        if self.tau[-1] < 0:
            raise ConfigError("tau_{2m} must be positive")
        if self.experiment == "kernel-limit" and any(x == 0 for x in self.grid):
            raise ConfigError("kernel grid must exclude 0")
        if self.precision_bits < 64:
            raise ConfigError("precision_bits must be at least 64")
        if any(n < 1 for n in self.n_list):
            raise ConfigError("n_list entries must be positive")

    @classmethod
    def keys(cls):
        return [f.name for f in fields(cls)]

    @classmethod
    def from_text(cls, text, **overrides):
        vals = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key = value")
            k, v = (p.strip() for p in line.split("=", 1))
            if k not in cls._CONVERT:
                raise ConfigError(f"line {lineno}: unknown key {k!r}")
            vals[k] = v
        for k, v in overrides.items():
            if v is None:
                continue
            if k not in cls._CONVERT:
                raise ConfigError(f"unknown key {k!r}")
            vals[k] = v
        return cls(**vals)

    @classmethod
    def from_file(cls, path, **overrides):
        with open(path) as fh:
            return cls.from_text(fh.read(), **overrides)


@dataclass
class ReportRow:
    labels: dict
    finite_value: float
    limit_value: float
    abs_error: float = field(init=False)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.finite_value = float(self.finite_value)
        self.limit_value = float(self.limit_value)
        self.abs_error = abs(self.finite_value - self.limit_value)

    def as_record(self):
        rec = {c: "" for c in COLUMNS}
        rec.update({k: _fmt(v) for k, v in self.labels.items()})
        rec.update({k: _fmt(v) for k, v in self.meta.items() if k in COLUMNS})
        rec["finite_value"] = repr(self.finite_value)
        rec["limit_value"] = repr(self.limit_value)
        rec["abs_error"] = repr(self.abs_error)
        return rec


def _fmt(v):
    if isinstance(v, (tuple, list)):
        return ";".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def rows_to_csv(rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r.as_record())
    return buf.getvalue()


def csv_to_records(text):
    """Parse CSV written by ``rows_to_csv`` back to dicts with float values."""
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        for k in ("finite_value", "limit_value", "abs_error"):
            rec[k] = float(rec[k])
        out.append(rec)
    return out


def write_report(rows, path):
    with open(path, "w") as fh:
        fh.write(rows_to_csv(rows))


def _base_labels(cfg, n, s=None):
    return {"experiment": cfg.experiment, "n": n, "m": cfg.m,
            "s": cfg.s if s is None else s, "tau": cfg.tau}


def _meta(cfg, t0):
    return {"precision_bits": cfg.precision_bits, "rtol": cfg.rtol,
            "wall_ms": int(round(1000 * (time.time() - t0)))}


def _map(cfg, fn, args):
    if cfg.workers > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            return list(ex.map(fn, args))
    return [fn(a) for a in args]


def trajectory(cfg):
    tau = TauVector(cfg.tau)
    return pv.solve_pole_free(tau, cfg.s_min, cfg.s_max, s0=cfg.s0)


# ---------------------------------------------------------------------------
# kernel limit

def finite_kernel(n, s, tau, grid, prec):
    """(1/c) K_n(lam + u/c, lam + v/c), c = 2 n^{2/3}, on grid x grid."""
    spec = ensemble_from_tau(n, s, tau, prec)
    table = op.stieltjes(spec, n, op.build_grid(spec))
    with precision(prec):
        c = 2 * gmpy2.cbrt(mpfr(n)) ** 2
        xs = [spec.lam + mpfr(u) / c for u in grid]
        vals = [op.orthonormal_values(table, x, deriv=True) for x in xs]
        w = [weight_w(spec, x) for x in xs]
        sbn = gmpy2.sqrt(table.beta[n])
        K = np.empty((len(grid), len(grid)))
        for i, (pi, dpi) in enumerate(vals):
            for j, (pj, _) in enumerate(vals):
                if i == j:
                    k = w[i] * sbn * (dpi[n] * pi[n - 1] - dpi[n - 1] * pi[n])
                else:
                    num = pi[n] * pj[n - 1] - pi[n - 1] * pj[n]
                    k = gmpy2.sqrt(w[i] * w[j]) * sbn * num / (xs[i] - xs[j])
                K[i, j] = float(k / c)
    return K


def _kernel_job(a):
    n, s, tau, grid, prec = a
    t0 = time.time()
    return finite_kernel(n, s, tau, grid, prec), time.time() - t0


def limit_kernel(cfg):
    tau = TauVector(cfg.tau)
    if tau.is_zero():
        coeffs = psi.LaxCoefficients.airy(cfg.s, cfg.m)
    else:
        coeffs = psi.LaxCoefficients.from_state(trajectory(cfg).state(cfg.s))
    R = max([cfg.R] + [psi.default_radius(cfg.s, x) for x in cfg.grid])
    return psi.kernel_matrix(coeffs, cfg.grid, R=R, rtol=max(cfg.rtol, 1e-12))


def cmd_kernel_limit(cfg):
    t0 = time.time()
    Kp = limit_kernel(cfg)
    jobs = [(n, cfg.s, cfg.tau, cfg.grid, cfg.precision_bits) for n in cfg.n_list]
    rows = []
    for n, (Kn, dt) in zip(cfg.n_list, _map(cfg, _kernel_job, jobs)):
        meta = _meta(cfg, time.time() - dt)
        for i, u in enumerate(cfg.grid):
            for j, v in enumerate(cfg.grid):
                rows.append(ReportRow({**_base_labels(cfg, n), "u": u, "v": v},
                                      Kn[i, j], Kp[i, j], meta))
        k = np.unravel_index(np.argmax(np.abs(Kn - Kp)), Kn.shape)
        rows.append(ReportRow({**_base_labels(cfg, n), "u": "*", "v": "*"},
                              Kn[k], Kp[k], meta))
    return rows


def grid_max_errors(rows):
    """{n: e_n} from the summary rows of a kernel report."""
    return {int(r.labels["n"]): r.abs_error for r in rows if r.labels.get("u") == "*"}


# ---------------------------------------------------------------------------
# partition function

def _lnz_job(a):
    n, s, tau, prec = a
    spec = ensemble_from_tau(n, s, tau, prec)
    table = op.stieltjes(spec, n, op.build_grid(spec))
    with precision(prec):
        return float(op.partition_Zn(table) - op.zn_gue(n, prec))


def cmd_partition_limit(cfg):
    """finite = ln Z_n - ln Z_n^GUE - 2 n^{1/3} tau_1, limit = -I(s)."""
    t0 = time.time()
    tau = TauVector(cfg.tau)
    I = 0.0 if tau.is_zero() else pv.partition_integral(trajectory(cfg), cfg.s)
    jobs = [(n, cfg.s, cfg.tau, cfg.precision_bits) for n in cfg.n_list]
    rows = []
    for n, d in zip(cfg.n_list, _map(cfg, _lnz_job, jobs)):
        fin = d - 2 * n ** (1 / 3) * tau[0]
        rows.append(ReportRow(_base_labels(cfg, n), fin, -I, _meta(cfg, t0)))
    return rows


def _outer_job(a):
    n, tau, expo, prec = a
    with precision(prec):
        lam = 1 + mpfr(n) ** (-mpfr(expo))
        t = t_from_tau(n, lam, tau, prec)
        spec = EnsembleSpec(n, lam, t, prec)
        table = op.stieltjes(spec, n, op.build_grid(spec))
        d = op.partition_Zn(table) - op.zn_gue(n, prec)
        lim = 2 * mpfr(n) ** 2 * t[0] / (lam + gmpy2.sqrt(lam * lam - 1))
        return float(lam), float(d), float(lim), float(s_of_lambda(n, lam, prec))


def outer_bound_shape(n, lam):
    """n^{-1/3} (lam - 1)^{-1/2}."""
    return n ** (-1 / 3) * (lam - 1) ** -0.5


def cmd_outer_partition(cfg):
    """finite = ln Z_n - ln Z_n^GUE, limit = 2 n^2 t_1 / (lam + sqrt(lam^2 - 1))."""
    t0 = time.time()
    jobs = [(n, cfg.tau, cfg.outer_exponent, cfg.precision_bits) for n in cfg.n_list]
    rows = []
    for n, (lam, d, lim, s) in zip(cfg.n_list, _map(cfg, _outer_job, jobs)):
        rows.append(ReportRow({**_base_labels(cfg, n, s), "u": lam}, d, lim, _meta(cfg, t0)))
    return rows


def outer_ratios(rows):
    """{n: error / (n^{-1/3} (lam - 1)^{-1/2})} for an outer-partition report."""
    return {int(r.labels["n"]): r.abs_error / outer_bound_shape(int(r.labels["n"]),
                                                                float(r.labels["u"]))
            for r in rows}


# ---------------------------------------------------------------------------
# differential identities

def identity_values(n, lam, t, prec):
    """((fd1, rhs1), (fd2, rhs2)) for the two lambda identities."""
    spec = EnsembleSpec(n, lam, t, prec)
    grid = op.build_grid(spec)
    table = op.recurrence_at(spec, grid)
    with precision(prec):
        r1 = op.dlogZ_dlambda(spec, table)
        f1 = op.fd_dlogZ(spec, grid)
        f2 = op.fd_d2logZ(spec, grid)
        r2 = op.identity2_rhs(spec, op.y_edge(spec, table, grid))
        return (f1, r1), (f2, r2)


def _ident_job(a):
    return a, identity_values(*a)


def cmd_identities(cfg):
    """u = lam, v = identity index; finite = finite difference, limit = right side."""
    t0 = time.time()
    if any(n > 8 for n in cfg.n_list):
        raise ConfigError("identities are run for n <= 8")
    jobs = [(n, lam, cfg.t, cfg.precision_bits) for n in cfg.n_list for lam in cfg.lam_list]
    rows = []
    for (n, lam, t, prec), pairs in _map(cfg, _ident_job, jobs):
        s = float(s_of_lambda(n, lam, prec))
        for k, (fd, rhs) in enumerate(pairs, 1):
            row = ReportRow({"experiment": cfg.experiment, "n": n, "m": len(t) // 2, "s": s,
                             "tau": t, "u": lam, "v": k}, fd, rhs, _meta(cfg, t0))
            row.meta["relative_error"] = float(abs(fd - rhs) / max(abs(rhs), mpfr("1e-300")))
            rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# b_1 cross-check

def _b1_job(a):
    n, s, tau, prec = a
    lam = lambda_of_sloc(n, s, prec)
    b, sloc = op.b1_oracle(n, lam, tau, prec, window=None)
    return float(b), float(sloc)


def cmd_b1_crosscheck(cfg):
    """finite = b1_oracle at lam with n^{2/3} f(lam) = s, limit = b_1(s)."""
    t0 = time.time()
    tau = TauVector(cfg.tau)
    tr = None if tau.is_zero() else trajectory(cfg)
    jobs = [(n, s, cfg.tau, cfg.precision_bits) for n in cfg.n_list for s in cfg.grid]
    rows = []
    for (n, s, _, _), (b, sloc) in zip(jobs, _map(cfg, _b1_job, jobs)):
        lim = 0.0 if tr is None else tr.b(sloc)
        rows.append(ReportRow(_base_labels(cfg, n, s), b, lim, _meta(cfg, t0)))
    return rows


COMMANDS = {"kernel-limit": cmd_kernel_limit, "partition-limit": cmd_partition_limit,
            "identities": cmd_identities, "outer-partition": cmd_outer_partition,
            "b1-crosscheck": cmd_b1_crosscheck}


def run(cfg):
    if cfg.experiment not in COMMANDS:
        raise ConfigError(f"unknown experiment {cfg.experiment!r}")
    return COMMANDS[cfg.experiment](cfg)


# ---------------------------------------------------------------------------
# dumps

def painleve_table(cfg):
    """Rows (s, b_1..b_K, a_1, max first-integral residual) from s_max down to s_min."""
    tr = trajectory(cfg)
    n_pts = int(round((cfg.s_max - cfg.s_min) / cfg.ds)) + 1
    out = []
    for s in np.linspace(cfg.s_max, cfg.s_min, n_pts):
        x = tr.vector(s)
        out.append([float(s)] + list(x[:tr.K]) + [tr.a1(s),
                                                  float(np.max(tr.first_integral_residual(s)))])
    header = ["s"] + [f"b_{k}" for k in range(1, tr.K + 1)] + ["a1", "integral_drift"]
    return header, out


def recurrence_rows(cfg):
    """Rows (k, alpha_k, beta_k, gamma_k, p1_k) at n = n_list[0], lam from s."""
    n = cfg.n_list[0]
    spec = ensemble_from_tau(n, cfg.s, cfg.tau, cfg.precision_bits)
    tab = op.stieltjes(spec, n, op.build_grid(spec))
    rows = []
    for k in range(tab.N + 1):
        a = tab.alpha[k] if k < len(tab.alpha) else float("nan")
        rows.append([k, float(a), float(tab.beta[k]), float(tab.gamma[k]), float(tab.p1[k])])
    return ["k", "alpha", "beta", "gamma", "p1"], rows


def table_to_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, float) else x for x in r])
    return buf.getvalue()
