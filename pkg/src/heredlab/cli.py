"""``heredlab`` command line: certify, solve, reduce, spectrum and modulus.

Every command prints a summary (aligned text, or JSON with ``--json``) and,
with ``--output DIR``, writes its artifacts there: a ``summary.json`` plus CSV
tables. JSON is deterministic: keys sorted, floats with 17 significant digits.
Each summary embeds the run configuration, which parses back into the same
:class:`RunConfig`.

Exit codes: 0 success, 2 invalid input, 3 divergence or non-contractive
problem, 4 non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from contextlib import nullcontext
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .cards import load_material
from .errors import (
    ConfigurationError,
    DivergenceError,
    HeredlabError,
    NonConvergenceError,
    NotContractiveError,
)
from .history import (
    HistoryGrid,
    LaguerreBasis,
    assemble_S,
    compare_sls_eigenvalues,
    singular_system,
    truncate,
    weighted_operator_norm,
)
from .material import ScalarMaterial, Weight, complex_modulus, eval_kernel
from .spectra import (
    admissibility_constant,
    atomize,
    class_membership,
    class_nwidth,
    kernel_distance,
    kernel_from_measure,
    load_measure,
    prony_from_density,
    sls_class_integrals,
)
from .volterra import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    Evolution,
    TimeGrid,
    a_priori_holds,
    solve_direct,
    solve_picard,
    stress_from_strain,
    weighted_norm,
)
from .wellposed import certify

COMMANDS = ("certify", "solve", "reduce", "spectrum", "modulus")


# --- deterministic serialization ------------------------------------------------------------


def _format_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with sorted keys and 17-significant-digit floats."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in sorted(obj.items())]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist(), indent, _level)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _format_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_csv(path_or_buf, header: list[str], columns: list) -> None:
    """Columns of equal length as CSV with a header row."""
    cols = [np.asarray(c, dtype=float) for c in columns]
    own = isinstance(path_or_buf, (str, Path))
    fh = open(path_or_buf, "w", newline="") if own else path_or_buf
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in zip(*cols):
            writer.writerow([_format_float(float(v)) for v in row])
    finally:
        if own:
            fh.close()


def read_evolution_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Two-column ``t, value`` CSV with a header row."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}", problems=[str(exc)]) from exc
    problems = []
    if len(rows) < 3:
        raise ConfigurationError(f"{path}: need a header and at least two data rows")
    t, v = [], []
    for i, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            problems.append(f"line {i}: expected 2 columns, got {len(row)}")
            continue
        try:
            t.append(float(row[0]))
            v.append(float(row[1]))
        except ValueError:
            problems.append(f"line {i}: non-numeric entry {row!r}")
    if problems:
        if len(problems) > 10:
            problems = problems[:10] + [f"... and {len(problems) - 10} more"]
        raise ConfigurationError(f"invalid evolution CSV {path}", problems=problems)
    t, v = np.array(t), np.array(v)
    if t[0] != 0.0:
        raise ConfigurationError(f"{path}: time must start at 0, got {t[0]!r}")
    return t, v


# --- configuration --------------------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    command: str
    material: str | None = None
    measure: str | None = None
    lambda0: float | None = None
    method: str = "auto"
    require_contractive: bool = False
    input: str | None = None
    mode: str = "custom"
    stress: float = 1.0
    T: float | None = None
    steps: int = 1000
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    grid: int = 400
    rank: int | None = None
    basis: str = "svd"
    to_prony: int | None = None
    tolerance: float | None = None
    distance: str | None = None
    class_check: str | None = None
    modulus: float = 1.0
    omega: tuple[float, ...] = ()
    omega_range: tuple[float, float, int] | None = None
    output: str | None = None
    json: bool = False
    plot: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["omega"] = list(self.omega)
        d["omega_range"] = list(self.omega_range) if self.omega_range else None
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigurationError(f"unknown configuration keys {sorted(unknown)}")
        d = dict(data)
        d["omega"] = tuple(d.get("omega") or ())
        if d.get("omega_range") is not None:
            lo, hi, n = d["omega_range"]
            d["omega_range"] = (float(lo), float(hi), int(n))
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        """Collect every problem before any computation starts."""
        p: list[str] = []
        if self.command not in COMMANDS:
            p.append(f"unknown command {self.command!r}")
        needs_material = self.command in ("certify", "solve", "reduce", "modulus")
        if needs_material and not self.material:
            p.append("--material is required")
        for name in ("material", "measure", "input", "distance", "class_check"):
            path = getattr(self, name)
            if path and not Path(path).is_file():
                p.append(f"--{name.replace('_', '-')}: file not found: {path}")
        if self.lambda0 is not None and not (math.isfinite(self.lambda0) and self.lambda0 >= 0):
            p.append(f"--lambda0 must be finite and >= 0, got {self.lambda0!r}")
        if self.method not in ("auto", "closed-form", "quadrature", "direct", "picard"):
            p.append(f"unknown method {self.method!r}")
        if self.command == "solve":
            if self.mode not in ("creep", "custom"):
                p.append(f"--mode must be creep or custom, got {self.mode!r}")
            if self.mode == "custom" and not self.input:
                p.append("--mode custom needs --input sigma.csv")
            if self.mode == "creep" and (self.T is None or not self.T > 0):
                p.append("--mode creep needs --T > 0")
            if self.method not in ("direct", "picard"):
                p.append("solve --method must be direct or picard")
            if self.steps < 1:
                p.append("--steps must be >= 1")
            if not (self.tol > 0 and self.max_iter >= 1):
                p.append("--tol must be > 0 and --max-iter >= 1")
        if self.command == "reduce":
            if self.T is None or not self.T > 0:
                p.append("reduce needs --T > 0")
            if self.grid < 2:
                p.append("--grid must be >= 2")
            if self.rank is None or self.rank < 0:
                p.append("reduce needs --rank >= 0")
            elif self.rank > self.grid + 1:
                p.append(f"--rank {self.rank} exceeds the {self.grid + 1} grid nodes")
            if self.basis not in ("svd", "laguerre"):
                p.append("--basis must be svd or laguerre")
            if self.basis == "laguerre" and not (self.lambda0 or 0) > 0:
                p.append("--basis laguerre needs --lambda0 > 0")
        if self.command == "spectrum":
            if not self.measure:
                p.append("--measure is required")
            chosen = [x for x in (self.to_prony, self.distance, self.class_check) if x is not None]
            if len(chosen) > 1:
                p.append("choose one of --to-prony, --distance, --class-check")
            if self.to_prony is not None and self.to_prony < 1:
                p.append("--to-prony must be >= 1")
            if self.tolerance is not None and not self.tolerance > 0:
                p.append("--tolerance must be > 0")
            if self.class_check and (self.rank is None or self.rank < 0):
                p.append("--class-check needs --rank >= 0")
            if self.class_check and (self.T is None or not self.T > 0):
                p.append("--class-check needs --T > 0")
            if not self.modulus > 0:
                p.append("--modulus must be > 0")
        if self.command == "modulus":
            if not self.omega and self.omega_range is None:
                p.append("modulus needs --omega or --omega-range")
            if any(not (w >= 0) for w in self.omega):
                p.append("frequencies must be >= 0")
            if self.omega_range is not None:
                lo, hi, n = self.omega_range
                if not (0 < lo < hi and n >= 2):
                    p.append("--omega-range needs 0 < lo < hi and count >= 2")
        if self.plot and not self.output:
            p.append("--plot writes figures into --output DIR")
        if p:
            raise ConfigurationError("invalid run configuration", problems=p)


# --- argument parsing -----------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="heredlab",
        description="Linear viscoelastic hereditary operators: certify, solve, reduce.",
    )
    ap.add_argument("--version", action="version", version=f"heredlab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, material=True):
        if material:
            p.add_argument("--material", required=True, help="material card (JSON)")
        p.add_argument("--json", action="store_true", help="print the summary as JSON")
        p.add_argument("--output", metavar="DIR", help="write summary.json and CSV tables here")
        p.add_argument("--plot", action="store_true", help="also render PNG figures into --output")

    p = sub.add_parser("certify", help="contractivity and Hilbert-Schmidt certificate")
    common(p)
    p.add_argument("--lambda0", type=float, default=0.0, help="weight decay rate")
    p.add_argument("--method", choices=["auto", "closed-form", "quadrature"], default="auto")
    p.add_argument("--require-contractive", action="store_true", help="exit 3 unless gamma < 1")

    p = sub.add_parser("solve", help="solve the stress-control problem for the strain")
    common(p)
    p.add_argument("--input", help="stress history CSV (t, value) for --mode custom")
    p.add_argument("--mode", choices=["creep", "custom"], default="custom")
    p.add_argument("--method", choices=["direct", "picard"], default="direct")
    p.add_argument("--lambda0", type=float, default=0.0)
    p.add_argument("--stress", type=float, default=1.0, help="creep stress level")
    p.add_argument("--T", type=float, help="creep horizon")
    p.add_argument("--steps", type=int, default=1000, help="creep time steps")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    p.add_argument("--require-contractive", action="store_true")

    p = sub.add_parser("reduce", help="singular system and rank-N reduction of the history operator")
    common(p)
    p.add_argument("--lambda0", type=float, default=0.0)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--grid", type=int, default=400, help="trapezoid intervals on [0, T]")
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--basis", choices=["svd", "laguerre"], default="svd")

    p = sub.add_parser("spectrum", help="relaxation measures: atomize, compare, class check")
    common(p, material=False)
    p.add_argument("--measure", required=True, help="measure JSON")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--to-prony", type=int, metavar="N", help="atomize the density with N atoms")
    g.add_argument("--distance", metavar="OTHER", help="kernel distance to another measure")
    g.add_argument("--class-check", metavar="CARD", help="membership in the class bounded by CARD")
    p.add_argument("--tolerance", type=float, help="with --to-prony: refine up to N atoms until within tolerance")
    p.add_argument("--lambda0", type=float, help="weight decay rate (default: the measure cutoff)")
    p.add_argument("--modulus", type=float, default=1.0, help="instantaneous modulus normalizing distances")
    p.add_argument("--rank", type=int, help="with --class-check: width index N")
    p.add_argument("--T", type=float, help="with --class-check: history horizon")
    p.add_argument("--grid", type=int, default=400)

    p = sub.add_parser("modulus", help="storage and loss moduli")
    common(p)
    p.add_argument("--omega", type=float, nargs="+", default=[])
    p.add_argument("--omega-range", type=float, nargs=3, metavar=("LO", "HI", "COUNT"))
    return ap


def config_from_args(argv=None) -> RunConfig:
    ns = vars(_parser().parse_args(argv))
    if "max_iter" in ns:
        ns["max_iter"] = ns.pop("max_iter")
    if ns.get("omega") is not None:
        ns["omega"] = tuple(ns["omega"])
    if ns.get("omega_range") is not None:
        lo, hi, n = ns["omega_range"]
        if n != int(n):
            raise ConfigurationError("--omega-range COUNT must be an integer")
        ns["omega_range"] = (lo, hi, int(n))
    known = {f.name for f in fields(RunConfig)}
    cfg = RunConfig(**{k: v for k, v in ns.items() if k in known and v is not None})
    cfg.validate()
    return cfg


# --- commands -------------------------------------------------------------------------------


class _Result:
    def __init__(self, summary: dict, exit_code: int = 0):
        self.summary = summary
        self.exit_code = exit_code
        self.tables: dict[str, tuple[list[str], list]] = {}
        self.figures: list = []


def run_certify(cfg: RunConfig) -> _Result:
    material = load_material(cfg.material)
    k, m = material.kernel, material.moduli
    w = Weight(cfg.lambda0 or 0.0)
    cert = certify(k, m, w, cfg.method)
    laws = []
    for law in material.laws():
        lc = certify(law.kernel, law.moduli, w)
        laws.append({"law": law.name, "multiplicity": law.multiplicity, "gamma": lc.gamma,
                     "hs_constant": lc.hs_constant, "modulus": law.moduli.instantaneous})
    summary = {"certificate": cert.to_dict(), "laws": laws}
    res = _Result(summary)
    if cfg.require_contractive and not cert.contractive:
        res.exit_code = NotContractiveError.exit_code
    return res


def _stress_input(cfg: RunConfig):
    if cfg.mode == "creep":
        grid = TimeGrid.uniform(cfg.T, cfg.steps)
        return grid, np.full(len(grid), cfg.stress)
    t, v = read_evolution_csv(cfg.input)
    try:
        grid = TimeGrid(t)
    except HeredlabError as exc:
        raise ConfigurationError(f"invalid time column in {cfg.input}", problems=[str(exc)]) from exc
    return grid, v


def run_solve(cfg: RunConfig) -> _Result:
    material = load_material(cfg.material)
    grid, sigma = _stress_input(cfg)
    w = Weight(cfg.lambda0 or 0.0)
    laws_out, columns, header = [], [grid.nodes], ["t"]
    for law in material.laws():
        C = law.moduli.instantaneous
        stress = Evolution(grid, sigma, "stress")
        try:
            cert = certify(law.kernel, law.moduli, w)
        except DivergenceError:
            # the direct solver needs no certificate; Picard and --require-contractive do
            if cfg.method == "picard" or cfg.require_contractive:
                raise
            cert = None
        if cfg.require_contractive:
            cert.require_contractive()
        if cfg.method == "picard":
            report = solve_picard(law.kernel, C, stress, cfg.tol, cfg.max_iter, w, cert)
            strain = report.solution
            info = report.to_dict()
        else:
            strain = solve_direct(law.kernel, C, stress)
            back = stress_from_strain(law.kernel, C, strain).values
            scale = max(float(np.max(np.abs(sigma))), np.finfo(float).tiny)
            en, sn = weighted_norm(strain, w, C), weighted_norm(stress, w, C)
            g = cert.gamma if cert is not None else math.inf
            info = {
                "iterations": 1,
                "gamma_used": g,
                "bound_check": a_priori_holds(en, sn, g),
                "converged": True,
                "lambda0": w.decay_rate,
                "strain_norm": en,
                "stress_norm": sn,
                "max_residual": float(np.max(np.abs(back - sigma))) / scale,
            }
        info.update({"law": law.name, "multiplicity": law.multiplicity, "modulus": C,
                     "contractive": cert is not None and cert.contractive, "final_strain": float(strain.values[-1])})
        laws_out.append(info)
        header.append(f"strain_{law.name}")
        columns.append(strain.values)
    res = _Result({"method": cfg.method, "mode": cfg.mode, "steps": len(grid) - 1,
                   "horizon": grid.horizon, "laws": laws_out})
    res.tables["strain.csv"] = (header, columns)
    res.figures.append(("strain.png", "series", dict(
        x=grid.nodes, series={h: c for h, c in zip(header[1:], columns[1:])},
        xlabel="t", ylabel="strain")))
    return res


def _reduce_law(cfg: RunConfig, law, w: Weight) -> tuple[dict, dict]:
    C = law.moduli.instantaneous
    grid = HistoryGrid.trapezoid(cfg.T, cfg.grid, w)
    op = assemble_S(law.kernel, C, grid)
    system = singular_system(op)
    N = min(cfg.rank, len(system))
    s = system.values
    out = {
        "law": law.name,
        "multiplicity": law.multiplicity,
        "modulus": C,
        "rank_requested": cfg.rank,
        "numerical_rank": system.rank,
        "operator_norm": float(s[0]) if s.size else 0.0,
        "hs_norm": op.hs_norm(),
        "optimal_error": class_nwidth(system, N),
    }
    tables = {}
    k = np.arange(1, s.size + 1)
    errors = [class_nwidth(system, j) for j in range(s.size)]
    tables["singular_values"] = (["k", "s_k", "mu_k", "truncation_error"], [k, s, s**2, errors])
    if cfg.basis == "svd":
        trunc = truncate(op, N, system)
        out["truncation_error"] = trunc.error_norm(op)
        phi, psi = system.phi[:N], system.psi[:N]
    else:
        basis = LaguerreBasis(w.decay_rate, max(N, 1))
        raw = basis(grid.nodes)[:N]
        # orthonormalize on the discrete grid so the projector is exact there
        r = np.sqrt(grid.measure)
        if N:
            q, _ = np.linalg.qr((raw * r[None, :]).T)
            onb = (q / r[:, None]).T
            proj = onb.T @ (onb * grid.measure[None, :])
            err = weighted_operator_norm(op.matrix - op.matrix @ proj, grid)
        else:
            err = weighted_operator_norm(op.matrix, grid)
        out["truncation_error"] = err
        out["laguerre_gram_deviation"] = float(
            np.max(np.abs(grid.inner(raw[:, None, :], raw[None, :, :]) - np.eye(N)))
        ) if N else 0.0
        phi = raw
        psi = phi @ op.matrix.T
    tables["phi"] = (["tau"] + [f"phi_{j + 1}" for j in range(N)], [grid.nodes, *phi])
    tables["psi"] = (["tau"] + [f"psi_{j + 1}" for j in range(N)], [grid.nodes, *psi])

    kern = law.kernel
    if kern.measure is None and len(kern.modes) == 1:
        C1, lam1 = kern.modes[0].stiffness, kern.modes[0].rate
        if w.decay_rate < 2 * lam1:
            count = int(min(5, max(N, 1), system.rank))
            if count > 0:
                cmp = compare_sls_eigenvalues(law.moduli.equilibrium, C1, lam1, w.decay_rate, cfg.T, cfg.grid - cfg.grid % 2, count)
                out["sls_comparison"] = [c.to_dict() for c in cmp]
    return out, tables


def run_reduce(cfg: RunConfig) -> _Result:
    material = load_material(cfg.material)
    w = Weight(cfg.lambda0 or 0.0)
    laws_out = []
    res = _Result({})
    for law in material.laws():
        info, tables = _reduce_law(cfg, law, w)
        laws_out.append(info)
        for name, table in tables.items():
            res.tables[f"{law.name}_{name}.csv"] = table
        res.figures.append((f"{law.name}_singular_values.png", "singular", dict(
            values=tables["singular_values"][1][1], rank=cfg.rank)))
    res.summary = {"horizon": cfg.T, "grid": cfg.grid, "basis": cfg.basis, "lambda0": w.decay_rate,
                   "laws": laws_out}
    return res


def run_spectrum(cfg: RunConfig) -> _Result:
    nu = load_measure(cfg.measure)
    w = Weight(nu.cutoff if cfg.lambda0 is None else cfg.lambda0)
    kern = kernel_from_measure(nu)
    summary: dict = {
        "measure": nu.to_dict(),
        "lambda0_weight": w.decay_rate,
        "total_mass": nu.total_mass,
        "admissibility_constant": admissibility_constant(nu, w),
        "kernel_at_zero": eval_kernel(kern, 0.0),
        "modulus": cfg.modulus,
    }
    res = _Result(summary)
    if cfg.to_prony is not None:
        if cfg.tolerance is not None:
            rep = atomize(nu, cfg.tolerance, cfg.modulus, w, max_atoms=cfg.to_prony)
            summary["atomization"] = rep.to_dict()
            atomic = rep.measure
        else:
            atomic = prony_from_density(nu, cfg.to_prony)
            summary["atomization"] = {
                "atoms": cfg.to_prony,
                "distance": kernel_distance(kernel_from_measure(atomic), kern, cfg.modulus, w),
                "measure": atomic.to_dict(),
            }
        lam = np.array([a for a, _ in atomic.atoms])
        mass = np.array([b for _, b in atomic.atoms])
        res.tables["atoms.csv"] = (["lambda", "mass"], [lam, mass])
    elif cfg.distance is not None:
        other = load_measure(cfg.distance)
        summary["distance"] = kernel_distance(kern, kernel_from_measure(other), cfg.modulus, w)
        summary["other"] = other.to_dict()
    elif cfg.class_check is not None:
        bound = load_material(cfg.class_check)
        if not isinstance(bound, ScalarMaterial):
            raise ConfigurationError("--class-check needs a scalar bounding material card")
        C = bound.modulus
        grid = HistoryGrid.trapezoid(cfg.T, cfg.grid, w)
        op = assemble_S(bound.kernel, C, grid)
        system = singular_system(op)
        mem = class_membership(kern, system, C)
        N = cfg.rank
        summary["class_check"] = {
            "bounding_modulus": C,
            "membership": mem.to_dict(),
            "nwidth": class_nwidth(system, N),
            "truncation_error": truncate(op, min(N, len(system)), system).error_norm(op),
            "rank": N,
        }
        bk = bound.kernel
        if bk.measure is None and len(bk.modes) == 1 and w.decay_rate < bk.modes[0].rate and nu.cutoff == w.decay_rate:
            summary["class_check"]["sls_integrals"] = [
                sls_class_integrals(nu, bound.moduli.equilibrium, bk.modes[0].stiffness,
                                    bk.modes[0].rate, cfg.T, j, direct=False).to_dict()
                for j in range(1, 4)
            ]
    tau = np.linspace(0.0, 5.0 / max(kern.min_rate, 1e-12) if not kern.is_zero else 1.0, 201)
    res.tables["kernel.csv"] = (["tau", "K"], [tau, eval_kernel(kern, tau)])
    res.figures.append(("kernel.png", "series", dict(x=tau, series={"K": eval_kernel(kern, tau)},
                                                     xlabel="tau", ylabel="K(tau)")))
    return res


def run_modulus(cfg: RunConfig) -> _Result:
    material = load_material(cfg.material)
    omegas = list(cfg.omega)
    if cfg.omega_range is not None:
        lo, hi, n = cfg.omega_range
        omegas += list(np.geomspace(lo, hi, n))
    header, columns, laws_out = ["omega"], [np.array(omegas)], []
    for law in material.laws():
        vals = [complex_modulus(law.kernel, law.moduli.equilibrium, om) for om in omegas]
        storage = np.array([v.storage for v in vals])
        loss = np.array([v.loss for v in vals])
        laws_out.append({"law": law.name, "multiplicity": law.multiplicity,
                         "points": [{"omega": v.omega, "storage": v.storage, "loss": v.loss} for v in vals]})
        header += [f"storage_{law.name}", f"loss_{law.name}"]
        columns += [storage, loss]
    res = _Result({"laws": laws_out})
    res.tables["modulus.csv"] = (header, columns)
    positive = np.array(omegas) > 0
    if positive.sum() >= 2:
        order = np.argsort(np.array(omegas)[positive])
        series = {h: np.asarray(c)[positive][order] for h, c in zip(header[1:], columns[1:])}
        res.figures.append(("modulus.png", "series", dict(
            x=np.array(omegas)[positive][order], series=series, xlabel="omega", ylabel="modulus", logx=True)))
    return res


_RUNNERS = {
    "certify": run_certify,
    "solve": run_solve,
    "reduce": run_reduce,
    "spectrum": run_spectrum,
    "modulus": run_modulus,
}


# --- output ---------------------------------------------------------------------------------


def _text_table(summary: dict, prefix: str = "") -> list[tuple[str, str]]:
    rows = []
    for key in sorted(summary):
        val = summary[key]
        name = f"{prefix}{key}"
        if isinstance(val, dict):
            rows += _text_table(val, name + ".")
        elif isinstance(val, list) and val and isinstance(val[0], dict):
            for i, item in enumerate(val):
                rows += _text_table(item, f"{name}[{i}].")
        elif isinstance(val, list) and len(val) > 8:
            rows.append((name, f"[{len(val)} values]"))
        elif isinstance(val, float):
            rows.append((name, f"{val:.10g}"))
        else:
            rows.append((name, str(val)))
    return rows


def render_text(summary: dict) -> str:
    rows = [r for r in _text_table(summary) if not r[0].startswith("config.")]
    width = max((len(k) for k, _ in rows), default=0)
    return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows) + "\n"


def _emit(cfg: RunConfig, res: _Result, stdout) -> None:
    summary = dict(res.summary)
    summary["config"] = cfg.to_dict()
    text = dumps(summary) + "\n"
    if cfg.output:
        out = Path(cfg.output)
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.json").write_text(text)
        for name, (header, cols) in res.tables.items():
            write_csv(out / name, header, cols)
        if cfg.plot:
            from . import plotting

            for name, kind, kw in res.figures:
                if kind == "series":
                    plotting.plot_series(path=out / name, **kw)
                else:
                    plotting.plot_singular_values(path=out / name, **kw)
    stdout.write(text if cfg.json else render_text(summary))


def _thread_limit():
    raw = os.environ.get("HEREDLAB_THREADS")
    if raw is None or raw.strip() == "":
        return nullcontext()
    try:
        n = int(raw)
        if n < 1:
            raise ValueError
    except ValueError:
        raise ConfigurationError(f"HEREDLAB_THREADS must be a positive integer, got {raw!r}") from None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def run(cfg: RunConfig, stdout=None) -> int:
    """Execute one configured command; returns the process exit status."""
    stdout = stdout or sys.stdout
    cfg.validate()
    with _thread_limit():
        res = _RUNNERS[cfg.command](cfg)
    _emit(cfg, res, stdout)
    return res.exit_code


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv)
        return run(cfg)
    except NonConvergenceError as exc:
        sys.stderr.write(f"heredlab: {exc}\n")
        if exc.report is not None:
            sys.stderr.write(dumps(exc.report.to_dict()) + "\n")
        return exc.exit_code
    except NotContractiveError as exc:
        sys.stderr.write(f"heredlab: {exc}\n")
        if exc.certificate is not None:
            sys.stderr.write(dumps(exc.certificate.to_dict()) + "\n")
        return exc.exit_code
    except HeredlabError as exc:
        sys.stderr.write(f"heredlab: {exc}\n")
        return exc.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
