"""Experiment driver.

Usage::

    fracsource <experiment> --config cfg.json [--out DIR] [--verbose]

``<experiment>`` is one of eigen, mlf, direct, fd-direct, invert, roundtrip,
stability.  The JSON config schema is documented in the README; every
section except ``problem`` is optional.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.polynomial import Polynomial

from . import catalog
from .direct import ProblemSpec, energy, homogeneous_energy, solve_direct, synthetic_energy
from .errors import ConfigError, FracSourceError
from .fdoracle import FdGrid, fd_energy, solve_fd
from .fracops import SampledFunction
from .inverse import InverseInput, c1_norm, solve_inverse, validate_assumptions
from .mlf import mittag_leffler
from .spectral import BoundaryConstants, compute_eigenmodes

log = logging.getLogger("fracsource")

EXPERIMENTS = ("eigen", "mlf", "direct", "fd-direct", "invert", "roundtrip", "stability")

PROBLEM_DEFAULTS = {"q": 0.5, "a": 1.0, "b": 0.0, "d": 1.0, "T": 1.0, "Nt": 256,
                    "n_modes": None, "quad_order": 16, "n0": 0}
TOLERANCE_DEFAULTS = {"tail_tol": 1e-4, "compat_tol": 1e-6, "denom_min": 1e-8}
NOISE_DEFAULTS = {"amplitudes": [1e-3, 1e-2], "k": 2, "kind": "sine", "seed": 0}
INVERSE_DEFAULTS = {"method": "consistent", "smoothing": None, "refine": 4}

# catalog case A: r = 1 + t^2, f = e^t x (1-x)^3, phi = 0
CASES = {
    "A": {
        "f": {"terms": [{"time": {"kind": "exp", "rate": 1.0}, "space": {"kind": "bump", "p": 1, "m": 3}}]},
        "phi": {"kind": "zero"},
        "r": {"kind": "poly", "coeffs": [1.0, 0.0, 1.0]},
    },
}


@dataclass
class ExperimentConfig:
    experiment: str
    problem: dict
    functions: dict = field(default_factory=dict)
    output_dir: str = "out"
    tolerances: dict = field(default_factory=dict)
    noise: dict = field(default_factory=dict)
    inverse: dict = field(default_factory=dict)
    fd: dict = field(default_factory=dict)
    mlf: dict = field(default_factory=dict)
    eigen: dict = field(default_factory=dict)
    base_dir: Path = field(default=Path("."), repr=False, compare=False)

    @classmethod
    def from_dict(cls, raw: dict, base_dir: Path | str = ".") -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        known = {"experiment", "problem", "functions", "case", "output_dir", "tolerances",
                 "noise", "inverse", "fd", "mlf", "eigen"}
        extra = set(raw) - known
        if extra:
            raise ConfigError(f"unknown config fields: {sorted(extra)}")
        exp = raw.get("experiment")
        if exp not in EXPERIMENTS:
            raise ConfigError(f"experiment: expected one of {EXPERIMENTS}, got {exp!r}")
        problem = _merge("problem", PROBLEM_DEFAULTS, raw.get("problem", {}))
        _check_problem(problem)
        functions = {}
        if "case" in raw:
            if raw["case"] not in CASES:
                raise ConfigError(f"case: unknown catalog case {raw['case']!r}")
            functions.update(copy.deepcopy(CASES[raw["case"]]))
        functions.update(copy.deepcopy(raw.get("functions", {})))
        bad = set(functions) - {"f", "phi", "r", "E"}
        if bad:
            raise ConfigError(f"functions: unknown entries {sorted(bad)}")
        cfg = cls(
            experiment=exp,
            problem=problem,
            functions=functions,
            output_dir=str(raw.get("output_dir", "out")),
            tolerances=_merge("tolerances", TOLERANCE_DEFAULTS, raw.get("tolerances", {})),
            noise=_merge("noise", NOISE_DEFAULTS, raw.get("noise", {})),
            inverse=_merge("inverse", INVERSE_DEFAULTS, raw.get("inverse", {})),
            fd=_merge("fd", {"Nx": 200, "starting": True}, raw.get("fd", {})),
            mlf=_merge("mlf", {"q": problem["q"], "beta": 1.0, "z_min": -10.0, "z_max": 0.0, "n": 101},
                       raw.get("mlf", {})),
            eigen=_merge("eigen", {"count": 20}, raw.get("eigen", {})),
            base_dir=Path(base_dir),
        )
        cfg._check_files()
        return cfg

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "problem": dict(self.problem),
            "functions": copy.deepcopy(self.functions),
            "output_dir": self.output_dir,
            "tolerances": dict(self.tolerances),
            "noise": copy.deepcopy(self.noise),
            "inverse": dict(self.inverse),
            "fd": dict(self.fd),
            "mlf": dict(self.mlf),
            "eigen": dict(self.eigen),
        }

    def _check_files(self) -> None:
        for name, entry in self.functions.items():
            if isinstance(entry, dict) and entry.get("kind") == "table":
                path = self.base_dir / entry.get("path", "")
                if not path.is_file():
                    raise ConfigError(f"functions.{name}.path: file {str(path)!r} does not exist")

    # ---- builders

    def constants(self) -> BoundaryConstants:
        p = self.problem
        return BoundaryConstants(float(p["a"]), float(p["b"]), float(p["d"]))

    def problem_spec(self) -> ProblemSpec:
        p = self.problem
        nt = int(p["Nt"])
        n_modes = p["n_modes"]
        if n_modes is None:
            n_modes = max(4, min(64, nt // 4))
        c = self.constants()
        phi = self._space("phi", self.functions.get("phi", {"kind": "zero"}), c, int(p["n0"]))
        f = self._source(self.functions.get("f", {"terms": []}), c, int(p["n0"]))
        return ProblemSpec(q=float(p["q"]), constants=c, T=float(p["T"]), Nt=nt, f=f, phi=phi,
                           n_modes=int(n_modes), quad_order=int(p["quad_order"]), n0=int(p["n0"]),
                           tail_tol=float(self.tolerances["tail_tol"]))

    def _space(self, label: str, entry: dict, c: BoundaryConstants, n0: int):
        kind = entry.get("kind")
        scale = float(entry.get("scale", 1.0))
        if kind == "zero":
            out = Polynomial([0.0])
        elif kind == "poly":
            out = scale * Polynomial(_floats(entry, "coeffs", label))
        elif kind == "bump":
            out = catalog.bump(int(entry.get("p", 3)), int(entry.get("m", 4)), scale)
        elif kind == "mode":
            k = int(entry.get("index", 0))
            modes = compute_eigenmodes(c, max(k, 4))
            return catalog.ModeShape(modes[k], scale)
        elif kind == "const":
            out = Polynomial([float(entry.get("value", 1.0))])
        else:
            raise ConfigError(f"{label}.kind: unknown space function kind {kind!r}")
        if entry.get("orthogonalize", False):
            out = catalog.orthogonalize(out, compute_eigenmodes(c, max(n0, 4))[n0])
        return out

    def _time(self, label: str, entry: dict):
        kind = entry.get("kind")
        if kind == "exp":
            return catalog.Exponential(float(entry.get("rate", 1.0)), float(entry.get("scale", 1.0)))
        if kind == "poly":
            return Polynomial(_floats(entry, "coeffs", label))
        if kind == "const":
            return Polynomial([float(entry.get("value", 1.0))])
        if kind == "table":
            t, v = read_csv_columns(self.base_dir / entry["path"])
            return catalog.Tabulated(t, v)
        raise ConfigError(f"{label}.kind: unknown time function kind {kind!r}")

    def _source(self, entry: dict, c: BoundaryConstants, n0: int):
        terms = entry.get("terms")
        if not isinstance(terms, list):
            raise ConfigError("functions.f.terms: expected a list of {time, space} objects")
        built = []
        for i, term in enumerate(terms):
            if not isinstance(term, dict) or "time" not in term or "space" not in term:
                raise ConfigError(f"functions.f.terms[{i}]: needs 'time' and 'space'")
            built.append((self._time(f"functions.f.terms[{i}].time", term["time"]),
                          self._space(f"functions.f.terms[{i}].space", term["space"], c, n0)))
        return catalog.SeparableSource(built)

    def r_function(self):
        entry = self.functions.get("r")
        if entry is None:
            raise ConfigError("functions.r: required for this experiment")
        return self._time("functions.r", entry)


def _merge(section: str, defaults: dict, given) -> dict:
    if not isinstance(given, dict):
        raise ConfigError(f"{section}: expected an object")
    extra = set(given) - set(defaults)
    if extra:
        raise ConfigError(f"{section}: unknown fields {sorted(extra)}")
    out = dict(defaults)
    out.update(given)
    return out


def _floats(entry: dict, key: str, label: str) -> list[float]:
    try:
        return [float(v) for v in entry[key]]
    except (KeyError, TypeError, ValueError):
        raise ConfigError(f"{label}.{key}: expected a list of numbers") from None


def _check_problem(p: dict) -> None:
    for key in ("q", "a", "b", "d", "T"):
        if not isinstance(p[key], (int, float)) or isinstance(p[key], bool):
            raise ConfigError(f"problem.{key}: expected a number, got {p[key]!r}")
    for key in ("Nt", "quad_order", "n0"):
        if not isinstance(p[key], int) or isinstance(p[key], bool):
            raise ConfigError(f"problem.{key}: expected an integer, got {p[key]!r}")
    if p["n_modes"] is not None and (not isinstance(p["n_modes"], int) or p["n_modes"] < 4):
        raise ConfigError(f"problem.n_modes: expected an integer >= 4, got {p['n_modes']!r}")
    if not 0.0 < p["q"] <= 1.0:
        raise ConfigError(f"problem.q: must lie in (0, 1], got {p['q']}")
    if not p["a"] * p["d"] > 0:
        raise ConfigError(f"problem.a, problem.d: need a*d > 0, got a={p['a']}, d={p['d']}")
    if p["T"] <= 0:
        raise ConfigError("problem.T: must be positive")
    if p["Nt"] < 8:
        raise ConfigError("problem.Nt: must be >= 8")


def load_config(path: str | Path, experiment: str | None = None) -> ExperimentConfig:
    """Parse a config file; ``experiment`` (the CLI subcommand) overrides the file's entry."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {str(path)!r} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if experiment is not None and isinstance(raw, dict):
        raw["experiment"] = experiment
    return ExperimentConfig.from_dict(raw, base_dir=path.parent)


# ------------------------------------------------------------------------ I/O


def read_csv_columns(path: Path) -> tuple[np.ndarray, np.ndarray]:
    """Two numeric columns of a CSV file with a header row."""
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read {str(path)!r}: {exc}") from None
    if data.shape[1] < 2:
        raise ConfigError(f"{str(path)!r}: expected two columns")
    return data[:, 0], data[:, 1]


def write_csv(path: Path, header: list[str], columns) -> None:
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    np.savetxt(path, data, delimiter=",", header=",".join(header), comments="", fmt="%.17g")


def write_field(path: Path, u) -> None:
    X, T = np.meshgrid(u.x, u.t, indexing="ij")
    write_csv(path, ["x", "t", "u"], [X.ravel(), T.ravel(), u.values.ravel()])


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# ---------------------------------------------------------------- experiments


def _energy_data(cfg: ExperimentConfig, spec: ProblemSpec, basis) -> SampledFunction:
    entry = cfg.functions.get("E")
    if entry is None:
        raise ConfigError("functions.E: required for this experiment")
    kind = entry.get("kind")
    if kind == "homogeneous":
        return SampledFunction(spec.grid, homogeneous_energy(spec, basis))
    if kind == "table":
        t, v = read_csv_columns(cfg.base_dir / entry["path"])
        return SampledFunction(spec.grid, np.interp(spec.grid.nodes, t, v))
    if kind == "synthetic":
        return synthetic_energy(spec, cfg.r_function(), int(cfg.inverse["refine"]))
    raise ConfigError(f"functions.E.kind: unknown kind {kind!r}")


def _r_samples(cfg: ExperimentConfig, spec: ProblemSpec) -> SampledFunction:
    return SampledFunction.from_callable(spec.grid, cfg.r_function())


def _inverse_input(cfg: ExperimentConfig, spec: ProblemSpec, E: SampledFunction) -> InverseInput:
    sm = cfg.inverse["smoothing"]
    return InverseInput(spec, E, None if sm is None else int(sm),
                        float(cfg.tolerances["compat_tol"]), float(cfg.tolerances["denom_min"]))


def _diagnostics(sol, report) -> dict:
    d = sol.diagnostics
    return {
        "residual": sol.residual,
        "kernel_bound_C": d["kernel_bound_C"],
        "constants": {k: d["constants"][k] for k in ("N0", "N1", "N2", "N3", "N4", "N5", "M1", "M2", "M3", "M4")},
        "assumption_report": report.to_list(),
        "runtime_ms": d["runtime_ms"],
        "method": d["method"],
        "tail_indicator": d["tail_indicator"],
        "warnings": d["warnings"],
    }


def run_eigen(cfg: ExperimentConfig, out: Path) -> dict:
    modes = compute_eigenmodes(cfg.constants(), int(cfg.eigen["count"]))
    cols = [[m.n for m in modes], [m.mu for m in modes], [m.s for m in modes],
            [m.x1 for m in modes], [m.int01 for m in modes], [m.norm_sq for m in modes]]
    write_csv(out / "eigen.csv", ["n", "mu", "s", "X1", "int01", "norm_sq"], cols)
    return {"mu0": modes[0].mu, "kind0": modes[0].kind.value, "count": len(modes)}


def run_mlf(cfg: ExperimentConfig, out: Path) -> dict:
    m = cfg.mlf
    z = np.linspace(float(m["z_min"]), float(m["z_max"]), int(m["n"]))
    vals = mittag_leffler(z, float(m["q"]), float(m["beta"]))
    write_csv(out / "mlf.csv", ["z", "value"], [z, vals])
    return {"points": int(z.size)}


def run_direct(cfg: ExperimentConfig, out: Path) -> dict:
    spec = cfg.problem_spec()
    basis = spec.basis()
    r = _r_samples(cfg, spec)
    u = solve_direct(spec, basis, r)
    E = energy(u)
    write_field(out / "u.csv", u)
    write_csv(out / "energy.csv", ["t", "E"], [spec.grid.nodes, E])
    return {"tail_indicator": u.tail_indicator, "E_T": float(E[-1])}


def run_fd_direct(cfg: ExperimentConfig, out: Path) -> dict:
    spec = cfg.problem_spec()
    r = _r_samples(cfg, spec)
    u = solve_fd(spec, r, FdGrid(int(cfg.fd["Nx"]), spec.Nt), starting=bool(cfg.fd["starting"]))
    E = fd_energy(u)
    write_field(out / "u.csv", u)
    write_csv(out / "energy.csv", ["t", "E"], [u.t, E])
    return {"E_T": float(E[-1])}


def run_invert(cfg: ExperimentConfig, out: Path) -> dict:
    spec = cfg.problem_spec()
    basis = spec.basis()
    E = _energy_data(cfg, spec, basis)
    inp = _inverse_input(cfg, spec, E)
    report = validate_assumptions(inp, basis)
    sol = solve_inverse(inp, basis, method=cfg.inverse["method"])
    write_csv(out / "r.csv", ["t", "r"], [sol.r.t, sol.r.values])
    write_field(out / "u.csv", sol.u)
    diag = _diagnostics(sol, report)
    write_json(out / "diagnostics.json", diag)
    return {"residual": sol.residual, "max_abs_r": float(np.abs(sol.r.values).max())}


def run_roundtrip(cfg: ExperimentConfig, out: Path) -> dict:
    spec = cfg.problem_spec()
    basis = spec.basis()
    r_fn = cfg.r_function()
    E = synthetic_energy(spec, r_fn, int(cfg.inverse["refine"]))
    inp = _inverse_input(cfg, spec, E)
    report = validate_assumptions(inp, basis)
    sol = solve_inverse(inp, basis, method=cfg.inverse["method"])
    t = spec.grid.nodes
    r_true = np.asarray(r_fn(t), dtype=float)
    err = np.abs(sol.r.values - r_true)
    rel = float((err / np.maximum(np.abs(r_true), 1e-300)).max())
    write_csv(out / "r.csv", ["t", "r_true", "r"], [t, r_true, sol.r.values])
    write_csv(out / "energy.csv", ["t", "E"], [t, E.values])
    summary = {"max_abs_error": float(err.max()), "max_rel_error": rel}
    diag = _diagnostics(sol, report)
    diag.update(summary)
    write_json(out / "report.json", diag)
    return summary


def perturbation(cfg: ExperimentConfig, t: np.ndarray, T: float, eps: float, index: int) -> np.ndarray:
    n = cfg.noise
    if n["kind"] == "sine":
        return eps * np.sin(int(n["k"]) * np.pi * t / T)
    if n["kind"] == "random":
        rng = np.random.default_rng(int(n["seed"]) + index)
        noise = rng.standard_normal(t.size)
        noise[0] = 0.0  # keep E(0) compatible
        return eps * noise
    raise ConfigError(f"noise.kind: expected 'sine' or 'random', got {n['kind']!r}")


def run_stability(cfg: ExperimentConfig, out: Path) -> dict:
    spec = cfg.problem_spec()
    basis = spec.basis()
    if "E" in cfg.functions:
        E = _energy_data(cfg, spec, basis)
    else:
        E = synthetic_energy(spec, cfg.r_function(), int(cfg.inverse["refine"]))
    inp = _inverse_input(cfg, spec, E)
    report = validate_assumptions(inp, basis)
    base = solve_inverse(inp, basis, method=cfg.inverse["method"])
    rows = []
    t = spec.grid.nodes
    for i, eps in enumerate(cfg.noise["amplitudes"]):
        dE = perturbation(cfg, t, spec.T, float(eps), i)
        pert = solve_inverse(_inverse_input(cfg, spec, SampledFunction(spec.grid, E.values + dE)), basis,
                             method=cfg.inverse["method"])
        dr = float(np.abs(pert.r.values - base.r.values).max())
        c1 = c1_norm(dE, spec.grid.dt)
        rows.append({"eps": float(eps), "dr_inf": dr, "ratio_eps": dr / float(eps), "dE_C1": c1,
                     "ratio_C1": dr / c1 if c1 > 0 else None, "residual": pert.residual})
    ratios = [r["ratio_eps"] for r in rows]
    spread = max(ratios) / min(ratios) if min(ratios) > 0 else None
    write_csv(out / "stability.csv", ["eps", "dr_inf", "ratio_eps", "dE_C1"],
              [[r["eps"] for r in rows], [r["dr_inf"] for r in rows], ratios, [r["dE_C1"] for r in rows]])
    diag = _diagnostics(base, report)
    diag.update({"perturbations": rows, "ratio_spread": spread})
    write_json(out / "stability.json", diag)
    return {"ratio_spread": spread, "ratios": ratios}


RUNNERS = {
    "eigen": run_eigen,
    "mlf": run_mlf,
    "direct": run_direct,
    "fd-direct": run_fd_direct,
    "invert": run_invert,
    "roundtrip": run_roundtrip,
    "stability": run_stability,
}


def run(cfg: ExperimentConfig, out: Path | None = None) -> dict:
    out = Path(cfg.output_dir) if out is None else Path(out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        summary = RUNNERS[cfg.experiment](cfg, out)
    for w in caught:
        log.warning("%s: %s", w.category.__name__, w.message)
    log.info("%s finished in %.0f ms", cfg.experiment, (time.perf_counter() - t0) * 1e3)
    return summary


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fracsource", description=__doc__.split("\n\n")[0])
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", required=True, help="JSON experiment config")
    p.add_argument("--out", help="output directory (overrides output_dir)")
    p.add_argument("--verbose", "-v", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, args.experiment)
        summary = run(cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FracSourceError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(summary, sort_keys=True, default=_jsonable))
    return 0


if __name__ == "__main__":
    sys.exit(main())
