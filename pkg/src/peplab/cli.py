"""Experiment CLI: config parsing, orchestration, persistence, manifests.

    pep-lab <subcommand> --config <file> --out <dir> [--seed S] [--threads T]

Subcommands: classify, oracle, thermo-table, simulate, bg-scan, qv-check,
energy-check.  Exit codes: 0 ok, 2 config error, 3 budget exceeded,
4 invariant violation.  Every CSV starts with a `# manifest=<hash>` line
followed by a header row; reruns with the same config and seed produce
byte-identical numeric outputs (wall time lives only in the manifest).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, experiments
from .errors import (
    BudgetExceededError,
    ConfigError,
    InvariantViolationError,
    NonGradientError,
    PepLabError,
)
from .gradient import classify as classify_spec
from .kmc import SimulationPlan, run as run_replica
from .model import AsymmetryParams, RateSpec

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUDGET = 3
EXIT_INVARIANT = 4

SUBCOMMANDS = (
    "classify",
    "oracle",
    "thermo-table",
    "simulate",
    "bg-scan",
    "qv-check",
    "energy-check",
)


# -- config validation --------------------------------------------------------


def _require_mapping(obj, path):
    if not isinstance(obj, dict):
        raise ConfigError(path, "must be an object")
    return obj


def _reject_unknown(obj, path, allowed):
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}" if path else key, "unknown key")


def _get(obj, path, key, kinds, required=True, default=None, check=None, describe=""):
    if key not in obj:
        if required:
            raise ConfigError(f"{path}.{key}" if path else key, "missing required key")
        return default
    val = obj[key]
    if kinds is bool:
        ok = isinstance(val, bool)
    elif kinds is int:
        ok = isinstance(val, int) and not isinstance(val, bool)
    elif kinds is float:
        ok = isinstance(val, (int, float)) and not isinstance(val, bool)
        if ok:
            val = float(val)
    elif kinds is list:
        ok = isinstance(val, list)
    elif kinds is str:
        ok = isinstance(val, str)
    else:
        ok = isinstance(val, kinds)
    if not ok:
        raise ConfigError(f"{path}.{key}" if path else key, f"must be {describe or kinds}")
    if check is not None:
        err = check(val)
        if err:
            raise ConfigError(f"{path}.{key}" if path else key, err)
    return val


def _parse_rates(obj, path="rates") -> RateSpec:
    obj = _require_mapping(obj, path)
    _reject_unknown(obj, path, {"kappa", "c", "d"})
    kappa = _get(obj, path, "kappa", int, check=lambda v: None if v >= 1 else "must be >= 1")
    c = _get(obj, path, "c", list)
    d = _get(obj, path, "d", list)
    for name, arr in (("c", c), ("d", d)):
        if len(arr) != kappa + 1:
            raise ConfigError(f"{path}.{name}", f"must have length kappa+1 = {kappa + 1}")
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in arr):
            raise ConfigError(f"{path}.{name}", "entries must be numbers")
    try:
        return RateSpec(kappa, c, d)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from exc


def _parse_asym(obj, path) -> AsymmetryParams:
    obj = _require_mapping(obj, path)
    _reject_unknown(obj, path, {"n", "alpha", "p", "q"})
    n = _get(obj, path, "n", int, required=False, default=1,
             check=lambda v: None if v >= 1 else "must be >= 1")
    has_alpha = "alpha" in obj
    has_pq = "p" in obj or "q" in obj
    if has_alpha == has_pq:
        raise ConfigError(path, "give either alpha (with n) or the pair p, q")
    try:
        if has_alpha:
            return AsymmetryParams.sbe(n, _get(obj, path, "alpha", float))
        p = _get(obj, path, "p", float)
        q = _get(obj, path, "q", float)
        return AsymmetryParams.from_pq(n, p, q)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from exc


def _check_rho(spec):
    def inner(v):
        if not (0.0 < v < spec.kappa):
            return f"rho must lie strictly inside (0, {spec.kappa})"
        return None

    return inner


def _positive(v):
    return None if v > 0 else "must be > 0"


def _positive_int_list(v):
    if not v or not all(isinstance(e, int) and not isinstance(e, bool) and e > 0 for e in v):
        return "must be a non-empty list of positive integers"
    return None


def parse_config(path: str | Path, command: str) -> dict:
    """Validated experiment plan for one subcommand.

    Eager validation: rate positivity, rho strictly interior, eps * n
    integrality, list shapes; unknown keys are rejected with their path.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError("", f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON: {exc}") from exc
    cfg = _require_mapping(raw, "")
    section_key = command.replace("-", "_")
    _reject_unknown(cfg, "", {"rates", "seed", "threads", section_key})
    if "rates" not in cfg:
        raise ConfigError("rates", "missing required key")
    spec = _parse_rates(cfg["rates"])
    seed = _get(cfg, "", "seed", int, required=False, default=0)
    threads = _get(cfg, "", "threads", int, required=False, default=0,
                   check=lambda v: None if v >= 0 else "must be >= 0")
    if section_key not in cfg:
        raise ConfigError(section_key, "missing required section")
    section = _require_mapping(cfg[section_key], section_key)
    plan = {"spec": spec, "seed": seed, "threads": threads or None, "command": command}
    parser = _SECTION_PARSERS[command]
    plan.update(parser(section, section_key, spec))
    return plan


def _parse_classify(sec, path, spec):
    _reject_unknown(sec, path, {"n", "alpha", "p", "q", "oracle_sizes"})
    sizes = _get(sec, path, "oracle_sizes", list, required=False, default=[3, 4, 5],
                 check=_positive_int_list)
    asym_keys = {k: sec[k] for k in ("n", "alpha", "p", "q") if k in sec}
    return {"asym": _parse_asym(asym_keys, path), "oracle_sizes": tuple(sizes)}


def _parse_oracle(sec, path, spec):
    _reject_unknown(sec, path, {"n", "alpha", "p", "q", "L"})
    L = _get(sec, path, "L", int, check=lambda v: None if v >= 2 else "must be >= 2")
    asym_keys = {k: sec[k] for k in ("n", "alpha", "p", "q") if k in sec}
    return {"asym": _parse_asym(asym_keys, path), "L": L}


def _parse_thermo(sec, path, spec):
    _reject_unknown(sec, path, {"rho_min", "rho_max", "points", "alpha", "alpha0", "n"})
    rho_min = _get(sec, path, "rho_min", float, check=_check_rho(spec))
    rho_max = _get(sec, path, "rho_max", float, check=_check_rho(spec))
    if rho_max <= rho_min:
        raise ConfigError(f"{path}.rho_max", "must exceed rho_min")
    points = _get(sec, path, "points", int,
                  check=lambda v: None if v >= 2 else "must be >= 2")
    alpha = _get(sec, path, "alpha", float)
    alpha0 = _get(sec, path, "alpha0", float, required=False)
    n = _get(sec, path, "n", int, check=lambda v: None if v >= 1 else "must be >= 1")
    return {
        "rhos": np.linspace(rho_min, rho_max, points),
        "alpha": alpha,
        "alpha0": alpha0,
        "n": n,
    }


def _lattice_size(sec, path, n):
    if ("N" in sec) == ("M" in sec):
        raise ConfigError(path, "give exactly one of N (sites) or M (torus length)")
    if "N" in sec:
        return _get(sec, path, "N", int, check=lambda v: None if v >= 2 else "must be >= 2")
    M = _get(sec, path, "M", int, check=lambda v: None if v >= 1 else "must be >= 1")
    return M * n


def _parse_simulate(sec, path, spec):
    allowed = {"n", "alpha", "p", "q", "N", "M", "rho", "T", "frames", "replicas",
               "log_jumps"}
    _reject_unknown(sec, path, allowed)
    asym = _parse_asym({k: sec[k] for k in ("n", "alpha", "p", "q") if k in sec}, path)
    N = _lattice_size(sec, path, asym.n)
    rho = _get(sec, path, "rho", float, check=_check_rho(spec))
    T = _get(sec, path, "T", float, check=_positive)
    frames = _get(sec, path, "frames", int,
                  check=lambda v: None if v >= 0 else "must be >= 0")
    replicas = _get(sec, path, "replicas", int, required=False, default=1,
                    check=lambda v: None if v >= 1 else "must be >= 1")
    log_jumps = _get(sec, path, "log_jumps", bool, required=False, default=False)
    return {"asym": asym, "N": N, "rho": rho, "T": T, "frames": frames,
            "replicas": replicas, "log_jumps": log_jumps}


def _common_estimator(sec, path, spec, extra):
    allowed = {"alpha", "M", "rho", "T", "replicas", "mode"} | set(extra)
    _reject_unknown(sec, path, allowed)
    out = {
        "alpha": _get(sec, path, "alpha", float),
        "M": _get(sec, path, "M", int, check=lambda v: None if v >= 1 else "must be >= 1"),
        "rho": _get(sec, path, "rho", float, check=_check_rho(spec)),
        "T": _get(sec, path, "T", float, check=_positive),
        "replicas": _get(sec, path, "replicas", int,
                         check=lambda v: None if v >= 1 else "must be >= 1"),
        "mode": _get(sec, path, "mode", int, required=False, default=1,
                     check=lambda v: None if v >= 1 else "must be >= 1"),
    }
    return out


def _parse_qv(sec, path, spec):
    out = _common_estimator(sec, path, spec, {"n_values"})
    out["n_values"] = tuple(_get(sec, path, "n_values", list, check=_positive_int_list))
    return out


def _parse_bg(sec, path, spec):
    out = _common_estimator(sec, path, spec, {"n_values", "ells", "frames_per_n2"})
    out["n_values"] = tuple(_get(sec, path, "n_values", list, check=_positive_int_list))
    out["ells"] = tuple(_get(sec, path, "ells", list, check=_positive_int_list))
    out["frames_per_n2"] = _get(sec, path, "frames_per_n2", float, required=False,
                                default=0.125, check=_positive)
    return out


def _parse_energy(sec, path, spec):
    out = _common_estimator(sec, path, spec, {"n", "eps", "s", "t", "frames"})
    n = _get(sec, path, "n", int, check=lambda v: None if v >= 1 else "must be >= 1")
    eps = _get(sec, path, "eps", list)
    if not eps or not all(isinstance(e, (int, float)) and 0 < e for e in eps):
        raise ConfigError(f"{path}.eps", "must be a non-empty list of positive numbers")
    for e in eps:
        if abs(e * n - round(e * n)) > 1e-9:
            raise ConfigError(f"{path}.eps", f"eps * n must be an integer; got {e} * {n}")
    s = _get(sec, path, "s", float, required=False, default=0.0)
    t = _get(sec, path, "t", float, required=False, default=out["T"])
    if not (0.0 <= s < t <= out["T"]):
        raise ConfigError(f"{path}.s", "need 0 <= s < t <= T")
    out.update(
        n=n,
        eps=tuple(float(e) for e in eps),
        s=s,
        t=t,
        frames=_get(sec, path, "frames", int, check=lambda v: None if v >= 2 else "must be >= 2"),
    )
    return out


_SECTION_PARSERS = {
    "classify": _parse_classify,
    "oracle": _parse_oracle,
    "thermo-table": _parse_thermo,
    "simulate": _parse_simulate,
    "qv-check": _parse_qv,
    "bg-scan": _parse_bg,
    "energy-check": _parse_energy,
}


# -- output helpers -----------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def write_csv(path: Path, columns, rows, manifest_ref: str) -> None:
    lines = [f"# manifest={manifest_ref}", ",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row.get(col, "")) for col in columns))
    path.write_text("\n".join(lines) + "\n")


def _config_hash(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


# -- subcommand runners -------------------------------------------------------


def _run_classify(plan, out_dir, ref):
    report = classify_spec(plan["spec"], plan["asym"], plan["oracle_sizes"])
    payload = {"manifest": ref, **report.to_dict()}
    out = out_dir / "classify.json"
    out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return [out.name]


def _run_oracle(plan, out_dir, ref):
    rows = experiments.oracle_rows(plan["spec"], plan["asym"], plan["L"])
    out = out_dir / "oracle.csv"
    write_csv(out, experiments.ORACLE_COLUMNS, rows, ref)
    return [out.name]


def _run_thermo(plan, out_dir, ref):
    rows = experiments.thermo_table_rows(
        plan["spec"], plan["rhos"], plan["alpha"], plan["n"], plan["alpha0"]
    )
    out = out_dir / "thermo_table.csv"
    write_csv(out, experiments.THERMO_COLUMNS, rows, ref)
    return [out.name]


def _run_simulate(plan, out_dir, ref):
    times = tuple(np.linspace(0.0, plan["T"], plan["frames"] + 1))
    outputs = []
    all_frames = []
    for rid in range(plan["replicas"]):
        sim_plan = SimulationPlan(
            spec=plan["spec"],
            asym=plan["asym"],
            N=plan["N"],
            rho=plan["rho"],
            T=plan["T"],
            observation_times=times,
            seed=plan["seed"],
            replica_id=rid,
            log_jumps=plan["log_jumps"],
        )
        traj = run_replica(sim_plan)
        all_frames.append(traj.frames)
        if plan["log_jumps"]:
            name = f"jumps_r{rid:03d}.csv"
            rows = [
                {"t": float(t), "bond": int(b), "dir": int(d)}
                for t, b, d in zip(traj.jump_times, traj.jump_bonds, traj.jump_dirs)
            ]
            write_csv(out_dir / name, ("t", "bond", "dir"), rows, ref)
            outputs.append(name)
    frames_path = out_dir / "frames.npz"
    np.savez(frames_path, times=np.asarray(times), frames=np.array(all_frames))
    outputs.insert(0, frames_path.name)
    return outputs


def _run_qv(plan, out_dir, ref):
    rows = []
    for n in plan["n_values"]:
        rows.extend(
            experiments.qv_experiment(
                plan["spec"], n, plan["M"], plan["rho"], plan["alpha"], plan["T"],
                plan["mode"], plan["replicas"], plan["seed"], plan["threads"],
            )
        )
    out = out_dir / "qv_check.csv"
    write_csv(out, experiments.ESTIMATOR_COLUMNS, rows, ref)
    return [out.name]


def _run_bg(plan, out_dir, ref):
    rows = []
    for n in plan["n_values"]:
        frames = max(2, int(round(plan["frames_per_n2"] * plan["T"] * n * n)))
        rows.extend(
            experiments.bg_experiment(
                plan["spec"], n, plan["M"], plan["rho"], plan["alpha"], plan["T"],
                frames, plan["mode"], plan["ells"], plan["replicas"], plan["seed"],
                plan["threads"],
            )
        )
    out = out_dir / "bg_scan.csv"
    write_csv(out, experiments.ESTIMATOR_COLUMNS, rows, ref)
    return [out.name]


def _run_energy(plan, out_dir, ref):
    rows = experiments.energy_experiment(
        plan["spec"], plan["n"], plan["M"], plan["rho"], plan["alpha"], plan["T"],
        plan["frames"], plan["mode"], plan["eps"], plan["s"], plan["t"],
        plan["replicas"], plan["seed"], plan["threads"],
    )
    out = out_dir / "energy_check.csv"
    write_csv(out, experiments.ESTIMATOR_COLUMNS, rows, ref)
    return [out.name]


_RUNNERS = {
    "classify": _run_classify,
    "oracle": _run_oracle,
    "thermo-table": _run_thermo,
    "simulate": _run_simulate,
    "qv-check": _run_qv,
    "bg-scan": _run_bg,
    "energy-check": _run_energy,
}


def run_experiment(plan: dict, config_path: str | Path, out_dir: str | Path) -> dict:
    """Execute a validated plan, writing results plus a manifest.

    The manifest records the config hash, seed, code version and wall time;
    partial outputs (after an error) are marked incomplete.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ref = _config_hash(config_path)
    manifest = {
        "command": plan["command"],
        "config_sha256_16": ref,
        "seed": plan["seed"],
        "code_version": __version__,
        "complete": False,
        "outputs": [],
    }
    started = time.monotonic()
    try:
        manifest["outputs"] = _RUNNERS[plan["command"]](plan, out_dir, ref)
        manifest["complete"] = True
    finally:
        manifest["wall_time_s"] = round(time.monotonic() - started, 3)
        (out_dir / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n"
        )
    return manifest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pep-lab",
        description="Partial exclusion process laboratory: classification, "
        "oracles, thermodynamics, simulation and fluctuation statistics.",
    )
    parser.add_argument("command", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="JSON experiment config")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override config seed")
    parser.add_argument("--threads", type=int, default=None, help="replica parallelism")
    args = parser.parse_args(argv)

    try:
        plan = parse_config(args.config, args.command)
        if args.seed is not None:
            plan["seed"] = args.seed
        if args.threads is not None:
            plan["threads"] = args.threads or None
        run_experiment(plan, args.config, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonGradientError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetExceededError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except InvariantViolationError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except PepLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
