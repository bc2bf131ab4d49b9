# cli.py
"""Command-line pipeline: simulate truth, train, evaluate, demo.

Every run is driven by a single JSON config so that artifacts are
reproducible from one file; command-line flags only select paths, the
subcommand, and the --seed/--epochs overrides.

Exit codes: 0 success, 2 config or input error, 3 truth-simulation
failure, 4 training failure, 5 evaluation blow-up.
"""

import argparse
import importlib.util
import json
import sys
from pathlib import Path

import numpy as np

from . import dynsys, errors, features, model as model_mod, opinf, optim

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SIMULATION = 3
EXIT_TRAINING = 4
EXIT_EVALUATION = 5

_SYSTEMS = ("fhn", "glycolysis", "custom-file")


class ConfigError(ValueError):
    pass


class SimulationFailure(RuntimeError):
    pass


class TrainingFailure(RuntimeError):
    pass


class EvaluationBlowUp(RuntimeError):
    pass


# Config handling =============================================================

_REQUIRED_KEYS = ("system", "ic_ranges", "ic_count", "t_span", "num_points",
                  "gate_threshold", "architecture", "train", "seeds")
_SEED_KEYS = ("data", "split", "init", "shuffle", "test")


def load_config(path):
    try:
        with open(path) as f:
            cfg = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    for key in _REQUIRED_KEYS:
        if key not in cfg:
            raise ConfigError(f"config is missing field {key!r}")
    if cfg["system"] not in _SYSTEMS:
        raise ConfigError(
            f"system must be one of {_SYSTEMS}, got {cfg['system']!r}")
    if cfg["system"] == "custom-file" and "rhs_file" not in cfg:
        raise ConfigError("system custom-file requires field 'rhs_file'")
    ranges = cfg["ic_ranges"]
    if not ranges or any(len(r) != 2 for r in ranges):
        raise ConfigError("ic_ranges must be a nonempty list of [lo, hi]")
    if int(cfg["ic_count"]) < 1:
        raise ConfigError("ic_count must be at least 1")
    if int(cfg["num_points"]) < 2:
        raise ConfigError("num_points must be at least 2")
    t0, t1 = cfg["t_span"]
    if not t1 > t0:
        raise ConfigError("t_span must satisfy t1 > t0")
    if float(cfg["gate_threshold"]) <= 0:
        raise ConfigError("gate_threshold must be positive")
    arch = cfg["architecture"]
    if "width" not in arch or "blocks" not in arch:
        raise ConfigError("architecture needs 'width' and 'blocks'")
    seeds = cfg["seeds"]
    for key in _SEED_KEYS:
        if key not in seeds:
            raise ConfigError(f"seeds is missing {key!r}")
    expected_n = {"fhn": 2, "glycolysis": 7}.get(cfg["system"])
    if expected_n is not None and len(ranges) != expected_n:
        raise ConfigError(
            f"ic_ranges has {len(ranges)} entries, system "
            f"{cfg['system']!r} needs {expected_n}")


def apply_overrides(cfg, epochs=None, seed=None):
    if epochs is not None:
        if epochs < 1:
            raise ConfigError("epochs override must be at least 1")
        cfg["train"]["epochs"] = int(epochs)
    if seed is not None:
        cfg["seeds"] = {key: int(seed) + k
                        for k, key in enumerate(_SEED_KEYS)}
    return cfg


def _load_custom_rhs(path):
    spec = importlib.util.spec_from_file_location("lqdyn_custom_rhs", path)
    if spec is None or spec.loader is None:
        raise ConfigError(f"cannot load rhs_file {path!r}")
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    if not hasattr(mod, "rhs"):
        raise ConfigError(f"rhs_file {path!r} does not define rhs(x)")
    return mod.rhs


def make_rhs(cfg):
    """Ground-truth vector field named by the config."""
    system = cfg["system"]
    params = cfg.get("params", {})
    if system == "fhn":
        p = dynsys.FhnParams(**params)
        return lambda x: dynsys.rhs_fhn(x, p)
    if system == "glycolysis":
        p = dynsys.GlyParams(**params)
        return lambda x: dynsys.rhs_glycolysis(x, p)
    return _load_custom_rhs(cfg["rhs_file"])


# CSV I/O =====================================================================

def write_trajectory_csv(traj, path):
    """Trajectory CSV: header t,x1,...,xn and 17-significant-digit rows."""
    with open(path, "w") as f:
        cols = ",".join(f"x{i + 1}" for i in range(traj.n))
        f.write(f"t,{cols}\n")
        for t, row in zip(traj.times, traj.states):
            vals = ",".join(f"{v:.17g}" for v in row)
            f.write(f"{t:.17g},{vals}\n")


def read_trajectory_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return dynsys.Trajectory(times=data[:, 0], states=data[:, 1:])


def _write_json(doc, path):
    with open(path, "w") as f:
        json.dump(doc, f, sort_keys=True, indent=1)
        f.write("\n")


# Subcommands =================================================================

def cmd_simulate(cfg, out_dir):
    """Simulate the configured system from sampled initial conditions.

    Writes one trajectory CSV per initial condition plus manifest.json
    listing the files, seeds, and parameters.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rhs = make_rhs(cfg)
    try:
        ics = dynsys.sample_initial_conditions(
            cfg["ic_ranges"], int(cfg["ic_count"]), int(cfg["seeds"]["data"]))
    except (errors.EmptyRange, ValueError) as exc:
        raise ConfigError(str(exc))

    names = []
    for j, ic in enumerate(ics):
        try:
            traj = dynsys.integrate(rhs, ic, cfg["t_span"],
                                    int(cfg["num_points"]))
        except errors.NonFiniteState as exc:
            raise SimulationFailure(
                f"truth simulation blew up for initial condition {j} "
                f"(step {exc.step_index})")
        except errors.NonFiniteOutput as exc:
            raise SimulationFailure(str(exc))
        name = f"traj_{j:03d}.csv"
        write_trajectory_csv(traj, out / name)
        names.append(name)

    manifest = {
        "system": cfg["system"],
        "variable_names": cfg.get("variable_names"),
        "params": cfg.get("params", {}),
        "ic_ranges": cfg["ic_ranges"],
        "ic_count": int(cfg["ic_count"]),
        "t_span": list(cfg["t_span"]),
        "num_points": int(cfg["num_points"]),
        "seeds": cfg["seeds"],
        "files": names,
    }
    _write_json(manifest, out / "manifest.json")
    print(f"simulate: wrote {len(names)} trajectories to {out}")
    return out / "manifest.json"


def _architecture_for(cfg, component):
    arch = dict(cfg["architecture"])
    override = cfg.get("arch_overrides", {}).get(str(component))
    if override:
        arch.update(override)
    return int(arch["width"]), int(arch["blocks"])


def cmd_train(cfg, manifest_path, out_dir):
    """Stencil, split, fit, gate, and train networks where needed.

    Writes model.json, gate_report.json, one history CSV per trained
    component, and train_manifest.json listing them.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = Path(manifest_path)
    try:
        with open(manifest_path) as f:
            manifest = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"data manifest not found: {manifest_path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"data manifest is not valid JSON: {exc}")

    data_dir = manifest_path.parent
    samples = []
    for name in manifest["files"]:
        try:
            traj = read_trajectory_csv(data_dir / name)
        except OSError as exc:
            raise ConfigError(f"cannot read trajectory {name!r}: {exc}")
        samples.append(dynsys.stencil_derivatives(traj))
    ds = features.build_dataset(samples, int(cfg["seeds"]["split"]),
                                standardize=bool(cfg.get("standardize",
                                                         False)))
    n = ds.n

    threshold = float(cfg["gate_threshold"])
    nq = ds.index_map.num_features
    warm, gates, report = [], [], []
    for i in range(n):
        ops = opinf.fit_linquad(ds, i)
        rep = opinf.residual_stats(ds, ops)
        gate = opinf.gate_component(rep, threshold)
        if rep.rel_rms > 10.0 * threshold:
            # The least-squares fit is a poor surrogate here; its large
            # quadratic rows extrapolate badly outside the data. Start
            # the joint optimization from zero operators instead.
            ops = opinf.LinQuadOps(a_row=np.zeros(n), q_row=np.zeros(nq),
                                   bias=0.0, component_index=i)
        warm.append(ops)
        gates.append(gate)
        report.append(opinf.gate_report_entry(i, gate))
        print(f"train: component {i} rel_rms={rep.rel_rms:.3e} "
              f"-> {gate.kind}")
    _write_json(report, out / "gate_report.json")

    hyper = optim.HyperParams(seed=int(cfg["seeds"]["init"]),
                              **cfg["train"])
    written = ["model.json", "gate_report.json"]
    components = []
    for i in range(n):
        if gates[i].kind == opinf.ANALYTIC:
            components.append(optim.ComponentModel(ops=warm[i],
                                                   gate=gates[i], net=None))
            continue
        arch = _architecture_for(cfg, i)
        try:
            comp, history = optim.train_component(
                ds, i, arch, hyper, warm[i], gates[i],
                shuffle_seed=int(cfg["seeds"]["shuffle"]))
        except errors.Diverged as exc:
            raise TrainingFailure(f"component {i}: {exc}")
        name = f"history_comp{i}.csv"
        history.write_csv(out / name)
        written.append(name)
        components.append(comp)
        print(f"train: component {i} width={arch[0]} blocks={arch[1]} "
              f"val_mse={history.val_loss.min():.3e} "
              f"({history.wall_seconds:.1f}s)")

    metadata = {
        "variable_names": manifest.get("variable_names")
        or cfg.get("variable_names"),
        "standardization": ds.scaler,
        "provenance": {
            "system": cfg["system"],
            "params": cfg.get("params", {}),
            "seeds": cfg["seeds"],
            "train": cfg["train"],
            "architecture": cfg["architecture"],
            "arch_overrides": cfg.get("arch_overrides", {}),
            "gate_threshold": threshold,
            "standardize": bool(cfg.get("standardize", False)),
            "gate_report": report,
            "data": {
                "t_span": manifest["t_span"],
                "num_points": manifest["num_points"],
                "ic_count": manifest["ic_count"],
            },
            "snapshot_policy": "best_validation",
        },
    }
    lqm = model_mod.LQModel(n=n, components=tuple(components),
                            kind=model_mod.CONTINUOUS, metadata=metadata)
    model_mod.save_model(lqm, out / "model.json")
    _write_json({"files": written}, out / "train_manifest.json")
    print(f"train: wrote model.json to {out}")
    return out / "model.json"


def cmd_evaluate(cfg, model_path, out_dir):
    """Simulate truth and learned model from fresh test initial conditions.

    Writes paired comparison CSVs (t,true_x1,pred_x1,...), metrics.json,
    and eval_manifest.json. A learned-model blow-up still writes the
    partial comparison, flags it in the metrics, and exits 5.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        lqm = model_mod.load_model(model_path)
    except FileNotFoundError:
        raise ConfigError(f"model file not found: {model_path}")
    except (errors.MalformedFile, errors.VersionMismatch) as exc:
        raise ConfigError(f"cannot load model: {exc}")

    seeds = cfg["seeds"]
    if int(seeds["test"]) == int(seeds["data"]):
        raise ConfigError("seeds.test must differ from seeds.data")
    test_cfg = cfg.get("test", {})
    t_span = test_cfg.get("t_span", cfg["t_span"])
    num_points = int(test_cfg.get("num_points", cfg["num_points"]))
    ic_count = int(test_cfg.get("ic_count", 1))
    rhs = make_rhs(cfg)
    ics = dynsys.sample_initial_conditions(cfg["ic_ranges"], ic_count,
                                           int(seeds["test"]))

    blew_up = False
    per_ic = []
    written = ["metrics.json"]
    for j, ic in enumerate(ics):
        try:
            truth = dynsys.integrate(rhs, ic, t_span, num_points)
        except errors.NonFiniteState as exc:
            raise SimulationFailure(
                f"truth simulation blew up for test condition {j} "
                f"(step {exc.step_index})")
        name = f"comparison_{j:03d}.csv"
        entry = {"ic_index": j, "initial_condition": ic.tolist()}
        try:
            pred = model_mod.simulate_model(lqm, ic, t_span, num_points)
        except errors.NonFiniteState as exc:
            blew_up = True
            k = len(exc.partial_times)
            _write_comparison_csv(truth.times[:k], truth.states[:k],
                                  exc.partial_states, lqm.variable_names,
                                  out / name)
            entry.update({"blow_up": {"step_index": exc.step_index},
                          "rel_l2": None, "max_abs": None,
                          "horizon": None})
            print(f"evaluate: learned model blew up at step "
                  f"{exc.step_index} for test condition {j}")
        else:
            _write_comparison_csv(truth.times, truth.states, pred.states,
                                  lqm.variable_names, out / name)
            m = model_mod.evaluate(truth, pred)
            entry.update({"blow_up": None,
                          "rel_l2": m.rel_l2.tolist(),
                          "max_abs": m.max_abs,
                          "horizon": m.horizon})
            worst = float(np.max(m.rel_l2))
            print(f"evaluate: test condition {j} worst rel_l2={worst:.3e}")
        per_ic.append(entry)
        written.append(name)

    _write_json({"per_ic": per_ic}, out / "metrics.json")
    _write_json({"files": written}, out / "eval_manifest.json")
    if blew_up:
        raise EvaluationBlowUp("learned simulation blew up; partial "
                               "comparison written")
    return out / "metrics.json"


def _write_comparison_csv(times, true_states, pred_states, names, path):
    n = true_states.shape[1]
    cols = []
    for i in range(n):
        cols.append(f"true_x{i + 1}")
        cols.append(f"pred_x{i + 1}")
    with open(path, "w") as f:
        f.write("t," + ",".join(cols) + "\n")
        for k in range(len(times)):
            vals = []
            for i in range(n):
                vals.append(f"{true_states[k, i]:.17g}")
                vals.append(f"{pred_states[k, i]:.17g}")
            f.write(f"{times[k]:.17g}," + ",".join(vals) + "\n")


def cmd_demo(system, cfg, out_dir):
    """simulate + train + evaluate with one config in one directory."""
    out = Path(out_dir)
    manifest = cmd_simulate(cfg, out)
    model_path = cmd_train(cfg, manifest, out)
    cmd_evaluate(cfg, model_path, out)
    print(f"demo {system}: all artifacts in {out}")


def _demo_config(system, config_path, desk):
    if config_path is not None:
        return load_config(config_path)
    name = f"{system}-desk" if desk else system
    cfg = dynsys.load_packaged_config(name)
    validate_config(cfg)
    return cfg


# Entry point =================================================================

def build_parser():
    parser = argparse.ArgumentParser(
        prog="lqdyn",
        description="Learn linear-quadratic + residual-network models of "
                    "dynamical systems from trajectory data.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate the configured system")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="lqdyn_run")

    p = sub.add_parser("train", help="fit, gate, and train from data")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True,
                   help="manifest.json written by simulate")
    p.add_argument("--out", default="lqdyn_run")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("evaluate", help="compare learned model to truth")
    p.add_argument("--config", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", default="lqdyn_run")

    p = sub.add_parser("demo", help="simulate + train + evaluate")
    p.add_argument("system", choices=["fhn", "glycolysis"])
    p.add_argument("--config", default=None,
                   help="config path; defaults to the packaged demo config")
    p.add_argument("--desk", action="store_true",
                   help="use the packaged reduced-scale config")
    p.add_argument("--out", default="lqdyn_run")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            cfg = load_config(args.config)
            cmd_simulate(cfg, args.out)
        elif args.command == "train":
            cfg = load_config(args.config)
            apply_overrides(cfg, epochs=args.epochs, seed=args.seed)
            cmd_train(cfg, args.data, args.out)
        elif args.command == "evaluate":
            cfg = load_config(args.config)
            cmd_evaluate(cfg, args.model, args.out)
        elif args.command == "demo":
            cfg = _demo_config(args.system, args.config, args.desk)
            apply_overrides(cfg, epochs=args.epochs, seed=args.seed)
            cmd_demo(args.system, cfg, args.out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SIMULATION
    except TrainingFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    except EvaluationBlowUp as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EVALUATION
    except TypeError as exc:
        # Bad parameter names in the config surface as TypeError from the
        # dataclass constructors.
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
