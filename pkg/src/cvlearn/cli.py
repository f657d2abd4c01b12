"""Command-line front end.

Every subcommand reads one flat JSON config (``--config``); command-line flags
override config keys, and both override the built-in defaults.  Each run
writes its outputs plus ``manifest.json`` into ``--out``.  A manifest can be
passed back as ``--config`` to repeat the run; outputs are byte-identical.

Exit codes: 0 success, 2 configuration error, 3 bound inapplicable.
"""

import argparse
import json
import logging
import math
import os
import sys

import numpy as np

from . import __version__, streams
from .bounds import (
    acquisition_time,
    classical_lower,
    classical_success_bound,
    equivalent_classical_N,
    format_duration,
    hoeffding_upper,
)
from .errors import Inapplicable, RejectedInput
from .estimator import estimate_affine, reconstruct_slice
from .game import GamePools, GameSpec, deal, sample_complexity_hypo, success_probability, transcript
from .io import file_blob_sha1, read_records, write_json, write_records, write_table
from .measurement import DriftModel, SqueezingSpec, effective_squeezing, inject_pilots, rotation, simulate_bell_batch
from .process import FixedSpec, GaussianSpec, ThreePeakSpec, as_complex_vec, spec_from_dict, spec_to_dict
from .reconstruction import (
    ReconSpec,
    SlicePool,
    direction_sweep,
    peak_direction,
    sample_complexity_recon,
    slice_grid,
    slice_truth,
    sweep_directions,
)
from .trace import (
    ModeFunctionSpec,
    calibrate_vacuum_scale,
    estimate_delay,
    extract_quadratures,
    read_trace,
    read_trace_csv,
    synth_trace,
    vacuum_noise_std,
    write_trace,
)

log = logging.getLogger("cvlearn")

EXIT_CONFIG = 2
EXIT_INAPPLICABLE = 3

_PROCESS = {
    "process": "three_peak",
    "n": 1,
    "sigma": 0.3,
    "epsilon0": 0.25,
    "gamma": None,
    "alpha0": None,
    "squeezing_db": 0.0,
    "transmissivity": 1.0,
    "drift_theta": 0.0,
    "drift_affine": None,
    "noise_scale": 1.0,
}

DEFAULTS = {
    "simulate": dict(_PROCESS, N=1000, pilot_period=0, pilot_amplitude=10.0),
    "reconstruct": dict(
        _PROCESS,
        records=None,
        N=100000,
        epsilon=0.24,
        delta=1 / 3,
        b_max=0.3,
        grid_step=0.01,
        slice_b_max=None,
        repeats=25,
        max_rounds=35,
        keep_last=25,
        warm_start=True,
        complexity=True,
        correct_drift=False,
        pilot_amplitude=10.0,
        sweep_overlaps=None,
        sweep_per_overlap=1,
        sweep_repeats=None,
        sweep_N=None,
    ),
    "hypotest": {
        "n": 20,
        "K": 16,
        "kappa": 0.2,
        "sigma": 0.3,
        "epsilon0": 0.25,
        "threshold": 0.25,
        "balanced": True,
        "statistic": "im",
        "squeezing_db": 0.0,
        "transmissivity": 1.0,
        "N": 100000,
        "pool_size": None,
        "repeats": 25,
        "P_target": None,
        "warm_start": True,
        "blind": False,
    },
    "bounds": {
        "n": [20, 40, 60, 100, 120],
        "kappa": [0.2],
        "squeezing_db": [0.0, 4.78],
        "m": 1,
        "epsilon": 0.24,
        "delta": 1 / 3,
        "sigma": 0.3,
        "epsilon0": 0.25,
        "P_suc": None,
        "N": 100000,
        "mode_rate_hz": 1e6,
    },
    "trace": {
        "displacements": None,
        "n_modes": 10,
        "amplitude": 3.0,
        "sample_rate_hz": 100e6,
        "sideband_hz": 3.8e6,
        "envelope_kappa_rad_s": 2 * math.pi * 1e6,
        "mode_duration_s": 1e-6,
        "noise_std": "vacuum",
        "delay_s": 0.0,
        "estimate_delay": False,
        "calibration_amplitude": 50.0,
        "crosstalk": [[1.0, 0.0], [0.0, 1.0]],
        "trace_x": None,
        "trace_p": None,
        "vacuum_scale": 1.0,
        "vacuum_modes": 0,
    },
}
COMMON = {"seed": None, "threads": 1, "out": "cvlearn-out", "format": "csv"}


class ConfigError(Exception):
    pass


def _resolve(command, config_path, overrides):
    cfg = dict(COMMON)
    cfg.update(DEFAULTS[command])
    if config_path:
        try:
            with open(config_path) as fh:
                doc = json.load(fh)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
        if isinstance(doc, dict) and "manifest_version" in doc:
            if doc.get("command") != command:
                raise ConfigError(f"manifest is for {doc.get('command')!r}, not {command!r}")
            doc = doc["config"]
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(doc) - set(cfg)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(doc)
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    if cfg["format"] not in ("csv", "json"):
        raise ConfigError("format must be csv or json")
    if cfg["seed"] is None:
        cfg["seed"] = streams.fresh_seed()
        log.warning("no seed given; using seed %d", cfg["seed"])
    cfg["seed"] = int(cfg["seed"])
    if cfg["seed"] < 0 or cfg["seed"] >= 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    return cfg


def _set_threads(threads):
    import numba

    numba.set_num_threads(max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS)))


# -- builders -------------------------------------------------------------------


def _process_spec(cfg):
    n = int(cfg["n"])
    kind = cfg["process"]
    if kind == "three_peak":
        gamma = as_complex_vec(cfg["gamma"], name="gamma") if cfg["gamma"] is not None else np.full(n, 0.3 + 0.3j)
        return ThreePeakSpec(gamma, cfg["sigma"], cfg["epsilon0"])
    if kind == "gaussian":
        return GaussianSpec(n, cfg["sigma"])
    if kind == "fixed":
        if cfg["alpha0"] is None:
            raise ConfigError("fixed process needs alpha0")
        return FixedSpec(as_complex_vec(cfg["alpha0"], name="alpha0"))
    raise ConfigError(f"unknown process {kind!r}")


def _squeezing(cfg):
    return SqueezingSpec(cfg["squeezing_db"], cfg["transmissivity"])


def _drift(cfg):
    if cfg["drift_affine"] is not None:
        affine = np.asarray(cfg["drift_affine"], dtype=float)
    else:
        affine = rotation(cfg["drift_theta"])
    return DriftModel(affine, cfg["noise_scale"])


def _simulate_records(cfg, spec):
    squeezing = _squeezing(cfg)
    drift = _drift(cfg)
    records = simulate_bell_batch(spec, squeezing, drift, int(cfg["N"]), cfg["seed"], threads=cfg["threads"])
    if cfg.get("pilot_period"):
        records = inject_pilots(records, int(cfg["pilot_period"]), cfg["pilot_amplitude"], cfg["seed"], squeezing, drift)
    return records


def _finish(cfg, command, outputs, inputs=()):
    manifest = {
        "manifest_version": 1,
        "command": command,
        "version": __version__,
        "seed": cfg["seed"],
        "config": cfg,
        "inputs": {os.path.basename(p): file_blob_sha1(p) for p in inputs},
        "outputs": {os.path.basename(p): file_blob_sha1(p) for p in outputs},
    }
    write_json(os.path.join(cfg["out"], "manifest.json"), manifest)
    for p in outputs:
        print(p)


# -- commands -------------------------------------------------------------------


def cmd_simulate(cfg):
    spec = _process_spec(cfg)
    records = _simulate_records(cfg, spec)
    path = os.path.join(cfg["out"], "records.csv")
    meta = {
        "process": spec_to_dict(spec),
        "squeezing_db": cfg["squeezing_db"],
        "transmissivity": cfg["transmissivity"],
        "r_eff": effective_squeezing(_squeezing(cfg)),
        "drift_affine": _drift(cfg).affine,
        "noise_scale": cfg["noise_scale"],
        "pilot_period": cfg["pilot_period"],
        "pilot_amplitude": cfg["pilot_amplitude"],
        "seed": cfg["seed"],
    }
    write_records(path, records, meta)
    _finish(cfg, "simulate", [path, path + ".json"])


def cmd_reconstruct(cfg):
    inputs = []
    if cfg["records"]:
        path = cfg["records"]
        if not os.path.exists(path):
            raise ConfigError(f"records file not found: {path}")
        records, meta = read_records(path)
        inputs.append(path)
        if "process" not in meta:
            raise ConfigError("records carry no truth spec (missing metadata sidecar)")
        spec = spec_from_dict(meta["process"])
        r_eff = meta.get("r_eff", 0.0)
    else:
        spec = _process_spec(cfg)
        records = _simulate_records(cfg, spec)
        r_eff = effective_squeezing(_squeezing(cfg))
    r_eff = float(r_eff)
    rspec = ReconSpec(
        cfg["epsilon"],
        cfg["delta"],
        cfg["b_max"],
        cfg["grid_step"],
        int(cfg["repeats"]),
        int(cfg["max_rounds"]),
        int(cfg["keep_last"]),
        40 if cfg["warm_start"] else 0,
    )
    affine = estimate_affine(records, cfg["pilot_amplitude"]) if cfg["correct_drift"] else None
    n = records.n
    direction = peak_direction(n)
    b_grid = slice_grid(cfg["slice_b_max"] if cfg["slice_b_max"] is not None else rspec.b_max, rspec.grid_step)
    curve = reconstruct_slice(records, direction, b_grid, r_eff, affine)
    truth = slice_truth(spec, direction, b_grid)
    fmt = cfg["format"]
    outputs = []
    slice_path = os.path.join(cfg["out"], f"slice.{fmt}")
    rows = [(b, v.real, v.imag, abs(v), t.real, t.imag) for (b, v), t in zip(curve, truth)]
    write_table(slice_path, ["b", "re", "im", "abs", "truth_re", "truth_im"], rows, fmt)
    outputs.append(slice_path)
    sweep_dirs = {}
    if cfg["sweep_overlaps"]:
        rng = streams.child_rng(cfg["seed"], streams.SWEEP)
        sweep_dirs = sweep_directions(direction, cfg["sweep_overlaps"], rng, int(cfg["sweep_per_overlap"]))
    if cfg["complexity"] or sweep_dirs:
        dirs = {"peak": direction}
        dirs.update(sweep_dirs)
        pool = SlicePool.from_records(_corrected_outcomes(records, affine), dirs)
    result = {"seed": cfg["seed"], "spec": vars(rspec), "r_eff": r_eff}
    if cfg["complexity"]:
        est = sample_complexity_recon(pool, rspec, spec, r_eff, cfg["seed"], column="peak")
        result.update(est.as_dict())
        result["hoeffding_upper"] = float(hoeffding_upper(r_eff, pool.norm_sq[0] * rspec.b_max**2, rspec.epsilon, rspec.delta))
    path = os.path.join(cfg["out"], "complexity.json")
    write_json(path, result)
    outputs.append(path)
    if sweep_dirs:
        N = cfg["sweep_N"] or result.get("mean_N")
        if N is None:
            raise ConfigError("sweep needs sweep_N when complexity is disabled")
        rows = direction_sweep(
            pool, cfg["sweep_overlaps"], N, rspec, spec, r_eff, cfg["seed"], int(cfg["sweep_per_overlap"]), cfg["sweep_repeats"]
        )
        path = os.path.join(cfg["out"], f"sweep.{fmt}")
        write_table(path, ["overlap", "success", "stderr"], rows, fmt)
        outputs.append(path)
    _finish(cfg, "reconstruct", outputs, inputs)


def _corrected_outcomes(records, affine):
    z = records.data()
    if affine is None:
        return z
    # Im(zeta^dag A d / det A) = Im((M zeta)^dag d) with M = J^T A^T J / det A,
    # so projecting M zeta on d is the drift-corrected estimator.
    j = np.array([[0.0, -1.0], [1.0, 0.0]])
    m = j.T @ affine.T @ j / np.linalg.det(affine)
    return (m[0, 0] * z.real + m[0, 1] * z.imag) + 1j * (m[1, 0] * z.real + m[1, 1] * z.imag)


def cmd_hypotest(cfg):
    gspec = GameSpec(
        int(cfg["n"]),
        int(cfg["K"]),
        cfg["kappa"],
        cfg["sigma"],
        cfg["epsilon0"],
        cfg["threshold"],
        int(cfg["N"]),
        bool(cfg["balanced"]),
        cfg["statistic"],
    )
    squeezing = _squeezing(cfg)
    r_eff = effective_squeezing(squeezing)
    instance = deal(gspec, cfg["seed"])
    N = int(cfg["N"])
    pool_size = int(cfg["pool_size"] or 10 * N)
    pools = GamePools.simulate(instance, squeezing, None, pool_size, cfg["seed"], threads=cfg["threads"])
    res = success_probability(instance, pools, N, gspec, r_eff, cfg["seed"], int(cfg["repeats"]))
    outputs = []
    path = os.path.join(cfg["out"], "transcript.json")
    write_json(path, transcript(instance, gspec, res, blind=cfg["blind"]), sort_keys=False)
    outputs.append(path)
    if not cfg["blind"]:
        n_c = equivalent_classical_N(max(res.P, 0.5), gspec.epsilon0, gspec.kappa, gspec.sigma, gspec.n)
        p_c = classical_success_bound(N, gspec.epsilon0, gspec.kappa, gspec.sigma, gspec.n)
        row = (gspec.n, cfg["squeezing_db"], N, res.P, res.dP, res.raw, float(n_c), p_c)
        path = os.path.join(cfg["out"], f"summary.{cfg['format']}")
        write_table(path, ["n", "squeezing_db", "N", "P", "dP", "raw", "N_c", "P_c"], [row], cfg["format"])
        outputs.append(path)
        if cfg["P_target"] is not None:
            est = sample_complexity_hypo(
                pools, instance, gspec, cfg["P_target"], r_eff, cfg["seed"],
                repeats=int(cfg["repeats"]), warm_start_steps=40 if cfg["warm_start"] else 0,
            )
            out = est.as_dict()
            out.update({"seed": cfg["seed"], "P_target": cfg["P_target"], "r_eff": r_eff})
            out["N_c"] = float(equivalent_classical_N(cfg["P_target"], gspec.epsilon0, gspec.kappa, gspec.sigma, gspec.n))
            path = os.path.join(cfg["out"], "complexity.json")
            write_json(path, out)
            outputs.append(path)
    _finish(cfg, "hypotest", outputs)


def _as_list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


def cmd_bounds(cfg):
    columns = [
        "n", "kappa", "squeezing_db", "hoeffding_upper", "classical_lower_sigma0",
        "classical_lower_sigma", "sigma_applicable", "P_c", "N_c", "N_c_time_s",
    ]
    rows = []
    for n in _as_list(cfg["n"]):
        for kappa in _as_list(cfg["kappa"]):
            for db in _as_list(cfg["squeezing_db"]):
                r_eff = effective_squeezing(SqueezingSpec(db))
                hu = hoeffding_upper(r_eff, kappa * n, cfg["epsilon"], cfg["delta"])
                lo0 = classical_lower(cfg["m"], n, kappa, cfg["epsilon"], 0.0)
                lo = classical_lower(cfg["m"], n, kappa, cfg["epsilon"], cfg["sigma"])
                p_c = classical_success_bound(cfg["N"], cfg["epsilon0"], kappa, cfg["sigma"], n)
                n_c = math.nan
                t_c = math.nan
                if cfg["P_suc"] is not None:
                    n_c = float(equivalent_classical_N(cfg["P_suc"], cfg["epsilon0"], kappa, cfg["sigma"], n))
                    t_c = acquisition_time(n_c, n, cfg["mode_rate_hz"])
                rows.append((n, kappa, db, float(hu), float(lo0), float(lo), lo.applicable, p_c, n_c, t_c))
    path = os.path.join(cfg["out"], f"bounds.{cfg['format']}")
    write_table(path, columns, rows, cfg["format"])
    widths = [max(len(c), 12) for c in columns]
    print("  ".join(c.rjust(w) for c, w in zip(columns, widths)))
    for r in rows:
        print("  ".join((f"{v:.4g}" if isinstance(v, float) else str(v)).rjust(w) for v, w in zip(r, widths)))
    if cfg["P_suc"] is not None:
        for r in rows:
            if math.isfinite(r[-1]):
                print(f"n={r[0]}: classical acquisition time {format_duration(r[-1])}")
    _finish(cfg, "bounds", [path])


def _load_trace(path):
    if not os.path.exists(path):
        raise ConfigError(f"trace file not found: {path}")
    return read_trace_csv(path) if path.endswith(".csv") else read_trace(path)


def cmd_trace(cfg):
    mspec = ModeFunctionSpec(cfg["sideband_hz"], cfg["envelope_kappa_rad_s"], cfg["mode_duration_s"])
    rate = cfg["sample_rate_hz"]
    rng = streams.child_rng(cfg["seed"], streams.TRACE)
    inputs, outputs = [], []
    noise = vacuum_noise_std(mspec, rate) if cfg["noise_std"] == "vacuum" else float(cfg["noise_std"])
    crosstalk = np.asarray(cfg["crosstalk"], dtype=float)
    delay = float(cfg["delay_s"])
    if cfg["trace_x"] or cfg["trace_p"]:
        if not (cfg["trace_x"] and cfg["trace_p"]):
            raise ConfigError("trace_x and trace_p must be given together")
        tx, tp = _load_trace(cfg["trace_x"]), _load_trace(cfg["trace_p"])
        inputs += [cfg["trace_x"], cfg["trace_p"]]
    else:
        if cfg["displacements"] is not None:
            d = as_complex_vec(cfg["displacements"], name="displacements")
        else:
            d = cfg["amplitude"] * (rng.standard_normal(int(cfg["n_modes"])) + 1j * rng.standard_normal(int(cfg["n_modes"])))
        tx = synth_trace(d, "x", mspec, noise, delay, crosstalk, rng, rate)
        tp = synth_trace(d, "p", mspec, noise, delay, crosstalk, rng, rate)
        for name, tr in (("trace_x.bin", tx), ("trace_p.bin", tp)):
            path = os.path.join(cfg["out"], name)
            write_trace(path, tr)
            outputs.append(path)
    if cfg["estimate_delay"]:
        cal = synth_trace([cfg["calibration_amplitude"]], "x", mspec, noise, delay, np.eye(2), rng, rate)
        delay = estimate_delay(cal, mspec)
        log.info("estimated delay %.4g s", delay)
    scale = float(cfg["vacuum_scale"])
    if cfg["vacuum_modes"]:
        vac = synth_trace(np.zeros(int(cfg["vacuum_modes"])), "x", mspec, noise, 0.0, np.eye(2), rng, rate)
        scale = calibrate_vacuum_scale(vac, mspec)
    qx = extract_quadratures(tx, mspec, delay, scale)
    qp = extract_quadratures(tp, mspec, delay, scale)
    count = min(qx.size, qp.size)
    rows = [(k, qx[k], qp[k]) for k in range(count)]
    path = os.path.join(cfg["out"], f"quadratures.{cfg['format']}")
    write_table(path, ["mode_index", "x", "p"], rows, cfg["format"])
    outputs.append(path)
    _finish(cfg, "trace", outputs, inputs)


COMMANDS = {
    "simulate": cmd_simulate,
    "reconstruct": cmd_reconstruct,
    "hypotest": cmd_hypotest,
    "bounds": cmd_bounds,
    "trace": cmd_trace,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="cvlearn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat JSON config or a previous manifest.json")
        p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
        p.add_argument("--threads", type=int, help="parallelism cap; outputs do not depend on it")
        p.add_argument("--out", help="output directory")
        p.add_argument("--format", choices=["csv", "json"], help="table format")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    overrides = {"seed": args.seed, "threads": args.threads, "out": args.out, "format": args.format}
    try:
        cfg = _resolve(args.command, args.config, overrides)
        os.makedirs(cfg["out"], exist_ok=True)
        _set_threads(cfg["threads"])
        COMMANDS[args.command](cfg)
    except Inapplicable as exc:
        print(f"cvlearn: inapplicable: {exc}", file=sys.stderr)
        return EXIT_INAPPLICABLE
    except (ConfigError, RejectedInput, KeyError, TypeError, ValueError) as exc:
        print(f"cvlearn: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
