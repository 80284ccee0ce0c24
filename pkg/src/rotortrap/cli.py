"""Command-line interface: ``rotortrap <command> [options]``.

Every command reads a flat ``key = value`` configuration (``--config``;
the built-in rod/trap preset when omitted), applies ``--set key=value``
overrides, writes CSV files into ``--out`` and finishes with
``manifest.txt`` listing the resolved configuration, seed, version and the
SHA-256 of every output file.

Exit codes: 0 ok, 2 configuration error, 3 numerical failure, 4 fit
non-convergence, 1 anything else.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import math
import os
import sys
import warnings

import numpy as np

from . import __version__
from .config import FIG3_CONFIG, Config, apply_overrides, body_from_config, load_config, parse_config, trap_from_config
from .errors import ConfigError, FitError, NumericalFailure, RotortrapError

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_FIT = 4


# ---------------------------------------------------------------- output helpers

class Run:
    """Collects output files for one command and writes the manifest."""

    def __init__(self, command, cfg: Config, out_dir, seed):
        self.command = command
        self.cfg = cfg
        self.out_dir = out_dir
        self.seed = seed
        self.files = []
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name):
        return os.path.join(self.out_dir, name)

    def write_csv(self, name, header, rows):
        with open(self.path(name), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        self.files.append(name)

    def write_report(self, name, items):
        with open(self.path(name), "w", encoding="utf-8", newline="\n") as fh:
            for key, value in items:
                fh.write(f"{key} = {_fmt(value)}\n")
        self.files.append(name)

    def finish(self):
        lines = [
            f"command = {self.command}",
            f"version = {__version__}",
            f"seed = {self.seed}",
        ]
        lines += [f"config.{k} = {self.cfg.values[k]}" for k in self.cfg.keys()]
        for name in self.files:
            with open(self.path(name), "rb") as fh:
                lines.append(f"sha256.{name} = {hashlib.sha256(fh.read()).hexdigest()}")
        with open(self.path("manifest.txt"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (tuple, list, np.ndarray)):
        return ",".join(_fmt(x) for x in v)
    return str(v)


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"{path}: empty CSV")
    return rows[0], rows[1:]


def _read_report(path):
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if "=" in line:
                k, v = (s.strip() for s in line.split("=", 1))
                out[k] = v
    return out


def _vec(text):
    return np.array([float(x) for x in text.split(",")])


# ---------------------------------------------------------------- commands

def cmd_simulate_pendulum(cfg, args, run):
    from .rotor1d import PendulumState, classify_regime, integrate_pendulum, librating_state, rotating_state

    trap = trap_from_config(cfg)
    body = body_from_config(cfg)
    init = cfg.get_str("sim.init", "librating")
    if init == "librating":
        state = librating_state(trap.omega_d)
    elif init in ("rotating", "rotating-", "rotating+"):
        state = rotating_state(trap.omega_d, -1 if init == "rotating-" else 1)
    elif init == "custom":
        state = PendulumState(cfg.get_float("sim.alpha0_rad"), cfg.get_float("sim.alpha_dot0_rad_s"))
    else:
        raise ConfigError(f"sim.init: unknown value {init!r}", cfg.lines.get("sim.init"))
    periods = cfg.get_float("sim.periods", 200)
    spp = cfg.get_int("sim.samples_per_period", 50)
    T = trap.period
    traj = integrate_pendulum(trap, body, state, periods * T, sample_dt=T / spp)
    run.write_csv("pendulum_trajectory.csv", traj.CSV_HEADER, traj.rows())
    label = classify_regime(trap, body, state)
    run.write_report("regime.txt", [("regime", label.regime.value), ("eta_rot", label.eta)])


def cmd_phase_diagram(cfg, args, run):
    from .floquet import stability_grid
    from .rotor1d import phase_diagram

    trap = trap_from_config(cfg)
    body = body_from_config(cfg)
    v0 = np.linspace(cfg.get_float("sweep.v0_min_volts", 200), cfg.get_float("sweep.v0_max_volts", 1000),
                     cfg.get_int("sweep.v0_points", 10))
    f_lo = cfg.get_float("sweep.f_min_hz", 1500)
    f_hi = cfg.get_float("sweep.f_max_hz", 12000)
    rng = (2 * math.pi * f_lo, 2 * math.pi * f_hi)
    diagram = phase_diagram(trap, body, v0, rng, jobs=args.jobs)
    run.write_csv("phase_diagram.csv", diagram.CSV_HEADER, diagram.rows())
    f_grid = np.geomspace(f_lo, f_hi, cfg.get_int("sweep.grid_f_points", 40))
    grid = stability_grid(trap, body, v0, 2 * math.pi * f_grid)
    run.write_csv("floquet_boundary.csv", ("v0_volts", "f_hz", "stable_bool"),
                  ((v, w / (2 * math.pi), s) for v, w, s in grid))
    if diagram.errors:
        run.write_report("phase_diagram_errors.txt", [(f"error{i}", e) for i, e in enumerate(diagram.errors)])


def _state3d(cfg):
    from .rotor3d import BodyState

    return BodyState.from_euler(
        cfg.get_float("sim3d.alpha0_rad", 0.01),
        cfg.get_float("sim3d.beta0_rad", math.pi / 2 + 0.01),
        cfg.get_float("sim3d.gamma0_rad", 0.01),
        cfg.get_float("sim3d.alpha_dot0_rad_s", 0.0),
        cfg.get_float("sim3d.beta_dot0_rad_s", 0.0),
        cfg.get_float("sim3d.gamma_dot0_rad_s", 0.0),
    )


def cmd_simulate_3d(cfg, args, run):
    from .rotor3d import com_secular_frequencies, integrate_rigid, libration_frequencies, rotating_frame_frequencies

    trap = trap_from_config(cfg)
    body = body_from_config(cfg)
    state = _state3d(cfg)
    T = trap.period
    periods = cfg.get_float("sim3d.periods", 200)
    spp = cfg.get_int("sim3d.samples_per_period", 16)
    traj = integrate_rigid(trap, body, state, periods * T, sample_dt=T / spp)
    run.write_csv("trajectory3d.csv", traj.CSV_HEADER, traj.rows())
    lib = libration_frequencies(trap, body)
    rot = rotating_frame_frequencies(trap, body)
    com = com_secular_frequencies(trap, body.q_tot, body.mass)
    two_pi = 2 * math.pi
    run.write_report("secular.txt", [
        ("libration_alpha_hz", lib.alpha / two_pi),
        ("libration_beta_hz", lib.beta / two_pi),
        ("libration_gamma_hz", lib.gamma / two_pi),
        ("libration_validity_parameter", lib.validity_parameter),
        ("libration_valid", lib.valid),
        ("rotating_alpha_hz", rot.alpha / two_pi),
        ("rotating_beta_hz", rot.beta / two_pi),
        ("rotating_gamma_hz", rot.gamma / two_pi),
        ("rotating_stable", rot.stable),
        ("com_x_hz", com.x / two_pi),
        ("com_y_hz", com.y / two_pi),
        ("com_z_hz", com.z / two_pi),
        ("com_valid", com.valid),
    ])


def cmd_psd(cfg, args, run):
    from .rotor3d import Trajectory3D
    from .signal import classify_psd, detection_signal, psd

    trap = trap_from_config(cfg)
    header, rows = _read_csv(args.trajectory)
    data = np.array(rows, dtype=float)
    col = {h: i for i, h in enumerate(header)}
    try:
        traj = Trajectory3D(data[:, col["t_s"]], data[:, [col["qw"], col["qx"], col["qy"], col["qz"]]],
                            data[:, [col["w1"], col["w2"], col["w3"]]])
    except KeyError as exc:
        raise ConfigError(f"{args.trajectory}: missing column {exc}") from None
    axis = np.asarray(cfg.get_vector("psd.axis", (math.sqrt(0.5), 0.0, math.sqrt(0.5))))
    axis = axis / np.linalg.norm(axis)
    marker = cfg.get_vector("psd.body_vector", (0.5, 0.0, math.sqrt(0.75)))
    s = detection_signal(traj, axis, marker, cfg.get_float("psd.noise_std", 0.0), seed=args.seed)
    skip = int(cfg.get_float("psd.skip_fraction", 0.2) * len(s))
    s = s[skip:]
    fs = 1.0 / float(traj.t[1] - traj.t[0])
    seg = args.psd_segments or cfg.get_int("psd.segment_length", min(4096, len(s)))
    overlap = cfg.get_float("psd.overlap", 0.5) if args.psd_overlap is None else args.psd_overlap
    spec = psd(s, fs, seg, overlap)
    run.write_csv("psd.csv", spec.CSV_HEADER, spec.rows())
    cls = classify_psd(spec, trap.omega_d, cfg.get_float("psd.threshold_db", 10.0))
    run.write_report("psd_classification.txt", [
        ("has_half_harmonic", cls.has_half_harmonic),
        ("has_micromotion", cls.has_micromotion),
        ("rbw_hz", spec.rbw_hz),
        ("total_power", spec.total_power()),
        ("mean_square", float(np.mean(s * s))),
    ] + [(f"peak{i}_hz", f) for i, (f, _) in enumerate(cls.peaks[:10])])


def _nv_model(cfg):
    from .nvspin import NvModel

    return NvModel.with_fwhm(cfg.get_float("nv.fwhm_mhz", 6.5) * 1e6, contrast=cfg.get_float("nv.contrast", 0.02))


def _rotation(cfg):
    from .nvspin import RotationModel
    from .rotor3d import Orientation

    axis = np.asarray(cfg.get_vector("nv.rot_axis", (0.3, -0.5, 0.81)))
    f_rot = cfg.get_float("nv.rot_freq_hz", cfg.get_float("trap.freq_hz", 4500) / 2)
    eul = cfg.get_vector("nv.orientation0_euler_rad", (0.4, 1.0, -0.3))
    return RotationModel(tuple(axis / np.linalg.norm(axis)), 2 * math.pi * f_rot, Orientation.from_euler(*eul))


def _field(cfg, key, default_dir):
    b = np.asarray(cfg.get_vector(key, default_dir))
    return cfg.get_float("nv.b_mT", 10.0) * 1e-3 * b / np.linalg.norm(b)


def _freq_grid(cfg, lo, hi, step):
    return np.arange(cfg.get_float("nv.f_min_hz", lo), cfg.get_float("nv.f_max_hz", hi), cfg.get_float("nv.f_step_hz", step))


def cmd_odmr(cfg, args, run):
    from .nvspin import odmr_continuous_rotating, odmr_spectrum_static

    model = _nv_model(cfg)
    rot = _rotation(cfg)
    B = _field(cfg, "nv.b_dir", (0.0, 0.0, 1.0))
    f = _freq_grid(cfg, 2.3e9, 3.45e9, 0.5e6)
    cont = odmr_continuous_rotating(rot, B, model, f, cfg.get_int("nv.samples_per_period", 256))
    static = odmr_spectrum_static(rot.orientation(0.0), B, model, f)
    run.write_csv("odmr_continuous.csv", ("f_hz", "pl_continuous", "pl_static_t0"), zip(f, cont, static))


def cmd_strobe(cfg, args, run):
    from .nvspin import strobe_map

    model = _nv_model(cfg)
    rot = _rotation(cfg)
    n = cfg.get_int("strobe.delays", 48)
    delays = np.arange(n) * rot.period / n
    f = _freq_grid(cfg, 2.55e9, 2.905e9, 0.25e6)
    tau = cfg.get_float("strobe.tau_s", 1e-3 * rot.period)
    noise = cfg.get_float("strobe.pl_noise", 0.0)
    rng = np.random.default_rng(args.seed)
    for label, key, default in (("B1", "nv.b1_dir", (1.0, 0.0, 0.0)), ("B2", "nv.b2_dir", (0.0, 1.0, 0.0))):
        B = _field(cfg, key, default)
        smap = strobe_map(rot, B, model, delays, f, tau, label)
        if noise > 0.0:
            pl = np.clip(smap.pl * (1.0 + rng.normal(0.0, noise, smap.pl.shape)), 1e-6, 1.0)
            smap = type(smap)(smap.delays, smap.freq_hz, pl, smap.tau, label)
        header, *rows = list(smap.rows())
        run.write_csv(f"strobe_{label}.csv", header, rows)
        run.write_report(f"strobe_{label}.meta", [
            ("b_tesla", B), ("omega_rot_rad_s", rot.omega_rot), ("tau_s", tau), ("D_hz", model.D),
            ("gamma_e_hz_per_t", model.gamma_e), ("linewidth_sigma_hz", model.linewidth_sigma),
            ("contrast", model.contrast), ("pl_noise", noise), ("seed", args.seed),
        ])


def _load_map(path):
    from .nvspin import StroboMap

    header, rows = _read_csv(path)
    data = np.array(rows, dtype=float)
    meta_path = os.path.splitext(path)[0] + ".meta"
    if not os.path.exists(meta_path):
        raise ConfigError(f"{path}: metadata sidecar {meta_path} not found")
    meta = _read_report(meta_path)
    smap = StroboMap(data[:, 0], np.array(header[1:], dtype=float), data[:, 1:], float(meta["tau_s"]))
    return smap, meta


def cmd_fit(cfg, args, run):
    from .nvspin import NvModel
    from .reconstruct import extract_resonances, fit_rotation

    maps = [_load_map(p) for p in args.maps]
    meta = maps[0][1]
    model = NvModel(D=float(meta["D_hz"]), gamma_e=float(meta["gamma_e_hz_per_t"]),
                    linewidth_sigma=float(meta["linewidth_sigma_hz"]), contrast=float(meta["contrast"]))
    omega_rot = float(meta["omega_rot_rad_s"])
    noise = cfg.get_float("fit.center_noise_hz", 0.0)
    if args.center_noise_mhz is not None:
        noise = args.center_noise_mhz * 1e6
        cfg.set("fit.center_noise_hz", repr(noise))
    traces, fields = [], []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for i, (smap, m) in enumerate(maps):
            tr = extract_resonances(smap, cfg.get_int("fit.n_lines", 4))
            if noise > 0.0:
                tr = tr.with_center_noise(noise, seed=args.seed + i)
            traces.append(tr)
            fields.append(_vec(m["b_tesla"]))
    n_starts = cfg.get_int("fit.n_starts", 32)
    if len(traces) == 1:
        res = fit_rotation(traces[0], fields[0], None, None, model, omega_rot, n_starts=n_starts, seed=args.seed)
    else:
        res = fit_rotation(traces[0], fields[0], traces[1], fields[1], model, omega_rot, n_starts=n_starts,
                           seed=args.seed)
    run.write_report("fit_report.txt", list(res.report()))
    from .reconstruct import predicted_lines

    rows = []
    for k, (tr, B) in enumerate(zip(traces, fields)):
        lines = predicted_lines(res.axis, res.orientation0.matrix, res.phase, B, model, omega_rot, tr.delays)
        for j, centers in enumerate(tr.centers):
            for c in np.sort(centers):
                pred = lines[j].ravel()
                rows.append((f"B{k + 1}", tr.delays[j], c, pred[np.argmin(np.abs(pred - c))]))
    run.write_csv("fit_lines.csv", ("field", "delay_s", "measured_hz", "fitted_hz"), rows)


COMMANDS = {
    "simulate-pendulum": (cmd_simulate_pendulum, "planar pendulum trajectory and regime"),
    "phase-diagram": (cmd_phase_diagram, "hysteresis boundaries and Floquet overlay"),
    "simulate-3d": (cmd_simulate_3d, "rigid-body trajectory and secular frequencies"),
    "psd": (cmd_psd, "PSD and regime signature of a 3-D trajectory"),
    "odmr": (cmd_odmr, "continuous ODMR of a rotating diamond"),
    "strobe": (cmd_strobe, "stroboscopic ODMR maps for two fields"),
    "fit": (cmd_fit, "rotation fit to stroboscopic maps"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="rotortrap", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="key = value configuration file (default: built-in preset)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a configuration key")
        p.add_argument("--out", default="out", help="output directory (default: %(default)s)")
        p.add_argument("--seed", type=int, default=0, help="seed for stochastic steps (default: %(default)s)")
        p.add_argument("--jobs", type=int, default=None, help="worker processes (default: $ROTORTRAP_JOBS or 1)")
        if name == "psd":
            p.add_argument("trajectory", help="trajectory3d.csv written by simulate-3d")
            p.add_argument("--psd-segments", type=int, default=None, help="Welch segment length (samples)")
            p.add_argument("--psd-overlap", type=float, default=None, help="fractional segment overlap")
        if name == "fit":
            p.add_argument("maps", nargs="+", help="one or two strobe_*.csv maps (with .meta sidecars)")
            p.add_argument("--center-noise-mhz", type=float, default=None,
                           help="Gaussian noise added to extracted line centers (MHz)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    func = COMMANDS[args.command][0]
    try:
        cfg = load_config(args.config) if args.config else parse_config(FIG3_CONFIG)
        apply_overrides(cfg, args.set)
        if args.jobs is not None and args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        if args.command == "fit" and len(args.maps) > 2:
            raise ConfigError("fit takes one or two maps")
        run = Run(args.command, cfg, args.out, args.seed)
        func(cfg, args, run)
        run.finish()
    except ConfigError as exc:
        print(f"rotortrap: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"rotortrap: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FitError as exc:
        print(f"rotortrap: fit failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FIT
    except (RotortrapError, ValueError, OSError) as exc:
        print(f"rotortrap: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
