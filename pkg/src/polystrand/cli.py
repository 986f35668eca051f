"""Command-line front end: ``polystrand --config run.json [--mode M] [--seed S] [--out DIR] [--quiet]``.

Exit codes: 0 success, 2 config error, 3 validation error, 4 numerical
blow-up, 5 verification failure.  Outputs are byte-identical for a fixed
config and seed; wall-clock runtimes are printed but never written.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import MODES, load_config
from .diagnostics import DiagnosticsReport, convergence_study, equivalence_error, reduced_report, unreduced_report
from .dynamics import initial_conditions, integrate_reduced, integrate_unreduced
from .errors import BlowUp, ConfigError, InvalidInput, PolystrandError, PreconditionError, ValidationError
from .identities import verify_all

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VALIDATION = 3
EXIT_BLOWUP = 4
EXIT_VERIFY = 5

REDUCED_HEADER = ["t", "s", "zeta_x", "zeta_y", "zeta_z", "sigma_t_x", "sigma_t_y", "sigma_t_z", "mu_t", "xi"]
UNREDUCED_HEADER = ["t", "s"] + [f"R{i}{j}" for i in range(3) for j in range(3)] + ["pt_x", "pt_y", "pt_z"]


def _write_csv(path, header, columns):
    """RFC-4180 CSV (CRLF line ends) with shortest round-trip float formatting."""
    rows = np.asarray(columns[0]).size
    data = np.concatenate([np.asarray(c, dtype=float).reshape(rows, -1) for c in columns], axis=1)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\r\n")
        for row in data:
            fh.write(",".join(repr(float(v)) for v in row) + "\r\n")


def _time_space(traj):
    T, N = len(traj), traj.grid.n_s
    t = np.broadcast_to(traj.times[:, None], (T, N))
    s = np.broadcast_to(traj.grid.s[None, :], (T, N))
    return t, s


def write_reduced_csv(path, traj):
    t, s = _time_space(traj)
    f = traj.field
    _write_csv(path, REDUCED_HEADER, [t, s, f.zeta, f.sigma_t, f.mu_t, f.xi])


def write_unreduced_csv(path, traj):
    t, s = _time_space(traj)
    f = traj.field
    T, N = t.shape
    _write_csv(path, UNREDUCED_HEADER, [t, s, f.R.reshape(T, N, 9), f.p_t])


def _strip_runtime(obj):
    if isinstance(obj, dict):
        return {k: _strip_runtime(v) for k, v in obj.items() if k != "runtime"}
    if isinstance(obj, list):
        return [_strip_runtime(v) for v in obj]
    return obj


def _convergence_dict(table, min_order):
    ok = table.exact or table.min_order() >= min_order
    return {
        "n_s": table.n_s,
        "ds": table.ds,
        "error": table.error,
        "order": "exact" if table.exact else table.order,
        "min_order_required": min_order,
        "verdict": "pass" if ok else "fail",
    }


class Runner:
    """Executes one configured run and collects the report."""

    def __init__(self, cfg, out_dir, log):
        self.cfg = cfg
        self.out = Path(out_dir)
        self.log = log
        self.report = DiagnosticsReport()
        self.status = EXIT_OK

    def _setup(self):
        cfg = self.cfg
        grid = cfg.build_grid()
        params = cfg.build_params()
        icfg = cfg.build_integrator(grid)
        try:
            u0, r0 = initial_conditions(
                cfg.initial.kind, grid, seed=cfg.initial.seed, params=params, **cfg.initial.parameters
            )
        except (InvalidInput, TypeError) as exc:
            raise ConfigError(f"initial: {exc}") from exc
        return grid, params, icfg, u0, r0

    def _path(self, name):
        self.out.mkdir(parents=True, exist_ok=True)
        return self.out / name

    def run(self):
        getattr(self, "_" + self.cfg.mode.replace("-", "_"))()
        self.report.validate()
        payload = {
            "version": __version__,
            "mode": self.cfg.mode,
            "config": self.cfg.to_dict(),
            "report": _strip_runtime(self.report.to_dict()),
        }
        with open(self._path("report.json"), "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
        return self.status

    def _simulate_unreduced(self):
        grid, params, icfg, u0, _ = self._setup()
        traj = integrate_unreduced(params, u0, grid, icfg, self.cfg.outputs.snapshot_stride)
        write_unreduced_csv(self._path("unreduced.csv"), traj)
        self.report = unreduced_report(params, traj, seed=self.cfg.initial.seed)
        self.log(f"unreduced run: {len(traj)} snapshots, energy {self.report.energy[-1]:.12g}")
        return traj, params

    def _simulate_reduced(self):
        grid, params, icfg, _, r0 = self._setup()
        traj = integrate_reduced(params, r0, grid, icfg, self.cfg.outputs.snapshot_stride)
        write_reduced_csv(self._path("reduced.csv"), traj)
        self.report = reduced_report(params, traj)
        self.log(f"reduced run: {len(traj)} snapshots, sum mu ds {self.report.total_mu[-1]:.12g}")
        return traj, params

    def _compare(self):
        tu, params = self._simulate_unreduced()
        rep_u = self.report
        tr, _ = self._simulate_reduced()
        self.report.bracket_residuals = rep_u.bracket_residuals
        err = equivalence_error(tu, tr, params)
        self.report.equivalence_error = [float(v) for v in err]
        self.log(f"equivalence error at t_end: {err[-1]:.3e}")
        n = self.cfg.grid.n_s
        if n // 4 >= 8 and n % 4 == 0:
            self._convergence([n // 4, n // 2, n], fail_exit=False)
        else:
            self.report.convergence = {"verdict": "skipped", "reason": "n_s must be a multiple of 4 and at least 32"}

    def _convergence(self, n_s_list=None, fail_exit=True):
        cfg = self.cfg
        params = cfg.build_params()
        n_s_list = n_s_list or cfg.convergence.n_s
        cfl = cfg.integrator.cfl
        if cfl is None:
            cfl = cfg.integrator.dt / (cfg.grid.length / cfg.grid.n_s)
        try:
            table = convergence_study(
                params,
                cfg.initial.kind,
                n_s_list,
                cfl=cfl,
                t_end=cfg.integrator.t_end,
                fd_order=cfg.integrator.fd_order,
                seed=cfg.initial.seed,
                length=cfg.grid.length,
                **cfg.initial.parameters,
            )
        except PreconditionError as exc:
            raise ValidationError(f"convergence: {exc}") from exc
        conv = _convergence_dict(table, cfg.convergence.min_order)
        self.report.convergence = conv
        self.log(f"convergence errors {table.error}, orders {conv['order']}: {conv['verdict']} ({table.runtime:.1f} s)")
        if conv["verdict"] == "fail" and fail_exit:
            self.status = EXIT_VERIFY

    def _verify_identities(self):
        v = self.cfg.verify
        results = verify_all(self.cfg.build_params(), n_points=v.points, seed=self.cfg.initial.seed, tol=v.tolerance)
        self.report.identities = [r.to_dict() for r in results]
        for r in results:
            self.log(f"{'PASS' if r.passed else 'FAIL'} {r.name:<20} {r.chart:<14} max {r.max_residual:.3e}")
        if not all(r.passed for r in results):
            self.status = EXIT_VERIFY


def build_parser():
    ap = argparse.ArgumentParser(prog="polystrand", description="Charged SO(3)-strand simulations and identity checks.")
    ap.add_argument("--config", required=True, help="path to the JSON run configuration")
    ap.add_argument("--mode", choices=MODES, help="override the configured mode")
    ap.add_argument("--seed", type=int, help="override initial.seed")
    ap.add_argument("--out", help="override outputs.directory")
    ap.add_argument("--quiet", action="store_true", help="suppress progress output")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    log = (lambda msg: None) if args.quiet else print

    def fail(code, kind, exc):
        print(f"polystrand: {kind}: {exc}", file=sys.stderr)
        return code

    try:
        cfg = load_config(args.config)
        if args.mode:
            cfg.mode = args.mode
        if args.seed is not None:
            cfg.initial.seed = args.seed
        out = args.out or cfg.outputs.directory
        return Runner(cfg, out, log).run()
    except ConfigError as exc:
        return fail(EXIT_CONFIG, "config error", exc)
    except BlowUp as exc:
        return fail(EXIT_BLOWUP, f"numerical blow-up at step {exc.step}", exc)
    except PolystrandError as exc:
        return fail(EXIT_VALIDATION, "validation error", exc)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
