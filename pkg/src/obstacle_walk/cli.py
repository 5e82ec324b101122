"""Command-line driver: deterministic experiment runs emitting CSV/JSON.

Every subcommand is a pure function of its effective configuration, which
is a flat JSON file (--config) overridden by explicit flags.  All numbers
are written with 17 significant digits, so reruns are byte-identical.

Exit status: 0 on success, 2 on usage errors (bad flags, missing values,
unreadable files), 3 when the requested instance is infeasible -- the
diagnostic is then printed as a JSON object.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import mc, mrp, ruin
from . import survival as sv
from .env import load_env, sample_env, save_env
from .gapsel import WindowExhausted, localization_env, select
from .mc import Infeasible, _g17, _write_frame


class _Usage(Exception):
    pass


def _load_config(path):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise _Usage(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise _Usage(f"config is not valid JSON: {e}")
    if not isinstance(cfg, dict):
        raise _Usage("config must be a flat JSON object")
    return cfg


def _value(args, cfg, key, default=None):
    v = getattr(args, key, None)
    if v is not None:
        return v
    return cfg.get(key, default)


def _require(args, cfg, key, cast=None):
    v = _value(args, cfg, key)
    if v is None:
        raise _Usage(f"--{key} is required for '{args.cmd}'")
    return cast(v) if cast else v


def _json_line(obj):
    """Flat JSON with fixed 17-digit floats (dict insertion order kept)."""
    parts = []
    for k, v in obj.items():
        if isinstance(v, (bool, np.bool_)):
            s = "true" if v else "false"
        elif isinstance(v, (int, np.integer)):
            s = str(int(v))
        elif isinstance(v, (float, np.floating)):
            s = _g17(float(v))
        elif v is None:
            s = "null"
        else:
            s = json.dumps(v)
        parts.append(f'"{k}": {s}')
    return "{" + ", ".join(parts) + "}"


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _emit_frame(frame, out):
    if out is None:
        formatted = frame.astype(object).apply(lambda col: col.map(_g17))
        sys.stdout.write(formatted.to_csv(index=False))
    else:
        _write_frame(frame, out)


def _load_env_arg(args, cfg):
    path = _require(args, cfg, "env")
    try:
        return load_env(path)
    except FileNotFoundError:
        raise _Usage(f"environment file not found: {path}")


# ---------------------------------------------------------------------------
# subcommands


def _run_env(args, cfg):
    gamma = _require(args, cfg, "gamma", float)
    seed = _require(args, cfg, "seed", int)
    count = _require(args, cfg, "n", int)
    out = _value(args, cfg, "out")
    if out is None:
        raise _Usage("--out is required for 'env'")
    save_env(sample_env(gamma, count, seed), out)
    return 0


def _run_ruin(args, cfg):
    t = _value(args, cfg, "t")
    if t is None and _value(args, cfg, "env") is not None:
        env = _load_env_arg(args, cfg)
        if not env.is_homogeneous:
            raise _Usage("'ruin' needs equally spaced obstacles; pass t "
                         "via config or a homogeneous env file")
        t = int(env.gaps[0])
    if t is None:
        raise _Usage("'ruin' needs a gap width: config key \"t\" or --env")
    t = int(t)
    nmax = _require(args, cfg, "n", int)
    rows = {
        "t": np.full(nmax, t),
        "n": np.arange(1, nmax + 1),
        "q0": [ruin.q0(t, m) for m in range(1, nmax + 1)],
        "q1": [ruin.q1(t, m) for m in range(1, nmax + 1)],
        "q": [ruin.q(t, m) for m in range(1, nmax + 1)],
    }
    _emit_frame(pd.DataFrame(rows), _value(args, cfg, "out"))
    return 0


def _run_survive(args, cfg):
    env = _load_env_arg(args, cfg)
    n = _require(args, cfg, "n", int)
    beta = _require(args, cfg, "beta", float)
    mode = _value(args, cfg, "mode", "bold")
    curve = sv.survive_log_curve(env, n, beta, mode=mode)
    frame = pd.DataFrame({"n": np.arange(n + 1), "logZ": curve})
    _emit_frame(frame, _value(args, cfg, "out"))
    return 0


def _run_select(args, cfg):
    env = _load_env_arg(args, cfg)
    n = _require(args, cfg, "n", int)
    beta = _require(args, cfg, "beta", float)
    sel = select(env, n, beta)
    record = {
        "ell0": sel.ell0,
        "ell0_tilde": sel.ell0_tilde,
        "k0": sel.k0,
        "T1": sel.T1,
        "T2": sel.T2,
        "Iloc_lo": sel.I_loc[0],
        "Iloc_hi": sel.I_loc[1],
        "agree": sel.agree,
    }
    _emit(_json_line(record) + "\n", _value(args, cfg, "out"))
    return 0


def _run_fe(args, cfg):
    env = _load_env_arg(args, cfg)
    n = _require(args, cfg, "n", int)
    beta = _require(args, cfg, "beta", float)
    sel = select(env, n, beta)
    kern = mrp.build_kernel(localization_env(sel), beta)
    record = {
        "T1": kern.T1,
        "T2": kern.T2,
        "phi": kern.phi,
        "g_T1": kern.g_T1,
        "phi_hom_T1": sv.phi_hom(beta, kern.T1),
        "phi_unitgaps": mrp.unit_gap_reference(kern.T1, beta).phi,
        "h_ratio": kern.h_ratio,
        "eps_coeff": kern.eps_coeff,
    }
    _emit(_json_line(record) + "\n", _value(args, cfg, "out"))
    return 0


def _run_simulate(args, cfg):
    env = _load_env_arg(args, cfg)
    n = _require(args, cfg, "n", int)
    beta = _require(args, cfg, "beta", float)
    reps = _require(args, cfg, "reps", int)
    seed = _require(args, cfg, "seed", int)
    mode = _value(args, cfg, "mode", "bold")
    rows = []
    for rep in range(reps):
        rng = np.random.default_rng(np.random.SeedSequence([seed, rep]))
        path, alive = mc.sample_direct(env, n, beta, rng, mode=mode)
        rows.append((rep, int(alive), len(path) - 1, int(path[-1])))
    frame = pd.DataFrame(rows, columns=["replica", "survived", "steps", "final"])
    _emit_frame(frame, _value(args, cfg, "out"))
    return 0


def _run_localize(args, cfg):
    mode = _value(args, cfg, "mode", "bold")
    if mode != "bold":
        raise _Usage("'localize' runs the bold (hard wall) model only")
    frame = mc.localization_experiment(
        _require(args, cfg, "gamma", float),
        _require(args, cfg, "beta", float),
        _require(args, cfg, "n", int),
        _require(args, cfg, "reps", int),
        _require(args, cfg, "seed", int),
        threads=int(_value(args, cfg, "threads", _default_threads())),
        out=_value(args, cfg, "out"),
    )
    if _value(args, cfg, "out") is None:
        _emit_frame(frame, None)
    return 0


_SUITES = {
    "env": "test_env.py",
    "ruin": "test_ruin.py",
    "survival": "test_survival.py",
    "gapsel": "test_gapsel.py",
    "mrp": "test_mrp.py",
    "mc": "test_mc.py",
    "cli": "test_cli.py",
    "acceptance": "test_acceptance.py",
}


def _run_verify(args, cfg):
    import pytest

    tests = Path(__file__).resolve().parents[2] / "tests"
    if not tests.is_dir():
        raise _Usage(f"test suite not found at {tests}")
    suite = _value(args, cfg, "suite", "all")
    if suite == "all":
        target = tests
    elif suite in _SUITES:
        target = tests / _SUITES[suite]
    else:
        raise _Usage(f"unknown suite '{suite}'; pick one of "
                     f"{['all'] + sorted(_SUITES)}")
    # -s so the acceptance criteria print their measured-vs-expected lines
    return pytest.main(["-q", "-s", str(target)])


_RUNNERS = {
    "env": _run_env,
    "ruin": _run_ruin,
    "survive": _run_survive,
    "select": _run_select,
    "fe": _run_fe,
    "simulate": _run_simulate,
    "localize": _run_localize,
    "verify": _run_verify,
}


def _default_threads():
    try:
        return int(os.environ.get("OBSTACLE_WALK_THREADS", "1"))
    except ValueError:
        return 1


def _build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat JSON config; flags win")
    common.add_argument("--gamma", type=float)
    common.add_argument("--beta", type=float)
    common.add_argument("--n", type=int)
    common.add_argument("--reps", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--env", help="environment file (save_env format)")
    common.add_argument("--out", help="output file; default stdout")
    common.add_argument("--mode", choices=["bold", "soft"])
    common.add_argument("--threads", type=int)
    common.add_argument("--suite", help="verify: one module suite or 'all'")

    parser = argparse.ArgumentParser(
        prog="obstacle-walk",
        description="random walk among renewal obstacles: exact numerics "
                    "and localization experiments",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)
    for name, helptext in [
        ("env", "sample an environment and save it"),
        ("ruin", "ruin / confinement probabilities for equal gaps (CSV)"),
        ("survive", "log-survival curve for a saved environment (CSV)"),
        ("select", "record-gap selection for (env, n, beta) (JSON)"),
        ("fe", "free energy and kernel summary for (env, n, beta) (JSON)"),
        ("simulate", "direct killed-walk runs (CSV)"),
        ("localize", "conditioned-path localization experiment (CSV)"),
        ("verify", "run the property/acceptance suites"),
    ]:
        sub.add_parser(name, parents=[common], help=helptext)
    return parser


def main(argv=None):
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as e:
        return e.code
    try:
        cfg = _load_config(args.config) if args.config else {}
        return _RUNNERS[args.cmd](args, cfg)
    except _Usage as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (Infeasible, WindowExhausted) as e:
        diag = {"error": "infeasible", "detail": str(e)}
        diag.update(getattr(e, "diagnostics", None) or {})
        print(_json_line(diag))
        return 3


if __name__ == "__main__":
    sys.exit(main())
