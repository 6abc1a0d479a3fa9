"""Command-line front end: slwlab <command> [--flags] [--config file.toml].

Exit codes: 0 all verdicts true, 1 some verdict false, 2 usage or config
error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import math
import os
import platform
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np
import scipy

from . import experiments as exp
from .model import ModelParams, ParameterError, Sign, derive_exponents, full_exponents
from .ode import (
    blowup_time,
    closed_form_blowup_time,
    closed_form_k0,
    conserved_quantity,
    integrate_base,
)

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

EXIT_OK, EXIT_VERDICT, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3
COMMANDS = ("exponents", "ode", "blowup", "norms", "dispersion", "inflate", "focusing")


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------- key types


def _float(v) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float, str)):
        raise TypeError("expected a number")
    return float(v)


def _int(v) -> int:
    if isinstance(v, bool):
        raise TypeError("expected an integer")
    if isinstance(v, float) and not v.is_integer():
        raise TypeError("expected an integer")
    if isinstance(v, str):
        return int(v)
    if not isinstance(v, (int, float)):
        raise TypeError("expected an integer")
    return int(v)


def _floats(v) -> list[float]:
    if isinstance(v, str):
        parts = [p for p in v.split(",") if p.strip()]
        return [float(p) for p in parts]
    if isinstance(v, (list, tuple)):
        return [_float(x) for x in v]
    raise TypeError("expected a comma-separated list of numbers")


def _sign(v) -> str:
    return Sign(str(v)).value


def _bool(v) -> bool:
    if isinstance(v, bool):
        return v
    if isinstance(v, str) and v.lower() in ("true", "false"):
        return v.lower() == "true"
    raise TypeError("expected true or false")


@dataclass(frozen=True)
class Key:
    conv: Callable[[Any], Any]
    default: Any = None
    required: bool = False
    help: str = ""


REQUIRED = dict(required=True)

_MODEL = {
    "k": Key(_float, **REQUIRED, help="power of |u|"),
    "l": Key(_float, **REQUIRED, help="power of |u_t|"),
    "n": Key(_int, 1, help="space dimension"),
    "sign": Key(_sign, "defocusing", help="defocusing or focusing"),
}

SCHEMAS: dict[str, dict[str, Key]] = {
    "exponents": {**_MODEL, "cap": Key(_int, 8, help="regularity cap for k + l odd")},
    "ode": {
        **_MODEL,
        "t_end": Key(_float, 10.0),
        "tol": Key(_float, 1e-10),
        "oracle_tol": Key(_float, 1e-8),
    },
    "blowup": {
        **_MODEL,
        "sign": Key(_sign, "focusing"),
        "tol": Key(_float, 1e-10),
        "oracle_tol": Key(_float, 1e-4),
    },
    "norms": {
        **_MODEL,
        "s_list": Key(_floats, [-1.0, -0.5, 0.0, 0.5, 1.0]),
        "a_list": Key(_floats, [2.0, 4.0]),
        "L": Key(_float, 256.0),
        "M": Key(_int, 2**14),
        "data_s_list": Key(_floats, [0.25, -0.75]),
        "gamma": Key(_float, 0.1),
        "ratio_list": Key(_floats, [1e-2, 1e-3]),
    },
    "dispersion": {
        **_MODEL,
        "gammas": Key(_floats, **REQUIRED),
        "T": Key(_float, 1.0),
        "m": Key(_int),
        "L": Key(_float, 8.0),
        "M": Key(_int, 4096),
        "n_samples": Key(_int, 11),
        "min_slope": Key(_float, 0.45),
    },
    "inflate": {
        **_MODEL,
        "s": Key(_float, **REQUIRED),
        "epsilon": Key(_float, **REQUIRED),
        "gammas": Key(_floats, **REQUIRED),
        "q": Key(_int),
        "t0_threshold": Key(_float, 1e-3),
        "data_scale": Key(_float, 1.0),
        "L": Key(_float, 16.0),
        "M": Key(_int, 4096),
        "min_final_ratio": Key(_float, 5.0),
        "exponent_tol": Key(_float, 0.2),
    },
    "focusing": {
        **_MODEL,
        "sign": Key(_sign, "focusing"),
        "a_list": Key(_floats, **REQUIRED),
        "s_list": Key(_floats, [0.0, 0.25]),
        "d": Key(_float, 0.25),
        "L_over_a": Key(_float, 32.0),
        "M": Key(_int, 4096),
        "dealias": Key(_bool, False),
    },
}


@dataclass(frozen=True)
class RunConfig:
    command: str
    values: dict
    out_dir: Path
    jobs: int = 1


def _flag(key: str) -> str:
    return "--" + key.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slwlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd, schema in SCHEMAS.items():
        sp = sub.add_parser(cmd)
        for key, spec in schema.items():
            sp.add_argument(_flag(key), dest=key, default=None, help=spec.help or None)
        _common(sp)
    rp = sub.add_parser("replay", help="re-run a config-echo.toml")
    rp.add_argument("echo", help="path to config-echo.toml")
    _common(rp, with_config=False)
    return parser


def _common(sp: argparse.ArgumentParser, with_config: bool = True) -> None:
    if with_config:
        sp.add_argument("--config", default=None, help="TOML file with keys for this command")
    sp.add_argument("--out", default=None, help="output directory (SLWLAB_OUT takes precedence)")
    sp.add_argument("--jobs", default="1", help="concurrent sweep points")


def _load_toml(path: str | Path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"invalid TOML in {path}: {e}") from None


def resolve(command: str, file_values: dict, flag_values: dict) -> dict:
    """Merge file and flag values (flags win), convert types, reject unknown or missing keys."""
    schema = SCHEMAS[command]
    file_values = dict(file_values)
    file_cmd = file_values.pop("command", command)
    if file_cmd != command:
        raise ConfigError(f"config file is for command {file_cmd!r}, not {command!r}")
    for key in file_values:
        if key not in schema:
            raise ConfigError(f"unknown key {key!r} for command {command!r}")
    merged = {**file_values, **{k: v for k, v in flag_values.items() if v is not None}}
    out = {}
    for key, spec in schema.items():
        if key not in merged:
            if spec.required:
                raise ConfigError(f"missing required key {key!r}")
            out[key] = spec.default
            continue
        try:
            out[key] = spec.conv(merged[key])
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad value for key {key!r}: {merged[key]!r} ({e})") from None
    return out


def parse_config(argv: list[str]) -> RunConfig:
    parser = build_parser()
    ns = parser.parse_args(argv)  # argparse exits with status 2 on unknown flags
    if ns.command == "replay":
        file_values = _load_toml(ns.echo)
        command = file_values.get("command")
        if command not in SCHEMAS:
            raise ConfigError(f"config echo names no known command: {command!r}")
        flags = {}
    else:
        command = ns.command
        file_values = _load_toml(ns.config) if ns.config else {}
        flags = {k: getattr(ns, k) for k in SCHEMAS[command]}
    values = resolve(command, file_values, flags)
    try:
        jobs = int(ns.jobs)
    except ValueError:
        raise ConfigError(f"bad value for key 'jobs': {ns.jobs!r}") from None
    if jobs < 1:
        raise ConfigError("jobs must be >= 1")
    out = os.environ.get("SLWLAB_OUT") or ns.out or f"slwlab-out/{command}"
    cfg = RunConfig(command, values, Path(out), jobs)
    build_study(cfg)  # module preconditions surface as usage errors
    return cfg


# --------------------------------------------------------------------------- studies


def _params(v: dict) -> ModelParams:
    return ModelParams(v["k"], v["l"], v["n"], v["sign"])


def build_study(cfg: RunConfig) -> Callable[[], exp.ExperimentReport]:
    """Validate the config into a study object; returns a thunk that runs it."""
    v = cfg.values
    p = _params(v)
    c = cfg.command
    if c == "exponents":
        derive_exponents(p)
        return lambda: _exponents_report(p, v)
    if c == "ode":
        if v["t_end"] <= 0 or v["tol"] <= 0:
            raise ParameterError("t_end and tol must be positive")
        return lambda: _ode_report(p, v)
    if c == "blowup":
        if not p.focusing:
            raise ParameterError("blow-up needs the focusing sign")
        return lambda: _blowup_report(p, v)
    if c == "norms":
        ncfg = exp.NormsConfig(
            p, v["s_list"], v["a_list"], v["L"], v["M"], data_s_list=v["data_s_list"],
            gamma=v["gamma"], ratio_list=v["ratio_list"],
        )
        return lambda: exp.norms_study(ncfg)
    if c == "dispersion":
        dcfg = exp.DispersionConfig(
            p, v["gammas"], v["T"], v["m"], v["L"], v["M"], n_samples=v["n_samples"],
            min_slope=v["min_slope"],
        )
        return lambda: exp.dispersion_scaling_study(dcfg, cfg.jobs)
    if c == "inflate":
        icfg = exp.InflationConfig(
            p, v["s"], v["epsilon"], v["gammas"], q=v["q"], t0_threshold=v["t0_threshold"],
            data_scale=v["data_scale"], L=v["L"], M=v["M"], min_final_ratio=v["min_final_ratio"],
            exponent_tol=v["exponent_tol"],
        )
        return lambda: exp.inflation_run(icfg, cfg.jobs)
    if c == "focusing":
        fcfg = exp.FocusingConfig(
            p, v["a_list"], v["s_list"], v["d"], L_over_a=v["L_over_a"], M=v["M"],
            dealias=v["dealias"],
        )
        return lambda: exp.focusing_lifespan_study(fcfg, cfg.jobs)
    raise ConfigError(f"unknown command {c!r}")


def _exponents_report(p: ModelParams, v: dict) -> exp.ExperimentReport:
    ex = derive_exponents(p)
    rep = exp.ExperimentReport("exponents", dict(v))
    cols = {"alpha": [ex.alpha], "s_c": [ex.s_c], "s_tilde": [ex.s_tilde]}
    try:
        full = full_exponents(p, v["cap"])
        cols.update(m0=[full.m0], N=[full.N], m=[full.m], admissible=[True])
    except ParameterError as e:
        cols.update(m0=[None], N=[None], m=[None], admissible=[False])
        rep.metadata["note"] = str(e)
    rep.add_table("exponents", cols)
    return rep


def _ode_report(p: ModelParams, v: dict) -> exp.ExperimentReport:
    tr = integrate_base(p, v["t_end"], v["tol"])
    rep = exp.ExperimentReport("ode", dict(v))
    rep.add_table("trajectory", {"t": list(tr.times), "u": list(tr.u), "u_t": list(tr.u_t)})
    with np.errstate(all="ignore"):
        I = np.asarray(conserved_quantity(p, tr.u, tr.u_t), dtype=float)
    ok = np.isfinite(I)
    drift = float(np.max(np.abs(I[ok] - I[0])) / max(abs(I[0]), 1.0)) if ok.any() else math.nan
    summary = {"status": [tr.status.value], "t_cover": [tr.t_cover], "conserved_drift": [drift]}
    rep.add_table("summary", summary)
    rep.verdict("conserved_quantity", drift < v["oracle_tol"], "summary.conserved_drift")
    if p.k == 0:
        ref = closed_form_k0(p, tr.times)
        m = tr.times > 0
        err = float(np.max(np.abs(tr.u[m] - ref[m]) / np.abs(ref[m])))
        rep.add_table("oracle", {"closed_form": ["k=0"], "max_rel_err": [err]})
        rep.verdict("closed_form", err < v["oracle_tol"], "oracle.max_rel_err")
    return rep


def _blowup_report(p: ModelParams, v: dict) -> exp.ExperimentReport:
    br = blowup_time(p, v["tol"])
    rep = exp.ExperimentReport("blowup", dict(v))
    rep.add_table(
        "blowup",
        {
            "T_est": [br.T_est],
            "T_integrator": [br.T_integrator],
            "u_cap": [br.u_cap],
            "status": [br.status.value],
        },
    )
    if p.l == 2:
        ref = closed_form_blowup_time(p)
        rep.add_table("oracle", {"T_closed_form": [ref], "abs_err": [abs(br.T_est - ref)]})
        rep.verdict("closed_form", abs(br.T_est - ref) <= v["oracle_tol"], "oracle.abs_err")
    else:
        rep.metadata = {"extrapolated": True, "note": "l != 2: blow-up read from integrability of 1/f"}
    return rep


# --------------------------------------------------------------------------- output


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        s = exp.fmt_float(v)
        return s if any(ch in s for ch in ".en") else s + ".0"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return exp._quote(str(v))


def config_echo(cfg: RunConfig) -> str:
    lines = [f"command = {_toml_value(cfg.command)}"]
    for key in SCHEMAS[cfg.command]:
        val = cfg.values[key]
        if val is not None:
            lines.append(f"{key} = {_toml_value(val)}")
    return "\n".join(lines) + "\n"


def environment_stamp() -> dict:
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


def run(cfg: RunConfig) -> int:
    start = time.perf_counter()
    report = build_study(cfg)()
    report.metadata = {**report.metadata, "environment": environment_stamp()}
    out = cfg.out_dir
    report.write(out)
    (out / "config-echo.toml").write_text(config_echo(cfg), newline="\n")
    # wall time lives outside report.json so reports stay byte-reproducible
    wall = time.perf_counter() - start
    (out / "timing.json").write_text(exp.dumps({"wall_time_s": wall}) + "\n", newline="\n")
    for name, v in report.verdicts.items():
        print(f"{'PASS' if v.passed else 'FAIL'} {name} ({v.column}) {v.detail}".rstrip())
    print(f"wrote {out}")
    return EXIT_OK if report.passed else EXIT_VERDICT


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
    except SystemExit as e:  # argparse usage errors
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    except (ConfigError, ParameterError, ValueError) as e:
        print(f"slwlab: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return run(cfg)
    except Exception as e:  # noqa: BLE001 - any failure inside a study is a runtime error
        print(f"slwlab: runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
