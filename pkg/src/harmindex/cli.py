"""Command line entry point.

    harmindex verify-identities --degree 1 --sphere 3
    harmindex certify-energy --map identity3 --degree 1 --seed 42 --resolution 48
    harmindex certify-volume --map clifford
    harmindex flow-decay --map clifford --t-max 0.5
    harmindex report-all --resolution 16

Reports are JSON documents with sorted keys, one per suite, written to
``--output`` (default ``$HARMINDEX_OUTPUT`` or ``./harmindex-reports``).
Flow series are also written as two-column CSV.  Exit status is 0 when every
verdict passes, 1 on a failed verdict and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

from . import suites
from .maps import ZOO_TAGS, make_zoo_map
from .spectral import MAX_DEGREE, MAX_SPHERE_DIM

COMMANDS = ("verify-identities", "certify-energy", "certify-volume", "flow-decay", "report-all")
OUTPUT_ENV = "HARMINDEX_OUTPUT"
DEFAULT_OUTPUT = "harmindex-reports"

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


@dataclass(frozen=True)
class RunConfig:
    command: str
    map: str
    degree: int
    seed: int
    resolution: int
    t_max: float
    output_path: str
    sphere: int | None = None

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if self.resolution < 8:
            raise ValueError("resolution must be >= 8")
        if not 1 <= self.degree <= MAX_DEGREE:
            raise ValueError(f"degree must lie in 1..{MAX_DEGREE}")
        if self.t_max <= 0:
            raise ValueError("t-max must be positive")
        if self.sphere is not None and not 2 <= self.sphere <= MAX_SPHERE_DIM:
            raise ValueError(f"sphere must lie in 2..{MAX_SPHERE_DIM}")
        make_zoo_map(self.map, 8)  # rejects unknown tags early

    def echo(self) -> dict:
        d = asdict(self)
        d.pop("output_path")  # keep reports independent of where they land
        return d


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n"


def _write(out: Path, name: str, report: dict, config: RunConfig, log: list | None = None) -> bool:
    doc = dict(report)
    doc["config"] = config.echo()
    doc["tolerances"] = suites.TOLERANCES
    doc["resolution"] = config.resolution
    doc["passed"] = suites.suite_passed(report)
    (out / f"{name}.json").write_text(_dump(doc))
    if log is not None:
        log.append(f"{name}.json")
    return doc["passed"]


def _identities(config: RunConfig, out: Path, xfail: bool, log=None) -> list[bool]:
    spheres = [config.sphere] if config.sphere else list(range(2, MAX_SPHERE_DIM + 1))
    results = []
    for n in spheres:
        rep = suites.identity_suite(n, config.degree, config.seed, config.resolution,
                                    hessian_xfail=xfail and config.degree >= 2)
        results.append(_write(out, f"identities_S{n}_k{config.degree}", rep, config, log))
    return results


def _energy(config: RunConfig, out: Path, tag: str, log=None) -> bool:
    rep = suites.energy_suite(tag, config.degree, config.seed, config.resolution)
    return _write(out, f"certificate_energy_{tag}", rep, config, log)


def _volume(config: RunConfig, out: Path, tag: str, log=None) -> bool:
    rep = suites.volume_suite(tag, config.degree, config.seed, config.resolution)
    return _write(out, f"certificate_volume_{tag}", rep, config, log)


def _flow(config: RunConfig, out: Path, tag: str, log=None) -> bool:
    rep, series = suites.flow_suite(tag, config.degree, config.seed, config.resolution, config.t_max)
    for kind, s in series.items():
        (out / f"flow_{tag}_{kind}.csv").write_text(s.to_csv())
    rep.pop("series")  # the CSV files carry the samples
    return _write(out, f"flow_{tag}", rep, config, log)


def run(config: RunConfig) -> int:
    """Execute ``config`` and return the exit status."""
    out = Path(config.output_path)
    out.mkdir(parents=True, exist_ok=True)
    cmd = config.command
    if cmd == "verify-identities":
        ok = _identities(config, out, xfail=False)
    elif cmd == "certify-energy":
        ok = [_energy(config, out, config.map)]
    elif cmd == "certify-volume":
        ok = [_volume(config, out, config.map)]
    elif cmd == "flow-decay":
        ok = [_flow(config, out, config.map)]
    else:
        ok, log = [], []
        for degree in (1, 2):
            sub = RunConfig(**{**asdict(config), "degree": degree, "sphere": None if degree == 1 else 2})
            ok += _identities(sub, out, xfail=True, log=log)
        base = RunConfig(**{**asdict(config), "degree": 1})
        ok.append(_energy(base, out, "identity3", log))
        ok.append(_volume(base, out, "clifford", log))
        ok.append(_volume(base, out, "equator23", log))
        ok.append(_flow(base, out, "identity3", log))
        ok.append(_flow(base, out, "clifford", log))
        summary = {"suite": "report-all", "reports": log, "checks": {
            "all_suites": {"value": sum(ok), "tolerance": len(ok), "verdict": "PASS" if all(ok) else "FAIL"},
        }}
        _write(out, "summary", summary, config)
    return EXIT_OK if all(ok) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="harmindex", description="Index bounds for harmonic maps and minimal immersions into spheres.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--map", default="identity3", help=f"zoo map tag, one of {', '.join(ZOO_TAGS)}")
    p.add_argument("--degree", type=int, default=1, help="eigenvalue index of the test functions")
    p.add_argument("--sphere", type=int, default=None, help="sphere dimension for verify-identities")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resolution", type=int, default=24, help="quadrature nodes per angular direction")
    p.add_argument("--t-max", type=float, default=1.0, help="final flow time for flow-decay")
    p.add_argument("--output", default=None, help=f"report directory (default ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})")
    return p


def main(argv=None, environ=None) -> int:
    env = os.environ if environ is None else environ
    parser = build_parser()
    args = parser.parse_args(argv)
    config = RunConfig(
        command=args.command,
        map=args.map,
        degree=args.degree,
        seed=args.seed,
        resolution=args.resolution,
        t_max=args.t_max,
        output_path=args.output or env.get(OUTPUT_ENV, DEFAULT_OUTPUT),
        sphere=args.sphere,
    )
    try:
        config.validate()
    except ValueError as exc:
        parser.print_usage(sys.stderr)
        print(f"harmindex: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
