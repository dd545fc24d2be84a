"""Command-line front end: builds, samples, simulations, and report emission.

Every output file embeds the run configuration and the library version, so a
rerun with the same arguments reproduces it byte for byte.  Exit codes:
0 success, 2 configuration error, 3 numeric failure (JSON message on stderr).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import alpha_from_second_moment, condensed_fraction
from .ensembles import (
    OutOfDomainError,
    SupercriticalDensityError,
    build_logz,
    critical_density,
    invert_density,
    load_logz_cache,
    local_clt_report,
    phi_sequence,
    relative_entropy_bound,
    save_logz_cache,
    tv_distance_marginal,
)
from .sampler import SeededRng, sample_configurations, to_partition, Configuration
from .splitmerge import FUNCTION_LIBRARY, reversibility_defect, simulate
from .partitions import OrderedPartition
from .weights import WeightFamily, assumption_report


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Fully serialisable record of one CLI invocation."""

    command: str
    family: dict | None
    seed: int
    threads: int
    options: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "version": __version__,
            "command": self.command,
            "family": self.family,
            "seed": self.seed,
            "threads": self.threads,
            "options": self.options,
        }

    def header_lines(self) -> list[str]:
        return [
            f"# pdlab {__version__}",
            f"# config: {json.dumps(self.to_json_dict(), sort_keys=True)}",
        ]


def _load_family(args) -> WeightFamily:
    if not args.family:
        raise ConfigError("--family is required for this command")
    path = Path(args.family)
    if not path.exists():
        raise ConfigError(f"family file {path} does not exist")
    if path.suffix == ".csv":
        return WeightFamily.from_csv(path)
    return WeightFamily.from_json(path)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_text(path: Path, config: RunConfig, body: str) -> None:
    path.write_text("\n".join(config.header_lines()) + "\n" + body)


def _write_json(path: Path, config: RunConfig, payload) -> None:
    doc = {"config": config.to_json_dict(), "result": payload}
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_zn(args, config: RunConfig) -> int:
    family = _load_family(args)
    if args.L < 1:
        raise ConfigError("--L must be >= 1")
    if args.N < 0:
        raise ConfigError("--N must be >= 0")
    out = _out_dir(args)
    table = load_logz_cache(family, args.L, args.N, out)
    if table is None:
        table = build_logz(family, args.L, args.N)
        save_logz_cache(table, out)
    rows = ["n,logz"]
    rows += [f"{n},{float(table.logz[args.L, n])!r}" for n in range(args.N + 1)]
    _write_text(out / f"zn_L{args.L}_N{args.N}.csv", config, "\n".join(rows) + "\n")
    return 0


def cmd_sample(args, config: RunConfig) -> int:
    family = _load_family(args)
    if args.L < 1 or args.N < 0 or args.count < 1:
        raise ConfigError("need --L >= 1, --N >= 0, --count >= 1")
    out = _out_dir(args)
    table = build_logz(family, args.L, args.N)
    rng = SeededRng(args.seed)
    occ = sample_configurations(table, args.L, args.N, args.count, rng)
    lines = [" ".join(str(int(v)) for v in row) for row in occ]
    _write_text(out / "configurations.txt", config, "\n".join(lines) + "\n")
    if args.partitions:
        rows = ["sample,rank,mass"]
        for s, row in enumerate(occ):
            if row.sum() == 0:
                continue
            p = to_partition(Configuration(row))
            rows += [f"{s},{r},{mass!r}" for r, mass in enumerate(p.masses, start=1)]
        _write_text(out / "partitions.csv", config, "\n".join(rows) + "\n")
    return 0


def cmd_splitmerge(args, config: RunConfig) -> int:
    if args.t_max <= 0:
        raise ConfigError("--t-max must be positive")
    p0 = OrderedPartition.from_masses(json.loads(args.p0))
    times = np.linspace(args.t_max / args.records, args.t_max, args.records)
    states = simulate(args.theta, p0, args.t_max, SeededRng(args.seed), sample_times=times)
    rows = ["time,p1,p2,p3,l2sq,merges,splits"]
    for st in states:
        arr = st.partition.as_array()
        tops = [float(arr[i]) if i < arr.size else 0.0 for i in range(3)]
        l2sq = float((arr**2).sum())
        rows.append(
            f"{float(st.time)!r},{tops[0]!r},{tops[1]!r},{tops[2]!r},{l2sq!r},{st.merges},{st.splits}"
        )
    out = _out_dir(args)
    _write_text(out / "trajectory.csv", config, "\n".join(rows) + "\n")
    return 0


def cmd_reversibility(args, config: RunConfig) -> int:
    family = _load_family(args)
    sizes = _parse_sizes(args.sizes)
    try:
        f = FUNCTION_LIBRARY[args.f]
        g = FUNCTION_LIBRARY[args.g]
    except KeyError as exc:
        raise ConfigError(f"unknown test function {exc}; choose from {sorted(FUNCTION_LIBRARY)}")
    results = []
    for i, (L, N) in enumerate(sizes):
        res = reversibility_defect(
            family, L, N, args.eps, args.theta, f, g,
            mode=args.mode, samples=args.samples, rng=SeededRng(args.seed, stream=i),
        )
        results.append(res.to_json_dict())
    out = _out_dir(args)
    _write_json(out / "reversibility.json", config, results)
    return 0


def cmd_ensembles(args, config: RunConfig) -> int:
    family = _load_family(args)
    sizes = [int(s) for s in args.sizes.split(",")]
    rows = ["quantity,L,N,phi,value"]
    for L in sizes:
        N = int(round(args.rho * L))
        phi = args.phi if args.phi is not None else invert_density(family, None, args.rho)
        table = build_logz(family, L, N)
        ent = relative_entropy_bound(family, L, N, phi)
        tv = tv_distance_marginal(table, family, L, N, phi)
        rows.append(f"entropy_bound,{L},{N},{phi!r},{ent!r}")
        rows.append(f"tv_distance,{L},{N},{phi!r},{tv!r}")
        clt = local_clt_report(family, L)
        phi_l = phi_sequence(family, L)
        for row in clt.series:
            rows.append(f"clt_{row.label},{L},{N},{phi_l!r},{row.value!r}")
    out = _out_dir(args)
    _write_text(out / "ensembles.csv", config, "\n".join(rows) + "\n")
    return 0


def cmd_condense(args, config: RunConfig) -> int:
    family = _load_family(args)
    sizes = [int(s) for s in args.sizes.split(",")]
    rows = ["quantity,L,N,eps,value"]
    rho_c = critical_density(family)
    for L in sizes:
        N = int(round(args.rho * L))
        table = build_logz(family, L, N)
        frac = condensed_fraction(table, L, N, args.eps)
        alpha = alpha_from_second_moment(table, L, N, args.theta)
        rows.append(f"condensed_fraction,{L},{N},{args.eps!r},{frac!r}")
        rows.append(f"alpha_second_moment,{L},{N},{args.eps!r},{alpha!r}")
    rows.append(f"critical_density,,,,{rho_c!r}")
    target = 1.0 - rho_c / args.rho if args.rho > rho_c else 0.0
    rows.append(f"alpha_target,,,,{target!r}")
    out = _out_dir(args)
    _write_text(out / "condense.csv", config, "\n".join(rows) + "\n")
    return 0


def cmd_assumptions(args, config: RunConfig) -> int:
    family = _load_family(args)
    report = assumption_report(family, args.L, args.N, args.eps, args.J)
    out = _out_dir(args)
    _write_json(out / "assumptions.json", config, report.to_json_dict())
    return 0


def _parse_sizes(spec: str) -> list[tuple[int, int]]:
    sizes = []
    for part in spec.split(","):
        try:
            L, N = part.split(":")
            sizes.append((int(L), int(N)))
        except ValueError:
            raise ConfigError(f"bad size entry {part!r}; expected L:N")
    return sizes


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pdlab",
        description="Exact ensembles, Poisson-Dirichlet sampling, and split-merge dynamics",
    )
    parser.add_argument("--family", help="weight family JSON (or CSV of L,n,w rows)")
    parser.add_argument("--seed", type=int, default=0, help="base RNG seed")
    parser.add_argument("--threads", type=int, default=1, help="worker cap (reserved)")
    parser.add_argument("--out", default=".", help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    zn = sub.add_parser("zn", help="build and dump a log partition-function table")
    zn.add_argument("--L", type=int, required=True)
    zn.add_argument("--N", type=int, required=True)

    sample = sub.add_parser("sample", help="exact canonical configurations / partitions")
    sample.add_argument("--L", type=int, required=True)
    sample.add_argument("--N", type=int, required=True)
    sample.add_argument("--count", type=int, default=100)
    sample.add_argument("--partitions", action="store_true")

    sm = sub.add_parser("splitmerge", help="split-merge trajectory")
    sm.add_argument("--theta", type=float, required=True)
    sm.add_argument("--t-max", dest="t_max", type=float, required=True)
    sm.add_argument("--records", type=int, default=100)
    sm.add_argument("--p0", default="[1.0]", help="JSON list of initial masses")

    rev = sub.add_parser("reversibility", help="reversibility-defect scan over sizes")
    rev.add_argument("--theta", type=float, required=True)
    rev.add_argument("--eps", type=float, required=True)
    rev.add_argument("--sizes", required=True, help="comma-separated L:N pairs")
    rev.add_argument("--samples", type=int, default=None)
    rev.add_argument("--mode", choices=("exact", "mc"), default="mc")
    rev.add_argument("--f", default="p1")
    rev.add_argument("--g", default="p1*p2")

    ens = sub.add_parser("ensembles", help="entropy/TV/local-CLT sweep over L")
    ens.add_argument("--rho", type=float, required=True)
    ens.add_argument("--sizes", required=True, help="comma-separated L values")
    ens.add_argument("--phi", type=float, default=None)

    cond = sub.add_parser("condense", help="condensed fraction and alpha scan")
    cond.add_argument("--rho", type=float, required=True)
    cond.add_argument("--theta", type=float, required=True)
    cond.add_argument("--eps", type=float, default=0.05)
    cond.add_argument("--sizes", required=True, help="comma-separated L values")

    asm = sub.add_parser("assumptions", help="weight-scaling assumption report")
    asm.add_argument("--L", type=int, required=True)
    asm.add_argument("--N", type=int, required=True)
    asm.add_argument("--eps", type=float, default=0.1)
    asm.add_argument("--J", type=int, default=1)
    return parser


_COMMANDS = {
    "zn": cmd_zn,
    "sample": cmd_sample,
    "splitmerge": cmd_splitmerge,
    "reversibility": cmd_reversibility,
    "ensembles": cmd_ensembles,
    "condense": cmd_condense,
    "assumptions": cmd_assumptions,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    family_doc = None
    if args.family:
        try:
            family_doc = _load_family(args).to_json_dict()
        except (ConfigError, ValueError, KeyError, json.JSONDecodeError) as exc:
            print(f"pdlab: config error: {exc}", file=sys.stderr)
            return 2
    config = RunConfig(
        command=args.command,
        family=family_doc,
        seed=args.seed,
        threads=args.threads,
        options={
            k: v
            for k, v in sorted(vars(args).items())
            if k not in ("command", "family", "seed", "threads", "out") and v is not None
        },
    )
    try:
        return _COMMANDS[args.command](args, config)
    except ConfigError as exc:
        print(f"pdlab: config error: {exc}", file=sys.stderr)
        return 2
    except (OutOfDomainError, SupercriticalDensityError, FloatingPointError) as exc:
        print(json.dumps({"error": "numeric", "message": str(exc)}), file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"pdlab: config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
