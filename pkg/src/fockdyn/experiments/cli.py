"""Command line entry point: ``fockdyn <subcommand> <config>``.

Exit codes: 0 success, 2 invalid config, 3 numerical invariant violation,
4 I/O failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from fockdyn.errors import ConfigError, FockDynError
from fockdyn.experiments.config import BUNDLED, load_config
from fockdyn.experiments.runner import (echo_experiment, ensemble_report, run_experiment,
                                        scan_experiment)
from fockdyn.fock import enumerate_sector

log = logging.getLogger("fockdyn")


def _model_info(cfg) -> dict:
    basis = enumerate_sector(cfg.model, cfg.counts)
    return {
        "name": cfg.name,
        "num_sites": cfg.model.num_sites,
        "edges": [list(e) for e in cfg.model.lattice.edges],
        "species": {s.label: {"hopping": s.hopping,
                              "accessible_sites": list(cfg.model.accessible_sites(s.label)),
                              "allowed_edges": [list(e) for e in s.allowed_edges]}
                    for s in cfg.model.species},
        "interactions": [{"pair": list(x.species_pair), "strength": x.strength,
                          "sites": list(x.sites)} for x in cfg.model.interactions],
        "sector": dict(zip(cfg.model.labels, cfg.counts)),
        "dimension": basis.dim,
        "initial": cfg.initial.to_string(cfg.model),
        "timeline": cfg.protocol.total_time,
        "model_sha256": cfg.model.digest(),
    }


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="fockdyn",
        description="Exact-diagonalization runs of multi-species fermion lattice models. "
                    f"CONFIG is a JSON file or one of the bundled names {', '.join(BUNDLED)}.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("model-info", help="print the resolved model and sector")
    s.add_argument("config")

    s = sub.add_parser("run", help="run the configured protocol and write CSV + metadata")
    s.add_argument("config")
    s.add_argument("--out", default=None, help="output directory")
    s.add_argument("--workers", type=int, default=None)

    s = sub.add_parser("scan", help="erasure-sequence scan over all sector Fock states")
    s.add_argument("config")
    s.add_argument("--n-max", type=int, default=None)
    s.add_argument("--out", default=None)
    s.add_argument("--workers", type=int, default=None)

    s = sub.add_parser("echo", help="Loschmidt echo against the configured perturbation")
    s.add_argument("config")
    s.add_argument("--out", default=None)

    s = sub.add_parser("ensemble", help="microcanonical reference values (both readings)")
    s.add_argument("config")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(args, "workers", None) is not None and args.workers < 1:
            raise ConfigError("--workers must be a positive integer")
        cfg = load_config(args.config)
        if args.command == "model-info":
            print(json.dumps(_model_info(cfg), indent=2))
        elif args.command == "run":
            res = run_experiment(cfg, args.out, args.workers)
            for f in res["files"]:
                print(f)
        elif args.command == "scan":
            for f in scan_experiment(cfg, args.out, args.n_max, args.workers):
                print(f)
        elif args.command == "echo":
            times, L, files = echo_experiment(cfg, args.out)
            print(f"min L(t) = {L.min():.6f} at t = {times[L.argmin()]:g}")
            for f in files:
                print(f)
        elif args.command == "ensemble":
            print(json.dumps(ensemble_report(cfg), indent=2))
    except FockDynError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
