"""Command line entry point: ``fbcsf run|verify|entropy|models``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import acceptance
from .barrier import make_barrier
from .flow import BlowupError, run
from .kernels import ScanSpec, entropy_scan
from .models import MODEL_KINDS, model_entropy
from .scenario import (EXIT_BLOWUP, EXIT_FAIL, EXIT_OK, EXIT_SCHEMA, SchemaError, build_initial,
                       execute, load_scenario, output_dir_for)


def cmd_run(args) -> int:
    sc = load_scenario(args.config)
    code, report = execute(sc, args.out)
    for c in report.get("checks", []):
        print(f"[{'PASS' if c.get('passed') else 'FAIL'}] {c['check']}")
    if "error" in report:
        print(report["error"], file=sys.stderr)
    else:
        print(f"stop={report['stop_reason']} t={report['final_time']:.6g} "
              f"T_est={report['singularity']['T_est']} -> {output_dir_for(sc, args.out)}")
    return code


def cmd_verify(args) -> int:
    opts = acceptance.Options(torsion_term_sign=-1.0 if args.mutate == "tau-sign" else 1.0)
    results = acceptance.run_all(args.filter, opts, echo=lambda s: print(s, flush=True))
    if not results:
        print(f"no criteria match {args.filter!r}", file=sys.stderr)
        return EXIT_SCHEMA
    n_pass = sum(c.passed for c in results)
    print(f"{n_pass}/{len(results)} criteria passed")
    return EXIT_OK if n_pass == len(results) else EXIT_FAIL


def cmd_entropy(args) -> int:
    sc = load_scenario(args.config)
    if sc.entropy is None:
        raise SchemaError("config has no 'entropy' section")
    barrier = make_barrier(sc.barrier, sc.ambient_dim)
    curve, _ = build_initial(sc)
    try:
        res = run(curve, barrier, sc.flow)
    except BlowupError as e:
        print(f"blowup: {e}", file=sys.stderr)
        return EXIT_BLOWUP
    try:
        rep = entropy_scan(res.states, barrier, ScanSpec.from_dict(sc.entropy))
    except ValueError as e:
        raise SchemaError(f"entropy: {e}") from None
    out = output_dir_for(sc, args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "entropy.json", "w") as fh:
        json.dump(rep.to_dict(), fh, sort_keys=True, indent=1)
        fh.write("\n")
    print(f"entropy_sup={rep.entropy_sup:.6f} monotonicity_violation={rep.monotonicity_violation:.3e} "
          f"centers={len(rep.center_grid)} -> {out / 'entropy.json'}")
    return EXIT_OK


def cmd_models(args) -> int:
    for k in MODEL_KINDS:
        if args.entropy and k in ("line", "circle", "semicircle", "grim_reaper", "half_grim_reaper"):
            print(f"{k}\t{model_entropy(k):.5f}")
        else:
            print(k)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fbcsf", description="Free-boundary curve shortening flow experiments")
    sub = p.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run a scenario config")
    r.add_argument("config", type=Path)
    r.add_argument("--out", default=None, help="output directory (overrides FBCSF_OUT)")
    r.set_defaults(fn=cmd_run)
    v = sub.add_parser("verify", help="run the built-in acceptance matrix")
    v.add_argument("--filter", default=None, help="only criteria whose name contains this substring")
    v.add_argument("--mutate", choices=["tau-sign"], default=None,
                   help="inject a sign error in the reference residual (should fail)")
    v.set_defaults(fn=cmd_verify)
    e = sub.add_parser("entropy", help="run a scenario and scan the reflected Gaussian functional")
    e.add_argument("config", type=Path)
    e.add_argument("--out", default=None)
    e.set_defaults(fn=cmd_entropy)
    m = sub.add_parser("models", help="list model curves")
    m.add_argument("--list", action="store_true", default=True)
    m.add_argument("--entropy", action="store_true", help="also print model entropies")
    m.set_defaults(fn=cmd_models)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except SchemaError as e:
        print(f"schema error: {e}", file=sys.stderr)
        return EXIT_SCHEMA
    except FileNotFoundError as e:
        print(f"schema error: {e}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
