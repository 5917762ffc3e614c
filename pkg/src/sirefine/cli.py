"""Command-line front end.

Exit codes: 0 on success, 2 on validation errors, 3 when the distortion
targets are infeasible.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path


from ._validation import InfeasibleError, ValidationError, as_distortion_vector
from .aux import (aux_spec_dict, check_P2, example3_instance, example3_measures, load_aux_spec,
                  markov_gap)
from .bounds import hb_r0, hb_terms, inner_region, lossless_region, phi_table, slepian_wolf_rate, thm2_value
from .coding import run_trials, stats_csv
from .optimize import R0Minimizer, SearchConfig, Thm2Minimizer, trace_inner_boundary
from .source import load_source_spec, validate_source

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE = 0, 2, 3
DIGITS = 12


def _num(x):
    """Round floats to 12 significant digits for output."""
    if isinstance(x, float):
        return float(f"{x:.{DIGITS}g}")
    if isinstance(x, dict):
        return {str(k): _num(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_num(v) for v in x]
    return x


def _emit(obj, out):
    text = json.dumps(_num(obj), indent=2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _floats(text: str) -> list[float]:
    return [float(s) for s in text.split(",") if s.strip()]


def _ints(text: str) -> list[int]:
    return [int(s) for s in text.split(",") if s.strip()]


def _existing(path: str) -> str:
    if not Path(path).is_file():
        raise argparse.ArgumentTypeError(f"no such file: {path}")
    return path


def _problem(args):
    prob = load_source_spec(args.source)
    d = prob.d
    if getattr(args, "d", None) is not None:
        d = as_distortion_vector(_floats(args.d), prob.source.t)
    return prob, d


def _config(args) -> SearchConfig:
    cfg = {}
    if getattr(args, "config", None):
        cfg = json.loads(Path(args.config).read_text())
    if getattr(args, "engine", None):
        cfg["engine"] = args.engine
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    return SearchConfig.from_dict(cfg)


def cmd_validate(args) -> int:
    try:
        prob = load_source_spec(args.source)
    except ValidationError as exc:
        print(f"invalid: {exc}")
        return EXIT_INVALID
    problems = validate_source(prob.source)
    if args.aux:
        try:
            load_aux_spec(args.aux, prob.source)
        except ValidationError as exc:
            problems.append(str(exc))
    if problems:
        for p in problems:
            print(f"invalid: {p}")
        return EXIT_INVALID
    print("valid")
    return EXIT_OK


def _need(prob, d):
    if not prob.measures or d is None:
        raise ValidationError("this command needs 'distortion' and 'd' in the source spec (or --d)")


def cmd_bounds(args) -> int:
    prob, d = _problem(args)
    q = prob.source
    out = {"t": q.t, "H(X)": q.joint.H((0,))}
    if args.lossless:
        out["slepian_wolf"] = slepian_wolf_rate(q, prob.measures or None)
    system = None
    if args.aux:
        system = load_aux_spec(args.aux, q)
    if args.optimize:
        _need(prob, d)
        est_cls = R0Minimizer if args.objective == "r0" else Thm2Minimizer
        cfg = _config(args)
        est = est_cls(**{k: getattr(cfg, k) for k in SearchConfig.__dataclass_fields__})
        est.fit(q, d, prob.measures, init=[system] if system is not None else None)
        system = est.system_
        out["optimized"] = {"objective": args.objective, "value": est.value_,
                            "restart_values": est.restart_values_,
                            "distortions": list(est.distortions_),
                            "system": aux_spec_dict(system)}
    if system is not None:
        if d is not None and prob.measures:
            rep = check_P2(system, d, prob.measures)
            out["p2"] = {"achieved": list(rep.achieved), "targets": list(rep.targets), "passed": rep.passed}
            if not rep.passed:
                raise InfeasibleError(f"system fails P2 at d={tuple(d)}")
        out["phi"] = phi_table(system)
        out["inner_region"] = list(inner_region(system).prefix_bounds)
        out["r0"] = hb_r0(system)
        out["r0_terms"] = hb_terms(system)
        out["thm2"] = thm2_value(system)
    _emit(out, args.out)
    return EXIT_OK


def cmd_counterexample(args) -> int:
    sys_ = example3_instance()
    measures = example3_measures()
    terms = hb_terms(sys_)
    r0 = hb_r0(sys_, (0, 0, 0), measures)
    hx = sys_.joint.H((0,))
    sw = slepian_wolf_rate(sys_.source, measures)
    gap = markov_gap(sys_, ("U13", ("X", "U123"), "U12"))
    gap2 = markov_gap(sys_, ("U23", ("X", "U123"), "U12"))
    p2 = check_P2(sys_, (0, 0, 0), measures)
    print("R0 integrand terms (max over decoders in each subset):")
    for label, val in terms.items():
        print(f"  {label:>5}: {val:.{DIGITS}g}")
    print(f"P2 at d=(0,0,0): {'pass' if p2.passed else 'fail'} (achieved {p2.achieved})")
    print(f"R0 candidate: {r0:.{DIGITS}g}")
    print(f"H(X): {hx:.{DIGITS}g}")
    print(f"Slepian-Wolf rate: {sw:.{DIGITS}g}")
    print(f"I(U13; U12 | X, U123) = {gap:.6f} > 0: system excluded by the extra Markov constraint")
    print(f"I(U23; U12 | X, U123) = {gap2:.6f}")
    ok = p2.passed and r0 < sw - 1e-9
    verdict = "CONFIRMED" if ok else "NOT CONFIRMED"
    print(f"R0 candidate ({r0:.6f}) < Slepian-Wolf rate ({sw:.6f}): counterexample {verdict}")
    return EXIT_OK if ok else 1


def _weights(text: str, t: int):
    out = []
    for chunk in text.split(";"):
        w = _floats(chunk)
        if len(w) != t:
            raise ValidationError(f"weight {chunk!r} needs {t} entries")
        out.append(tuple(w))
    return out


def cmd_region(args) -> int:
    prob, d = _problem(args)
    _need(prob, d)
    q = prob.source
    weights = _weights(args.weights, q.t) if args.weights else [tuple([1.0] + [0.0] * (q.t - 1))]
    v = json.loads(args.v) if args.v else None
    if v is not None:
        from .lattice import SubsetList
        v = SubsetList.from_members(q.t, v)
    boundary = trace_inner_boundary(q, d, prob.measures, v=v, weights=weights, cfg=_config(args))
    _emit({"d": list(d), "boundary": [{"weight": list(w), "prefix_bounds": list(c)} for w, c in boundary]},
          args.out)
    return EXIT_OK


def cmd_lossless(args) -> int:
    prob = load_source_spec(args.source)
    q = prob.source
    w_sizes = _ints(args.w_sizes)
    region = lossless_region(q, w_sizes)
    _emit({"prefix_bounds": list(region.prefix_bounds), "single_channel_rate": region.prefix_bounds[-1]},
          args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    prob, d = _problem(args)
    if not prob.measures:
        raise ValidationError("simulation needs distortion measures in the source spec")
    system = load_aux_spec(args.aux, prob.source)
    stats = run_trials(system, prob.measures, _ints(args.n), args.trials, margin=args.margin,
                       seed=args.seed, d=d, dec_margin=args.dec_margin, eps0=args.eps0,
                       budget=args.budget)
    text = stats_csv(stats, DIGITS)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sirefine",
                                description="Rate bounds for multi-decoder source coding with side information.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", help="check a source spec (and optionally an aux spec)")
    s.add_argument("--source", required=True, type=_existing)
    s.add_argument("--aux", type=_existing)
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("bounds", help="evaluate bound functionals")
    s.add_argument("--source", required=True, type=_existing)
    s.add_argument("--aux", type=_existing)
    s.add_argument("--d", help="comma-separated distortion targets (overrides the source file)")
    s.add_argument("--optimize", action="store_true", help="search over auxiliary channels")
    s.add_argument("--objective", choices=("thm2", "r0"), default="thm2")
    s.add_argument("--engine", choices=("descent", "grid"))
    s.add_argument("--config", type=_existing, help="search config JSON")
    s.add_argument("--seed", type=int)
    s.add_argument("--lossless", action="store_true", help="also report the zero-distortion rate")
    s.add_argument("--out")
    s.set_defaults(func=cmd_bounds)

    s = sub.add_parser("counterexample", help="reproduce the R0 counterexample")
    s.set_defaults(func=cmd_counterexample)

    s = sub.add_parser("region", help="trace the inner-bound lower boundary")
    s.add_argument("--source", required=True, type=_existing)
    s.add_argument("--d")
    s.add_argument("--weights", help="semicolon-separated weight vectors, e.g. '1,0;1,1'")
    s.add_argument("--v", help="subset list as JSON, e.g. '[[1,2],[1],[2]]'")
    s.add_argument("--engine", choices=("descent", "grid"))
    s.add_argument("--config", type=_existing)
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_region)

    s = sub.add_parser("lossless", help="private-message lossless region")
    s.add_argument("--source", required=True, type=_existing)
    s.add_argument("--w-sizes", required=True, help="comma-separated |W_1|,...,|W_t|")
    s.add_argument("--out")
    s.set_defaults(func=cmd_lossless)

    s = sub.add_parser("simulate", help="Monte-Carlo run of the random coding scheme")
    s.add_argument("--source", required=True, type=_existing)
    s.add_argument("--aux", required=True, type=_existing)
    s.add_argument("--d")
    s.add_argument("--n", required=True, help="comma-separated blocklengths")
    s.add_argument("--trials", type=int, default=2000)
    s.add_argument("--margin", type=float, default=0.25)
    s.add_argument("--dec-margin", type=float, help="decoding margin (defaults to --margin)")
    s.add_argument("--eps0", type=float, default=0.05)
    s.add_argument("--budget", type=int, default=2 ** 26)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
