"""Batch command-line front end.

Subcommands
-----------
``analyze``     capacity, worst channels, one-sided verdicts and cover, and
                per-channel ML/MAP/GLRT/GMAP rates for a scenario.
``capacity``    compound capacity and the achieving input distribution.
``one-sided``   one-sided verdict and a greedy one-sided cover.
``vn``          very-noisy studies: ``counterexample`` (pinned table),
                ``sweep`` (limit-gap tables over epsilon), ``blind``
                (fixed-metric polytope rate).
``simulate``    Monte Carlo decoder error estimation.

Exit codes: 0 success, 2 validation failure, 3 solver non-convergence.
Internally everything is in nats; ``--bits`` rescales displayed values only.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from .probability import NATS_PER_BIT, Distribution, mutual_information
from .projection import SolverError
from .rates import (
    CompoundSet,
    build_metrics,
    compound_capacity,
    decoder_rates,
    is_one_sided,
    one_sided_cover,
    worst_channel,
)
from .scenario import Report, ScenarioError, load_scenario, render_report, write_report
from .simulate import DecoderSpec, estimate_error
from .vn import (
    DirectionSet,
    blind_polytope_rate,
    center,
    vn_compound_capacity,
    vn_glrt_rate,
    vn_gmap_rate,
    vn_is_one_sided,
    vn_limit_gap,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3


def _add_common(p: argparse.ArgumentParser, scenario_default=None):
    if scenario_default is None:
        p.add_argument("--scenario", required=True, help="scenario JSON path or builtin:<name>")
    else:
        p.add_argument("--scenario", default=scenario_default)
    p.add_argument("--out", help="write the report to this path")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--bits", action="store_true", help="display rates in bits instead of nats")
    p.add_argument("--tol", type=float, default=1e-7, help="capacity solver tolerance (nats)")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ccdec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    _add_common(sub.add_parser("analyze", help="full rate analysis of a compound set"))
    _add_common(sub.add_parser("capacity", help="compound capacity only"))
    _add_common(sub.add_parser("one-sided", help="one-sided verdict and cover"))

    vn = sub.add_parser("vn", help="very-noisy geometry studies")
    vnsub = vn.add_subparsers(dest="vn_command", required=True)
    _add_common(vnsub.add_parser("counterexample"), scenario_default="builtin:counterexample")
    sweep = vnsub.add_parser("sweep")
    _add_common(sweep, scenario_default="builtin:counterexample")
    sweep.add_argument("--eps", default=None, help="comma-separated epsilon list, e.g. 0.1,0.05,0.025")
    _add_common(vnsub.add_parser("blind"), scenario_default="builtin:counterexample")

    sim = sub.add_parser("simulate", help="Monte Carlo decoder error estimation")
    _add_common(sim)
    sim.add_argument("--trials", type=int, default=None)
    sim.add_argument("--n", type=int, default=None, help="block length")
    sim.add_argument("--rate", type=float, default=None, help="rate in bits per symbol")
    sim.add_argument("--decoder", choices=("ml", "map", "glrt", "gmap", "mmi"), default=None)
    sim.add_argument("--method", choices=("codebook", "ensemble"), default=None)
    return parser


def _display(report: Report, bits: bool) -> Report:
    if not bits:
        return report
    out = Report(meta=dict(report.meta))
    out.meta["units"] = "bits"
    for e in report.entries:
        if e.unit == "nats" and isinstance(e.value, float):
            out.add(e.section, e.key, e.value / NATS_PER_BIT, "bits")
        else:
            out.add(e.section, e.key, e.value, e.unit)
    return out


def _emit(report: Report, args) -> None:
    shown = _display(report, args.bits)
    text = render_report(shown, args.format)
    if args.out:
        write_report(shown, args.out, args.format)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)


def _analysis_input(scenario, cap_result):
    return scenario.input_dist if scenario.input_dist is not None else cap_result.input_dist


def cmd_analyze(args) -> int:
    scenario = load_scenario(args.scenario)
    if scenario.channels is None:
        raise ScenarioError("channels", "analyze requires channels")
    cset = scenario.channels
    cap = compound_capacity(cset, tol=args.tol)
    report = Report(meta={"command": "analyze", "scenario": scenario.name, "units": "nats"})
    report.add("capacity", "capacity", cap.value, "nats")
    report.add("capacity", "iterations", cap.iterations)
    report.add("capacity", "certificate_gap", cap.certificate_gap, "nats")
    report.add("capacity", "converged", cap.converged)
    for a, p in enumerate(cap.input_dist.probs):
        report.add("capacity", f"input[{a}]", float(p), "probability")

    p_x = _analysis_input(scenario, cap)
    worst = worst_channel(cset, p_x)
    report.add("worst", "index", worst.index)
    report.add("worst", "tie", worst.tie)
    for k, info in enumerate(worst.mutual_informations):
        report.add("worst", f"mutual_information[{k}]", float(info), "nats")

    verdict = is_one_sided(cset, p_x)
    report.add("one_sided", "whole_set", verdict.one_sided)
    if verdict.witness is not None:
        report.add("one_sided", "witness", verdict.witness)
    cover = one_sided_cover(cset, p_x)
    report.add("one_sided", "cover_size", len(cover))
    for b, blk in enumerate(cover):
        report.add("one_sided", f"cover[{b}]", ",".join(map(str, blk)))

    blocks = cset.components if len(cset.components) > 1 else cover
    for b, blk in enumerate(blocks):
        sub_verdict = is_one_sided(cset.restrict(blk), p_x)
        report.add("one_sided", f"component[{b}]", sub_verdict.one_sided)

    for kind in ("ml", "map", "glrt", "gmap"):
        rep = decoder_rates(cset, p_x, kind, cover=blocks)
        for k, r in enumerate(rep.rates):
            report.add(f"rates_{kind}", f"channel[{k}]", float(r), "nats")
        report.add(f"rates_{kind}", "minimum", rep.minimum, "nats")
        report.add(f"rates_{kind}", "metric_channels", ",".join(map(str, rep.metric_indices)))

    _emit(report, args)
    return EXIT_OK if cap.converged else EXIT_SOLVER


def cmd_capacity(args) -> int:
    scenario = load_scenario(args.scenario)
    if scenario.channels is None:
        raise ScenarioError("channels", "capacity requires channels")
    cap = compound_capacity(scenario.channels, tol=args.tol)
    report = Report(meta={"command": "capacity", "scenario": scenario.name, "units": "nats"})
    report.add("capacity", "capacity", cap.value, "nats")
    report.add("capacity", "iterations", cap.iterations)
    report.add("capacity", "certificate_gap", cap.certificate_gap, "nats")
    report.add("capacity", "converged", cap.converged)
    for a, p in enumerate(cap.input_dist.probs):
        report.add("capacity", f"input[{a}]", float(p), "probability")
    _emit(report, args)
    return EXIT_OK if cap.converged else EXIT_SOLVER


def cmd_one_sided(args) -> int:
    scenario = load_scenario(args.scenario)
    if scenario.channels is None:
        raise ScenarioError("channels", "one-sided requires channels")
    cset = scenario.channels
    cap = compound_capacity(cset, tol=args.tol)
    p_x = _analysis_input(scenario, cap)
    verdict = is_one_sided(cset, p_x)
    cover = one_sided_cover(cset, p_x)
    report = Report(meta={"command": "one-sided", "scenario": scenario.name, "units": "nats"})
    report.add("one_sided", "whole_set", verdict.one_sided)
    report.add("one_sided", "reason", verdict.reason)
    if verdict.witness is not None:
        report.add("one_sided", "witness", verdict.witness)
    report.add("one_sided", "cover_size", len(cover))
    for b, blk in enumerate(cover):
        report.add("one_sided", f"cover[{b}]", ",".join(map(str, blk)))
    _emit(report, args)
    return EXIT_OK


def _component_worst_directions(vnblock, p_x):
    dset = vnblock.directions
    worsts = []
    for blk in dset.components:
        norms = [center(dset.directions[i], p_x).centered_norm_sq for i in blk]
        worsts.append(dset.directions[blk[int(np.argmin(norms))]])
    return worsts


def cmd_vn_counterexample(args) -> int:
    scenario = load_scenario(args.scenario)
    if scenario.vn is None:
        raise ScenarioError("vn", "scenario has no vn block")
    vnb = scenario.vn
    p_x = scenario.input_dist if scenario.input_dist is not None else Distribution.uniform(
        vnb.directions.directions[0].nx
    )
    dset = vnb.directions
    report = Report(meta={"command": "vn counterexample", "scenario": scenario.name, "units": "vn"})
    cents = [center(d, p_x) for d in dset.directions]
    for k, c in enumerate(cents):
        report.add("geometry", f"centered_norm_sq[{k}]", c.centered_norm_sq, "vn-rate")
    for k in range(len(cents)):
        for j in range(k + 1, len(cents)):
            report.add("geometry", f"inner[{k},{j}]", cents[k].inner(cents[j]), "vn-rate")

    cap = vn_compound_capacity(dset, p_x)
    report.add("rates", "capacity", cap.value, "vn-rate")
    verdicts = [vn_is_one_sided(_restrict(dset, blk), p_x) for blk in dset.components]
    for b, v in enumerate(verdicts):
        report.add("one_sided", f"component[{b}]", v.one_sided)
    worsts = _component_worst_directions(vnb, p_x)
    glrt = [vn_glrt_rate(d, worsts, p_x, vnb.noise) for d in dset.directions]
    gmap = [vn_gmap_rate(d, worsts, p_x, vnb.noise) for d in dset.directions]
    for k in range(dset.size):
        report.add("rates", f"glrt[{k}]", glrt[k], "vn-rate")
        report.add("rates", f"gmap[{k}]", gmap[k], "vn-rate")
    witness = int(np.argmin(glrt))
    report.add("rates", "glrt_rate", glrt[witness], "vn-rate")
    report.add("rates", "gmap_rate", gmap[witness], "vn-rate")
    report.add("rates", "gmap_rate_min", min(gmap), "vn-rate")
    report.add("rates", "witness", witness)
    _emit(report, args)
    return EXIT_OK


def _restrict(dset, indices):
    return DirectionSet(tuple(dset.directions[i] for i in indices))


def cmd_vn_sweep(args) -> int:
    scenario = load_scenario(args.scenario)
    if scenario.vn is None:
        raise ScenarioError("vn", "scenario has no vn block")
    vnb = scenario.vn
    eps = vnb.epsilons
    if args.eps:
        eps = tuple(float(e) for e in args.eps.split(","))
    p_x = scenario.input_dist if scenario.input_dist is not None else Distribution.uniform(
        vnb.directions.directions[0].nx
    )
    dirs = vnb.directions.directions
    instances = {
        "divergence": {"dist": vnb.noise, "direction": dirs[0].values[0]},
        "expected_log": {
            "input": p_x,
            "directions": (dirs[0], dirs[min(1, len(dirs) - 1)], dirs[0], dirs[0]),
        },
        "mismatched_rate": {
            "input": p_x,
            "true": dirs[0],
            "metric": dirs[min(1, len(dirs) - 1)],
        },
    }
    report = Report(meta={"command": "vn sweep", "scenario": scenario.name, "units": "vn"})
    for kind, instance in instances.items():
        rows = vn_limit_gap(kind, instance, eps)
        for r in rows:
            report.add(kind, f"scaled[eps={r.eps:g}]", r.scaled, "vn-rate")
            report.add(kind, f"gap[eps={r.eps:g}]", r.gap, "vn-rate")
        report.add(kind, "limit", rows[0].limit, "vn-rate")
        gaps = [r.gap for r in rows]
        report.add(kind, "monotone", all(g1 > g2 for g1, g2 in zip(gaps, gaps[1:])))
    _emit(report, args)
    return EXIT_OK


def cmd_vn_blind(args) -> int:
    scenario = load_scenario(args.scenario)
    if scenario.vn is None:
        raise ScenarioError("vn", "scenario has no vn block")
    vnb = scenario.vn
    p_x = scenario.input_dist if scenario.input_dist is not None else Distribution.uniform(
        vnb.directions.directions[0].nx
    )
    worsts = _component_worst_directions(vnb, p_x)
    res = blind_polytope_rate(worsts, vnb.directions, p_x)
    report = Report(meta={"command": "vn blind", "scenario": scenario.name, "units": "vn"})
    report.add("blind", "polytope_rate", res.value, "vn-rate")
    report.add("blind", "capacity", res.capacity, "vn-rate")
    report.add("blind", "ratio", res.ratio, "ratio")
    report.add("blind", "limiting_index", res.limiting_index)
    _emit(report, args)
    return EXIT_OK


def cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    if scenario.channels is None:
        raise ScenarioError("channels", "simulate requires channels")
    cset = scenario.channels
    sim = scenario.simulation
    if sim is None:
        from .scenario import SimulationConfig

        sim = SimulationConfig()
    trials = args.trials if args.trials is not None else sim.trials
    n = args.n if args.n is not None else sim.block_length
    rate = args.rate if args.rate is not None else sim.rate_bits
    decoder = args.decoder if args.decoder is not None else sim.decoder
    method = args.method if args.method is not None else sim.method
    seed = args.seed if args.seed is not None else sim.seed

    cap = compound_capacity(cset, tol=args.tol)
    p_x = _analysis_input(scenario, cap)
    spec = _decoder_spec(decoder, cset, p_x)
    stats = estimate_error(
        cset,
        spec,
        p_x,
        n,
        rate,
        trials,
        seed,
        method=method,
        fresh_codebook=sim.fresh_codebook,
        max_codewords=sim.max_codewords,
    )
    report = Report(
        meta={
            "command": "simulate",
            "scenario": scenario.name,
            "decoder": decoder,
            "method": method,
            "units": "nats",
        }
    )
    report.add("config", "block_length", n)
    report.add("config", "rate", rate, "bits")
    report.add("config", "trials", trials)
    report.add("config", "seed", seed)
    report.add("config", "num_codewords", stats[0].num_codewords)
    for st in stats:
        sec = f"channel[{st.channel_index}]"
        report.add(sec, "errors", st.errors)
        report.add(sec, "tie_errors", st.tie_errors)
        report.add(sec, "error_rate", st.error_rate, "probability")
        report.add(sec, "wilson_low", st.wilson_low, "probability")
        report.add(sec, "wilson_high", st.wilson_high, "probability")
        if st.mean_error_prob is not None:
            report.add(sec, "mean_error_prob", st.mean_error_prob, "probability")
    _emit(report, args)
    return EXIT_OK


def _decoder_spec(decoder: str, cset: CompoundSet, p_x: Distribution) -> DecoderSpec:
    if decoder == "mmi":
        return DecoderSpec.mmi()
    if decoder in ("ml", "map"):
        worst = worst_channel(cset, p_x)
        metric = build_metrics(decoder, [worst.channel], p_x)[0]
        return DecoderSpec.linear(metric)
    blocks = cset.components if len(cset.components) > 1 else one_sided_cover(cset, p_x)
    worst_idx = [blk[worst_channel(cset.restrict(blk), p_x).index] for blk in blocks]
    kind = "ml" if decoder == "glrt" else "map"
    metrics = build_metrics(kind, [cset.channels[i] for i in worst_idx], p_x)
    return DecoderSpec.generalized(metrics)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "analyze": cmd_analyze,
        "capacity": cmd_capacity,
        "one-sided": cmd_one_sided,
        "simulate": cmd_simulate,
    }
    try:
        if args.command == "vn":
            handler = {
                "counterexample": cmd_vn_counterexample,
                "sweep": cmd_vn_sweep,
                "blind": cmd_vn_blind,
            }[args.vn_command]
            return handler(args)
        return handlers[args.command](args)
    except (ScenarioError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
