"""Command-line front end.

Subcommands: check, degree, entropy, ni, validate, export.  Value results
print as ``Result: <value>.{<p>:<trace>:<obs>,...} (value in the initial
state)``; boolean results print ``Result: true|false (value in the initial
state)``.  Identical inputs produce byte-identical output.  Exit status: 0 on
success, 1 when a threshold query (or plain boolean property) is false, 2 on
input errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from . import entropy as ent
from .checking import (CheckSettings, check_noninterference, check_opacity,
                       degree_of_opacity, eval_prob_query, prob_path_formula,
                       sat_state)
from .errors import OpacheckError, PropertySyntaxError
from .formulas import (Opacity, PathFormula, ProbQuery, StateFormula,
                       parse_path_formula, parse_property)
from .ldtmc import DEFAULT_STATE_CAP, load_model
from .model import Model, model_to_json_dict, validate_model


@dataclass
class RunConfig:
    model_path: str
    subcommand: str
    property_text: Optional[str] = None
    mode: str = "semantic"
    precision: int = 11
    depth: int = 8
    state_cap: int = DEFAULT_STATE_CAP
    dfa_cap: int = 10 ** 6
    product_cap: int = 10 ** 5
    output: str = "text"
    verbose_traces: bool = False
    n_max: int = ent.DEFAULT_NMAX
    tail_window: int = ent.DEFAULT_TAIL_WINDOW
    high: tuple = ()
    low: tuple = ()
    json_path: Optional[str] = None
    dot_path: Optional[str] = None
    sensitive: Optional[str] = None


def render_fraction(value: Fraction, precision: int = 11) -> str:
    """Exact decimal rendering, truncated (not rounded) at `precision` digits.

    Terminating expansions stop early; there is always at least one digit
    after the point (0 renders as 0.0).
    """
    sign = "-" if value < 0 else ""
    value = abs(value)
    whole = value.numerator // value.denominator
    rem = value.numerator - whole * value.denominator
    digits = []
    for _ in range(precision):
        if rem == 0:
            break
        rem *= 10
        digits.append(str(rem // value.denominator))
        rem %= value.denominator
    if not digits:
        digits = ["0"]
    return f"{sign}{whole}.{''.join(digits)}"


def fraction_json(value: Fraction, precision: int) -> dict:
    return {
        "numerator": value.numerator,
        "denominator": value.denominator,
        "decimal": render_fraction(value, precision),
    }


RESULT_SUFFIX = " (value in the initial state)"


def _value_line(value_text: str, witnesses: Optional[str] = None) -> str:
    if witnesses is None:
        return f"Result: {value_text}{RESULT_SUFFIX}"
    return f"Result: {value_text}.{{{witnesses}}}{RESULT_SUFFIX}"


def _witness_text(report, cfg: RunConfig, m: Model) -> str:
    parts = []
    for pl, obs_text in zip(report.witnesses, report.witness_obs):
        parts.append(":".join([
            render_fraction(pl.pr, cfg.precision),
            pl.tr.render(verbose=cfg.verbose_traces),
            obs_text,
        ]))
    return ",".join(parts)


def _settings(cfg: RunConfig) -> CheckSettings:
    return CheckSettings(mode=cfg.mode, dfa_cap=cfg.dfa_cap, product_cap=cfg.product_cap)


def _load_valid_model(cfg: RunConfig) -> Model:
    m = load_model(cfg.model_path, cfg.state_cap)
    violations = validate_model(m)
    if violations:
        lines = "\n".join(f"  [{v.kind}] {v.message}" for v in violations)
        raise OpacheckError(f"model {cfg.model_path} is not valid:\n{lines}")
    return m


def _opacity_body(f: StateFormula) -> Optional[PathFormula]:
    if isinstance(f, Opacity):
        return f.path
    if isinstance(f, ProbQuery) and isinstance(f.body, Opacity):
        return f.body.path
    if isinstance(f, PathFormula):
        return f
    return None


def _parse_opacity_property(text: str) -> Optional[PathFormula]:
    """Path formula of an opacity property; accepts bare path formulas too."""
    try:
        return _opacity_body(parse_property(text))
    except PropertySyntaxError:
        return parse_path_formula(text)


# -- subcommands ---------------------------------------------------------------

def run_check(cfg: RunConfig) -> int:
    m = _load_valid_model(cfg)
    f = parse_property(cfg.property_text)
    settings = _settings(cfg)
    payload = {"query": cfg.property_text.strip(), "model": cfg.model_path}

    if isinstance(f, ProbQuery):
        if f.comparator == "=?":
            if isinstance(f.body, Opacity):
                report = degree_of_opacity(m, m.initial, f.body.path, settings)
                line = _value_line(render_fraction(report.degree, cfg.precision),
                                   _witness_text(report, cfg, m))
                payload.update(_degree_payload(report, cfg, m))
            else:
                value = prob_path_formula(m, m.initial, f.body, settings)
                line = _value_line(render_fraction(value, cfg.precision))
                payload["value"] = fraction_json(value, cfg.precision)
            _emit(cfg, line, payload)
            return 0
        verdict = eval_prob_query(m, m.initial, f, settings)
        payload["verdict"] = verdict
        _emit(cfg, _value_line("true" if verdict else "false"), payload)
        return 0 if verdict else 1

    if isinstance(f, Opacity):
        report = check_opacity(m, m.initial, f.path, settings)
        payload["verdict"] = report.verdict
        payload["mode"] = settings.mode
        if report.counterexample is not None:
            payload["uncovered_observation"] = "".join(report.counterexample)
        if report.first_uncovered is not None:
            payload["first_uncovered"] = report.first_uncovered.render(
                verbose=cfg.verbose_traces)
        _emit(cfg, _value_line("true" if report.verdict else "false"), payload)
        return 0 if report.verdict else 1

    result = sat_state(m, f, settings)
    verdict = m.initial in result.states
    payload["verdict"] = verdict
    _emit(cfg, _value_line("true" if verdict else "false"), payload)
    return 0 if verdict else 1


def _degree_payload(report, cfg: RunConfig, m: Model) -> dict:
    return {
        "degree": fraction_json(report.degree, cfg.precision),
        "witnesses": [
            {
                "trace": pl.tr.render(verbose=cfg.verbose_traces),
                "observation": obs_text,
                "probability": fraction_json(pl.pr, cfg.precision),
            }
            for pl, obs_text in zip(report.witnesses, report.witness_obs)
        ],
        "witnesses_exact": report.witnesses_exact,
        "opaque": report.verdict,
        "mode": report.mode,
    }


def run_degree(cfg: RunConfig) -> int:
    m = _load_valid_model(cfg)
    psi = _parse_opacity_property(cfg.property_text)
    if psi is None:
        raise OpacheckError(
            "degree needs an opacity property (e.g. \"P=? [ opacity F (s=3) ]\" "
            "or a bare path formula such as \"F (s=3)\")")
    report = degree_of_opacity(m, m.initial, psi, _settings(cfg))
    payload = {"query": cfg.property_text.strip(), "model": cfg.model_path}
    payload.update(_degree_payload(report, cfg, m))
    line = _value_line(render_fraction(report.degree, cfg.precision),
                       _witness_text(report, cfg, m))
    _emit(cfg, line, payload)
    return 0


def run_entropy(cfg: RunConfig) -> int:
    m = _load_valid_model(cfg)
    psi = _parse_opacity_property(cfg.property_text)
    if psi is None:
        raise OpacheckError("entropy needs a path formula or opacity property")
    report = ent.entropy_report(m, m.initial, psi, cfg.n_max, cfg.tail_window,
                                settings=_settings(cfg))
    if cfg.output == "json":
        payload = {
            "query": cfg.property_text.strip(),
            "model": cfg.model_path,
            "counts": [{"n": n, "count": c} for n, c in report.counts],
            "estimates": list(report.estimates),
            "limsup_estimate": report.limsup_estimate,
            "spectral_value": report.spectral_value,
            "agreement": report.agreement,
            "tolerance": report.tolerance,
        }
        print(json.dumps(payload, indent=2, sort_keys=True))
        return 0
    print("n\tcount\tlog2(1+count)/n")
    for (n, c), est in zip(report.counts, report.estimates):
        print(f"{n}\t{c}\t{est:.6f}")
    print(f"limsup estimate (last {cfg.tail_window}): {report.limsup_estimate:.6f}")
    print(f"spectral value: {report.spectral_value:.10f}")
    print(f"agreement (tolerance {report.tolerance}): "
          f"{'yes' if report.agreement else 'no'}")
    return 0


def run_ni(cfg: RunConfig) -> int:
    m = _load_valid_model(cfg)
    ok, witness = check_noninterference(m, frozenset(cfg.high), frozenset(cfg.low),
                                        cfg.depth)
    if cfg.output == "json":
        payload = {"model": cfg.model_path, "noninterference": ok, "depth": cfg.depth}
        if witness:
            payload["witness"] = {"low": list(witness[0]), "high": list(witness[1])}
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        if ok:
            print(f"Non-interference holds up to depth {cfg.depth}")
        else:
            lo = "".join(witness[0]) or "(empty)"
            hi = "".join(witness[1]) or "(empty)"
            print(f"Non-interference violated: low projection '{lo}' is "
                  f"inconsistent with high projection '{hi}'")
    return 0 if ok else 1


def run_validate(cfg: RunConfig) -> int:
    m = load_model(cfg.model_path, cfg.state_cap)
    violations = validate_model(m)
    if cfg.output == "json":
        payload = {
            "model": cfg.model_path,
            "states": m.n_states,
            "valid": not violations,
            "violations": [{"kind": v.kind, "message": v.message} for v in violations],
        }
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        if violations:
            for v in violations:
                print(f"[{v.kind}] {v.message}")
        else:
            print(f"Model is valid: {m.n_states} states, "
                  f"{len(m.transitions)} transitions")
    return 2 if violations else 0


def run_export(cfg: RunConfig) -> int:
    m = _load_valid_model(cfg)
    wrote = False
    if cfg.json_path:
        with open(cfg.json_path, "w", encoding="utf-8") as handle:
            json.dump(model_to_json_dict(m), handle, indent=2, sort_keys=True)
            handle.write("\n")
        print(f"wrote {cfg.json_path}")
        wrote = True
    if cfg.dot_path:
        with open(cfg.dot_path, "w", encoding="utf-8") as handle:
            handle.write(model_to_dot(m, cfg))
        print(f"wrote {cfg.dot_path}")
        wrote = True
    if not wrote:
        print(json.dumps(model_to_json_dict(m), indent=2, sort_keys=True))
    return 0


def model_to_dot(m: Model, cfg: RunConfig) -> str:
    sensitive = frozenset()
    if cfg.sensitive:
        f = parse_property(cfg.sensitive)
        sensitive = sat_state(m, f, _settings(cfg)).states
    lines = ["digraph model {", "  rankdir=LR;", '  node [shape=circle];']
    for s in m.states:
        attrs = [f'label="{m.state_meta[s].name}"']
        if s in m.finals:
            attrs.append("shape=doublecircle")
        if s in sensitive:
            attrs.append('style=filled fillcolor=gray80')
        if s == m.initial:
            attrs.append("penwidth=2")
        lines.append(f"  q{s} [{' '.join(attrs)}];")
    for t in sorted(m.transitions, key=lambda t: (t.source, t.label.name, t.target)):
        prob = "" if t.prob == 1 else f"{t.prob}."
        lines.append(f'  q{t.source} -> q{t.target} [label="{prob}{t.label.name}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _emit(cfg: RunConfig, line: str, payload: dict):
    if cfg.output == "json":
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(line)


# -- argument parsing -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opacheck",
        description="Opacity model checker for labelled Markov chains")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, with_property=True):
        p.add_argument("model", help="path to an ldtmc model file")
        if with_property:
            p.add_argument("--property", "-p", required=True,
                           help="property string (see README for the grammar)")
        p.add_argument("--mode", choices=["semantic", "per-expression"],
                       default="semantic", help="opacity check mode")
        p.add_argument("--precision", type=int, default=11,
                       help="decimal digits for value rendering (default 11)")
        p.add_argument("--state-cap", type=int, default=DEFAULT_STATE_CAP)
        p.add_argument("--dfa-cap", type=int, default=10 ** 6)
        p.add_argument("--product-cap", type=int, default=10 ** 5)
        p.add_argument("--output", choices=["text", "json"], default="text")
        p.add_argument("--verbose-traces", action="store_true",
                       help="render trailing termination blocks in traces")

    p_check = sub.add_parser("check", help="evaluate a property at the initial state")
    common(p_check)

    p_degree = sub.add_parser("degree", help="degree of opacity with witness traces")
    common(p_degree)

    p_entropy = sub.add_parser("entropy", help="entropy of the non-opaque language")
    common(p_entropy)
    p_entropy.add_argument("--nmax", type=int, default=ent.DEFAULT_NMAX)
    p_entropy.add_argument("--tail-window", type=int, default=ent.DEFAULT_TAIL_WINDOW)

    p_ni = sub.add_parser("ni", help="bounded non-interference check")
    common(p_ni, with_property=False)
    p_ni.add_argument("--high", required=True, help="comma-separated high labels")
    p_ni.add_argument("--low", required=True, help="comma-separated low labels")
    p_ni.add_argument("--depth", type=int, default=8, help="trace length bound")

    p_validate = sub.add_parser("validate", help="report structural violations")
    common(p_validate, with_property=False)

    p_export = sub.add_parser("export", help="emit model JSON and/or DOT graph")
    common(p_export, with_property=False)
    p_export.add_argument("--json", dest="json_path", help="write model JSON here")
    p_export.add_argument("--dot", dest="dot_path", help="write a DOT graph here")
    p_export.add_argument("--sensitive",
                          help="state formula marking states to style in DOT output")
    return parser


def config_from_args(args) -> RunConfig:
    cfg = RunConfig(model_path=args.model, subcommand=args.subcommand)
    cfg.property_text = getattr(args, "property", None)
    cfg.mode = args.mode
    cfg.precision = args.precision
    cfg.state_cap = args.state_cap
    cfg.dfa_cap = args.dfa_cap
    cfg.product_cap = args.product_cap
    cfg.output = args.output
    cfg.verbose_traces = args.verbose_traces
    if args.subcommand == "entropy":
        cfg.n_max = args.nmax
        cfg.tail_window = args.tail_window
    if args.subcommand == "ni":
        cfg.high = tuple(x for x in args.high.split(",") if x)
        cfg.low = tuple(x for x in args.low.split(",") if x)
        cfg.depth = args.depth
    if args.subcommand == "export":
        cfg.json_path = args.json_path
        cfg.dot_path = args.dot_path
        cfg.sensitive = args.sensitive
    if cfg.precision < 1:
        raise OpacheckError("precision must be at least 1")
    return cfg


_RUNNERS = {
    "check": run_check,
    "degree": run_degree,
    "entropy": run_entropy,
    "ni": run_ni,
    "validate": run_validate,
    "export": run_export,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        return _RUNNERS[cfg.subcommand](cfg)
    except OpacheckError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
