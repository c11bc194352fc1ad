"""Command-line interface: JSON on stdout, logs on stderr.

Exit status is 0 for success or a property that holds, 1 for a property that
fails, and 2 for bad input.
"""
from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from pathlib import Path

from . import conservation, fluxpdr, recode, search
from .engine import step
from .lattice import Configuration, Neighborhood, PeriodicConfig, TorusConfig, config_from_json
from .quantity import Quantity, format_value, total, vacuum_set, vacuum_symbol
from .rules import LocalRule, from_wolfram

log = logging.getLogger("ca_conserve")

EXIT_OK, EXIT_FALSE, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


# --- argument parsing helpers ----------------------------------------------------------

def _read_json(path: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    if not text.strip():
        raise InputError(f"{path} is empty")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc


def parse_rule(arg: str) -> LocalRule:
    """A rule file path, or an elementary rule number."""
    if re.fullmatch(r"\d+", arg) and not Path(arg).exists():
        return from_wolfram(int(arg))
    return LocalRule.from_json(_read_json(arg))


def parse_phi(arg: str, alphabet: int, modulus: int | None = None) -> Quantity:
    """A quantity file path, or ``id`` for phi(s) = s."""
    if arg == "id":
        return Quantity.identity(alphabet, modulus)
    q = Quantity.from_json(_read_json(arg))
    if modulus is not None and q.domain != "mod":
        q = Quantity.mod([int(v) for v in q.values], modulus)
    if q.size != alphabet:
        raise InputError(f"quantity has {q.size} values but the alphabet has {alphabet} symbols")
    return q


_WORD = re.compile(r"(?:\((\d+)\))?(\d*)(?:\[(\d)\])?(\d*)")


def parse_config(arg: str, background: int = 0):
    """A configuration file, or a 1-D word such as ``1011[0]0110`` or ``(1)``.

    Brackets mark site 0 (otherwise the word starts at 0). A leading
    ``(core)`` makes the surroundings periodic instead of constant.
    """
    m = _WORD.fullmatch(arg)
    if m is None or not any(m.groups()):
        return config_from_json(_read_json(arg))
    core, left, mid, right = m.groups()
    digits = [int(c) for c in left + (mid or "") + right]
    start = -len(left) if mid is not None else 0
    if core:
        return PeriodicConfig(tuple(int(c) for c in core), tuple(digits), start)
    return Configuration.from_word(digits, start=start, background=background)


def _emit(doc) -> None:
    json.dump(doc, sys.stdout, indent=1, sort_keys=False)
    sys.stdout.write("\n")


# --- subcommands ---------------------------------------------------------------------

def cmd_analyze(args) -> int:
    if args.wolfram is not None:
        rule = from_wolfram(args.wolfram)
    elif args.rule:
        rule = parse_rule(args.rule)
    else:
        raise InputError("give a rule file or --wolfram N")
    report = conservation.analyze(rule, args.mod, torus_samples=args.samples)
    _emit(report)
    return EXIT_OK


def cmd_check(args) -> int:
    rule = parse_rule(args.rule)
    phi = parse_phi(args.phi, rule.A, args.mod)
    verdict = conservation.finitary_holds(rule, phi)
    doc = {
        "conserved": verdict.conserved,
        "finitary": verdict.holds,
        "drift": format_value(phi, verdict.drift),
        "vacuum_preserving": verdict.vacuum_preserving,
    }
    if verdict.counterexample is not None:
        doc["counterexample"] = verdict.counterexample.to_json(phi)
    elif not verdict.drift_free:
        doc["note"] = "the perturbation identity holds but every cell adds the drift at each step"
    if verdict.vacuum_empty:
        doc.setdefault("note", "phi has no vacuum state")
    _emit(doc)
    return EXIT_OK if verdict.conserved else EXIT_FALSE


def cmd_search(args) -> int:
    phi = parse_phi(args.phi, args.alphabet, args.mod)
    nbhd = Neighborhood.box(args.radius)
    rules = search.enumerate_conserving(args.alphabet, nbhd, phi, mode=args.mode, shards=args.shards)
    docs = []
    for r in rules:
        doc = r.to_json()
        doc["meta"] = {"code": r.code()}
        if args.alphabet == 2 and args.radius == 1:
            doc["meta"]["wolfram"] = r.code()
        docs.append(doc)
    log.info("%d conserving rules", len(docs))
    _emit(docs)
    return EXIT_OK


def cmd_flux(args) -> int:
    rule = parse_rule(args.rule)
    phi = parse_phi(args.phi, rule.A)
    a = parse_config(args.config, vacuum_symbol(phi))
    if args.check:
        report = fluxpdr.flux_identities_check(rule, phi, a, args.site)
        _emit(report)
        return EXIT_OK if report["ok"] else EXIT_FALSE
    _emit(fluxpdr.flux(rule, phi, a, args.site).to_json())
    return EXIT_OK


def cmd_pdr_build(args) -> int:
    rule = parse_rule(args.rule)
    phi = parse_phi(args.phi, rule.A)
    pdr = fluxpdr.build_pdr(rule, phi)
    if args.output:
        fluxpdr.save_pdr(pdr, args.output)
        _emit({"written": args.output, "B": pdr.B, "alphabet": pdr.alphabet})
    else:
        _emit(pdr.to_json())
    return EXIT_OK


def cmd_pdr_verify(args) -> int:
    import numpy as np

    rule = parse_rule(args.rule)
    phi = parse_phi(args.phi, rule.A)
    pdr = fluxpdr.DisplacementRule.from_json(_read_json(args.pdr))
    report = fluxpdr.verify_pdr(rule, phi, pdr, args.trials, np.random.default_rng(args.seed))
    _emit(report.to_json())
    return EXIT_OK if report.ok else EXIT_FALSE


def cmd_pdr_reconstruct(args) -> int:
    pdr = fluxpdr.DisplacementRule.from_json(_read_json(args.pdr))
    phi = parse_phi(args.phi, pdr.alphabet)
    rec = fluxpdr.reconstruct_ca(phi, pdr)
    _emit(rec.to_json(limit=args.limit))
    return EXIT_OK


def _ledger_entry(phi: Quantity, a):
    if isinstance(a, TorusConfig):
        return format_value(phi, phi.sum(int(c) for c in a.cells.ravel()))
    if isinstance(a, PeriodicConfig):
        return format_value(phi, conservation.cesaro_average(phi, a))
    return format_value(phi, total(phi, a))


def cmd_simulate(args) -> int:
    rule = parse_rule(args.rule)
    phi = parse_phi(args.phi, rule.A, args.mod)
    background = min(vacuum_set(phi)) if vacuum_set(phi) else 0
    a = parse_config(args.config, background)
    kind = "density" if isinstance(a, PeriodicConfig) else "total"
    ledger = [{"step": 0, kind: _ledger_entry(phi, a)}]
    for t in range(1, args.steps + 1):
        a = step(rule, a)
        ledger.append({"step": t, kind: _ledger_entry(phi, a)})
    constant = len({json.dumps(e[kind]) for e in ledger}) == 1
    _emit({"ledger": ledger, "constant": constant, "final": a.to_json()})
    return EXIT_OK


def cmd_recode(args) -> int:
    phi = Quantity.from_json(_read_json(args.phi))
    nonneg, integer = recode.recode_both(phi)
    _emit(
        {
            "nonnegative": nonneg.to_json(),
            "integer": integer.quantity.to_json(),
            "rank": integer.rank,
            "basis": [[format_value(Quantity.rational([0]), x) for x in b] for b in integer.basis],
            "offset": [format_value(Quantity.rational([0]), x) for x in integer.offset],
            "vacuum_original": sorted(vacuum_set(phi)),
            "vacuum_nonnegative": sorted(vacuum_set(nonneg)),
            "vacuum_integer": sorted(integer.vacuum_after),
        }
    )
    return EXIT_OK


# --- parser -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ca-conserve", description="Conservation laws of cellular automata.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="conservation report for a rule")
    a.add_argument("rule", nargs="?", help="rule file or elementary rule number")
    a.add_argument("--wolfram", type=int)
    a.add_argument("--mod", type=int, help="work over Z/m")
    a.add_argument("--samples", type=int, default=2000, help="torus samples when exhaustive is too big")
    a.set_defaults(func=cmd_analyze)

    c = sub.add_parser("check", help="does the rule conserve phi?")
    c.add_argument("rule")
    c.add_argument("phi", help="quantity file or 'id'")
    c.add_argument("--mod", type=int)
    c.set_defaults(func=cmd_check)

    s = sub.add_parser("search", help="all rules conserving phi")
    s.add_argument("--alphabet", type=int, required=True)
    s.add_argument("--radius", type=int, required=True)
    s.add_argument("phi", nargs="?", default="id")
    s.add_argument("--mod", type=int)
    s.add_argument("--mode", choices=[search.AUTO, search.EXHAUSTIVE, search.BACKTRACK], default=search.AUTO)
    s.add_argument("--shards", type=int, default=1)
    s.set_defaults(func=cmd_search)

    f = sub.add_parser("flux", help="flux at one site")
    f.add_argument("rule")
    f.add_argument("phi")
    f.add_argument("config", help="configuration file or word like 1011[0]0110 or (1)")
    f.add_argument("--site", type=int, default=0)
    f.add_argument("--check", action="store_true", help="also check the flux identities")
    f.set_defaults(func=cmd_flux)

    d = sub.add_parser("pdr", help="particle displacement rules")
    dsub = d.add_subparsers(dest="pdr_command", required=True)
    b = dsub.add_parser("build")
    b.add_argument("rule")
    b.add_argument("phi")
    b.add_argument("-o", "--output")
    b.set_defaults(func=cmd_pdr_build)
    v = dsub.add_parser("verify")
    v.add_argument("rule")
    v.add_argument("phi")
    v.add_argument("pdr")
    v.add_argument("--trials", type=int, default=1000)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_pdr_verify)
    r = dsub.add_parser("reconstruct")
    r.add_argument("phi")
    r.add_argument("pdr")
    r.add_argument("--limit", type=int, default=64, help="most rules to print")
    r.set_defaults(func=cmd_pdr_reconstruct)

    m = sub.add_parser("simulate", help="evolve a configuration and track the phi total")
    m.add_argument("rule")
    m.add_argument("config")
    m.add_argument("--steps", type=int, default=10)
    m.add_argument("--phi", default="id")
    m.add_argument("--mod", type=int)
    m.set_defaults(func=cmd_simulate)

    q = sub.add_parser("recode", help="nonnegative and natural-number forms of phi")
    q.add_argument("phi")
    q.set_defaults(func=cmd_recode)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (InputError, ValueError, KeyError, TypeError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
