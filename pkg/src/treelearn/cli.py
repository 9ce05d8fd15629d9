"""Command-line driver.

Exit codes: 0 when a consistent hypothesis was found (or a check passed),
1 when provably none exists (or the check failed), 2 on input errors.
"""

from __future__ import annotations

import argparse
import json
import os
import pickle
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .automata import AlphabetError
from .brute_oracle import bf_consistent
from .mso_compiler import (CompileError, FormulaSyntaxError, StateBudgetExceeded, format_formula,
                           parse_formula, parameter_names)
from .mso_learner import (NoConsistentHypothesis, NoConsistentParameters, Index, alphabet_for,
                          apply_training, compiled, index_for, trace, verify)
from .monoid import MonoidTooLarge
from .online_learner import NotRealizable, online_add, online_init, online_relabel
from .qf_learner import BOTTOM, gen_lemma3_tree, learn_qf
from .tree_core import (BINARY, UNRANKED, OracleSession, TreeSyntaxError, format_training,
                        format_tree, parse_training, parse_tree)

INDEX_MAGIC = b"treelearn-index v1\n"


class InputError(Exception):
    pass


def stats_path() -> Path:
    env = os.environ.get("TREELEARN_STATS")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "treelearn" / "last-run.jsonl"


def _write_stats(command: str, counters: dict) -> None:
    path = stats_path()
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            for k, v in counters.items():
                fh.write(json.dumps({"command": command, "counter": k, "value": v}) + "\n")
    except OSError:
        pass


def _read_source(arg: str, what: str) -> tuple[str, str]:
    """Text and display name for a file argument; ``-`` is stdin."""
    if arg == "-":
        return sys.stdin.read(), "<stdin>"
    try:
        return Path(arg).read_text(), arg
    except OSError as exc:
        raise InputError(f"cannot read {what} file {arg}: {exc.strerror}") from None


def _load_tree(args):
    text, name = _read_source(args.tree, "tree")
    try:
        return parse_tree(text, args.mode)
    except TreeSyntaxError as exc:
        raise InputError(f"{name}: {exc}") from None


def _load_formula(arg: str):
    if arg.lstrip().startswith("("):
        text, name = arg, "<argument>"
    else:
        text, name = _read_source(arg, "formula")
    try:
        return parse_formula(text)
    except FormulaSyntaxError as exc:
        raise InputError(f"{name}: {exc}") from None


def _load_training(arg: str, tree):
    text, name = _read_source(arg, "training")
    try:
        train = parse_training(text)
        train.validate(tree)
    except TreeSyntaxError as exc:
        raise InputError(f"{name}: {exc}") from None
    except ValueError as exc:
        raise InputError(f"{name}: {exc}") from None
    return train


def _extra_labels(args) -> tuple[str, ...]:
    raw = getattr(args, "alphabet", None)
    return tuple(s for s in raw.split(",") if s) if raw else ()


def _build(args, tree, phi, kind: str = "simon") -> Index:
    return index_for(tree, phi, kind=kind, alphabet=_extra_labels(args))


def _params_line(params) -> str:
    return " ".join(str(v) if v != BOTTOM else "_" for v in params)


# -- subcommands -----------------------------------------------------------------

def cmd_index(args) -> int:
    tree = _load_tree(args)
    phi = _load_formula(args.formula)
    idx = _build(args, tree, phi, args.kind)
    mon = idx.monoid
    print(f"nodes {tree.n}")
    print(f"heavy-paths {len(idx.dec.paths)}")
    print(f"automaton-states {idx.aut.num_states}")
    print(f"monoid-elements {len(mon)}")
    print(f"parameters {mon.num_params}")
    print(f"index-touches {idx.budget.indexing}")
    if args.out:
        try:
            with open(args.out, "wb") as fh:
                fh.write(INDEX_MAGIC)
                pickle.dump(idx, fh, protocol=pickle.HIGHEST_PROTOCOL)
        except OSError as exc:
            raise InputError(f"cannot write index file {args.out}: {exc.strerror}") from None
    _write_stats("index", {"nodes": tree.n, "index_touches": idx.budget.indexing,
                           "monoid_elements": len(mon)})
    return 0


def _load_index(path: str, tree) -> Index:
    try:
        with open(path, "rb") as fh:
            head = fh.read(len(INDEX_MAGIC))
            if head != INDEX_MAGIC:
                raise InputError(f"{path}: not a treelearn index (offset 0)")
            idx = pickle.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read index file {path}: {exc.strerror}") from None
    t = idx.tree
    if (t.labels, t.left, t.right) != (tree.labels, tree.left, tree.right):
        raise InputError(f"{path}: index was built for a different tree")
    return idx


def cmd_learn(args) -> int:
    tree = _load_tree(args)
    phi = _load_formula(args.formula)
    train = _load_training(args.train, tree)
    idx = _load_index(args.index, tree) if args.index else _build(args, tree, phi)
    if idx.formula is not None and idx.formula != phi:
        raise InputError(f"{args.index}: index was built for a different formula")
    trained = apply_training(idx, train)
    counters = {"index_touches": idx.budget.indexing, "update_touches": trained.budget.updating}
    try:
        params = trace(trained)
    except NoConsistentParameters:
        print("NO-CONSISTENT-PARAMS")
        _write_stats("learn", counters)
        return 1
    if not verify(trained, params, train):
        raise AssertionError("traced parameters fail the direct check")
    counters["trace_touches"] = trained.budget.tracing
    _write_stats("learn", counters)
    print(" ".join(["CONSISTENT"] + [str(v) for v in params]))
    return 0


def cmd_learn_qf(args) -> int:
    tree = _load_tree(args)
    train = _load_training(args.train, tree)
    mode = UNRANKED if args.unranked else tree.mode
    session = OracleSession(tree)
    try:
        h = learn_qf(session, train, args.ell, mode)
    except NoConsistentHypothesis:
        print("NO-CONSISTENT-HYPOTHESIS")
        _write_stats("learn-qf", dict(session.counters))
        return 1
    _write_stats("learn-qf", dict(session.counters))
    print(h.text())
    print(" ".join(["PARAMS"] + _params_line(h.params).split()))
    return 0


def cmd_online(args) -> int:
    tree = _load_tree(args)
    phi = _load_formula(args.formula)
    alpha = alphabet_for(tree, phi, _extra_labels(args))
    aut = compiled(phi, alpha, tree.mode)
    state = online_init(tree, aut, phi, parameter_names(phi))
    status = 0
    for lineno, line in enumerate(sys.stdin, 1):
        body = line.split("#", 1)[0].split()
        if not body:
            continue
        try:
            if body[0] == "relabel" and len(body) == 3 and body[1].isdigit():
                h = online_relabel(state, int(body[1]), body[2])
            elif len(body) == 2 and body[0].isdigit() and body[1] in ("+", "-"):
                h = online_add(state, (int(body[0]), body[1]))
            else:
                raise InputError(f"<stdin>: line {lineno}: expected '<node> <+|->' "
                                 f"or 'relabel <node> <label>'")
            print(" ".join(["CONSISTENT"] + [str(v) for v in h.params]), flush=True)
            status = 0
        except NotRealizable:
            print("NOT-REALIZABLE", flush=True)
            status = 1
        except (ValueError, AlphabetError) as exc:
            raise InputError(f"<stdin>: line {lineno}: {exc}") from None
    _write_stats("online", {"updates": len(state.history),
                            "max_update_touches": max(state.history, default=0),
                            "total_update_touches": sum(state.history)})
    return status


def cmd_check(args) -> int:
    tree = _load_tree(args)
    phi = _load_formula(args.formula)
    train = _load_training(args.train, tree)
    try:
        params = tuple(int(s) for s in args.params.split(",") if s.strip())
    except ValueError:
        raise InputError(f"--params: expected comma-separated node ids, got {args.params!r}") from None
    names = parameter_names(phi)
    if len(params) != len(names):
        raise InputError(f"--params: formula has {len(names)} parameters, {len(params)} given")
    for v in params:
        if not 0 <= v < tree.n:
            raise InputError(f"--params: node {v} is not in the tree")
    aut = compiled(phi, alphabet_for(tree, phi, _extra_labels(args)), tree.mode)
    ok = bf_consistent(tree, aut, params, train)
    print("CONSISTENT" if ok else "INCONSISTENT")
    _write_stats("check", {"consistent": int(ok)})
    return 0 if ok else 1


def cmd_gen_lemma3(args) -> int:
    if args.m < 1 or args.ell < 0:
        raise InputError("need --m >= 1 and --ell >= 0")
    tree, train, named = gen_lemma3_tree(args.m, args.ell)
    tree_text = format_tree(tree) + "\n"
    train_text = format_training(train)
    if args.tree_out or args.train_out:
        try:
            if args.tree_out:
                Path(args.tree_out).write_text(tree_text)
            if args.train_out:
                Path(args.train_out).write_text(train_text)
        except OSError as exc:
            raise InputError(f"cannot write output: {exc}") from None
    if not args.tree_out:
        sys.stdout.write(tree_text)
    if not args.train_out:
        sys.stdout.write(train_text)
    _write_stats("gen-lemma3", {"nodes": tree.n, **named})
    return 0


def cmd_stats(args) -> int:
    path = stats_path()
    try:
        sys.stdout.write(path.read_text())
    except OSError:
        raise InputError(f"no statistics recorded yet ({path})") from None
    return 0


# -- argument parsing -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="treelearn", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def tree_args(sp, formula=True):
        sp.add_argument("--tree", required=True, help="tree term file, or - for stdin")
        sp.add_argument("--mode", default="auto", choices=("auto", BINARY, UNRANKED))
        if formula:
            sp.add_argument("--formula", required=True,
                            help="formula file or an inline s-expression")
            sp.add_argument("--alphabet", default="",
                            help="extra comma-separated labels for the automaton")

    sp = sub.add_parser("index", help="build an index and print its sizes")
    tree_args(sp)
    sp.add_argument("--out", help="write the index to this file")
    sp.add_argument("--kind", default="simon", choices=("simon", "binary"))
    sp.set_defaults(func=cmd_index)

    sp = sub.add_parser("learn", help="find consistent parameters for a formula")
    tree_args(sp)
    sp.add_argument("--train", required=True)
    sp.add_argument("--index", help="index file written by 'index --out'")
    sp.set_defaults(func=cmd_learn)

    sp = sub.add_parser("learn-qf", help="learn a quantifier-free hypothesis")
    tree_args(sp, formula=False)
    sp.add_argument("--train", required=True)
    sp.add_argument("--ell", type=int, required=True)
    sp.add_argument("--unranked", action="store_true", help="use the unranked signature")
    sp.set_defaults(func=cmd_learn_qf)

    sp = sub.add_parser("online", help="stream examples and relabels from stdin")
    tree_args(sp)
    sp.set_defaults(func=cmd_online)

    sp = sub.add_parser("check", help="verify a hypothesis against a training set")
    tree_args(sp)
    sp.add_argument("--train", required=True)
    sp.add_argument("--params", required=True, help="comma-separated node ids")
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("gen-lemma3", help="emit the two-fan fixture tree and examples")
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--ell", type=int, required=True)
    sp.add_argument("--tree-out")
    sp.add_argument("--train-out")
    sp.set_defaults(func=cmd_gen_lemma3)

    sp = sub.add_parser("stats", help="print counters of the last run as JSON lines")
    sp.set_defaults(func=cmd_stats)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CompileError, StateBudgetExceeded, MonoidTooLarge, AlphabetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
