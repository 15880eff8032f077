"""Command-line harness: ``magt solve``, ``magt simulate``, ``magt report``.

Exit codes: 0 success, 1 runtime/domain error, 2 input or configuration
error, 3 valid instance the solver does not support.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from magt import clri, equilibria, fictitious, nlevel, replicator
from magt.errors import (
    ConfigError,
    GameError,
    ParseError,
    UnsupportedInstance,
    ValidationError,
)
from magt.game import (
    Game,
    SymmetricGame,
    embed_symmetric,
    parse_document,
    save_game,
    symmetric_view,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_INPUT = 2
EXIT_UNSUPPORTED = 3


def run_seed(master: int, index: int) -> int:
    """Seed of run ``index`` in a batch: first 8 bytes (little endian) of
    sha256 of ``"<master>:<index>"``."""
    digest = hashlib.sha256(f"{int(master)}:{int(index)}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def threads() -> int:
    try:
        return max(1, int(os.environ.get("MAGT_THREADS", "1")))
    except ValueError:
        raise ConfigError("MAGT_THREADS must be an integer") from None


def write_atomic(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


def _num(x) -> str:
    return format(float(x), ".10g")


def _strategy_text(s) -> str:
    return "(" + ",".join(_num(p) for p in s.probs) + ")"


def _profile_text(game: Game, profile) -> str:
    pure = profile.pure_profile()
    if pure is not None:
        return "(" + ",".join(game.profile_names(pure)) + ")"
    return "(" + ",".join(_strategy_text(s) for s in profile) + ")"


# --- loading -----------------------------------------------------------


def _read_text(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None


def _load_config(path) -> dict:
    text = _read_text(path)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON in {path}: {exc.msg}", line=exc.lineno) from None
    if not isinstance(doc, dict):
        raise ParseError(f"config {path} must be a JSON object")
    return doc


def _game_from(value, base: Path):
    if isinstance(value, str):
        return parse_document(_read_text(base / value))
    if isinstance(value, dict):
        return parse_document(json.dumps(value))
    raise ConfigError("'game' must be a file path or an inline game document")


def _checked(build, *args):
    """Build a config-derived object, reporting failures as config errors."""
    try:
        return build(*args)
    except GameError as exc:
        raise ConfigError(str(exc)) from None


def _require(cfg, key):
    if key not in cfg:
        raise ConfigError(f"config is missing required field {key!r}")
    return cfg[key]


# --- solve ---------------------------------------------------------------


def cmd_solve(args) -> int:
    doc = parse_document(_read_text(args.game))
    sym = None
    if isinstance(doc, SymmetricGame):
        sym, game = doc, embed_symmetric(doc)
    else:
        game = doc
        if args.symmetric:
            try:
                sym = symmetric_view(game)
            except GameError as exc:
                raise ValidationError(f"--symmetric: {exc}") from None
    out = Path(args.out)
    lines = [f"game: {args.game}",
             f"players: {', '.join(game.players)}"]

    reduced = equilibria.iterated_dominance(game, args.mode)
    rows = [["player", "action", "step", "dominator", "mode"]]
    for e in reduced.elimination_log:
        rows.append([game.players[e.player], game.actions[e.player][e.action], e.step,
                     _strategy_text(e.dominator), e.mode])
    write_atomic(out / "dominance.csv", _csv(rows))
    write_atomic(out / "reduced.json", save_game(reduced.subgame()))
    surviving = ["(" + ",".join(p) + ")" for p in reduced.profile_names()]
    lines.append(f"dominance ({args.mode}): {len(reduced.elimination_log)} eliminated; "
                 f"surviving profiles: {' '.join(surviving)}")
    if reduced.order_dependent:
        lines.append("note: weak elimination results may depend on elimination order")

    try:
        nash = equilibria.enumerate_nash_2p(game, args.cap, args.tolerance)
    except UnsupportedInstance as exc:
        write_atomic(out / "summary.txt", "\n".join(lines) + "\n")
        print("\n".join(lines))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    rows = [["profile", "regret", "kind", "strict"]]
    for res in nash:
        rows.append([_profile_text(game, res.profile), _num(res.regret), res.kind,
                     str(res.strict).lower()])
    write_atomic(out / "nash.csv", _csv(rows))
    lines.append(f"nash equilibria: {len(nash)}")
    for res in nash:
        tag = "strict " if res.strict else ""
        lines.append(f"  {_profile_text(game, res.profile)} {tag}{res.kind} "
                     f"regret={_num(res.regret)}")

    if sym is not None:
        rows = [["strategy", "is_nash", "is_ess", "witness"]]
        resolution = equilibria.max_resolution(sym.n_actions, args.resolution)
        lines.append(f"ess (invader grid 1/{resolution}):")
        for p in equilibria.symmetric_equilibria(sym, args.cap, args.tolerance):
            v = equilibria.check_ess(sym, p, resolution)
            rows.append([_strategy_text(p), str(v.is_nash).lower(), str(v.is_ess).lower(),
                         "" if v.witness is None else _strategy_text(v.witness)])
            lines.append(f"  {_strategy_text(p)} ess={str(v.is_ess).lower()}")
        write_atomic(out / "ess.csv", _csv(rows))
    write_atomic(out / "summary.txt", "\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK


# --- simulate ------------------------------------------------------------


def _seed(args, cfg) -> int:
    if args.seed is not None:
        return args.seed
    return int(cfg.get("seed", 0))


def _sim_fp(args, cfg, base, out) -> str:
    game = _game_from(_require(cfg, "game"), base)
    if isinstance(game, SymmetricGame):
        game = embed_symmetric(game)
    beliefs = None
    if "initial_weights" in cfg:
        w = cfg["initial_weights"]
        if not isinstance(w, list) or len(w) != game.n_players:
            raise ConfigError("initial_weights needs one entry per player")
        beliefs = [_checked(lambda i=i: fictitious.BeliefState(i, tuple(w[i])).validate(game))
                   for i in range(game.n_players)]
    budget = args.budget if args.budget is not None else int(cfg.get("budget", 100))
    trace = fictitious.run_fp(
        game, beliefs, budget=budget,
        window=int(cfg.get("window", fictitious.DEFAULT_WINDOW)),
        tie_rule=cfg.get("tie_rule", fictitious.LOWEST), seed=_seed(args, cfg),
        confirm=int(cfg.get("confirm", fictitious.DEFAULT_CONFIRM)))
    write_atomic(out / "fp_trace.csv", fictitious.trace_to_csv(trace))
    return trace.status.describe(game)


def _sim_replicator(args, cfg, base, out) -> str:
    doc = _game_from(_require(cfg, "game"), base)
    try:
        sym = doc if isinstance(doc, SymmetricGame) else symmetric_view(doc)
    except GameError as exc:
        raise ValidationError(f"replicator dynamics need a symmetric game: {exc}") from None
    initial = np.asarray(_require(cfg, "initial"), dtype=float)
    if initial.shape != (sym.n_actions,):
        raise ConfigError(f"'initial' needs {sym.n_actions} non-negative entries")
    pop = _checked(replicator.Population, initial)
    budget = args.budget if args.budget is not None else int(cfg.get("budget", 1000))
    trace = replicator.run_replicator(sym, pop, budget, float(cfg.get("eps", 1e-8)))
    write_atomic(out / "replicator_trace.csv", replicator.trace_to_csv(trace))
    status = trace.status
    if status == "steady":
        status += " shares=" + ",".join(_num(x) for x in trace.shares[-1])
    probe = cfg.get("probe")
    if probe is not None and trace.status == "steady":
        res = replicator.stability_probe(
            sym, trace.shares[-1], float(probe.get("perturbation", 0.01)),
            int(probe.get("trials", 20)), _seed(args, cfg),
            int(probe.get("budget", 5000)))
        write_atomic(out / "probe.csv", replicator.probe_to_csv(res))
        status += " stability=" + ("stable" if res.stable else "unstable")
    return status


def _clri_params(cfg) -> clri.ClriParams:
    agents = _require(cfg, "agents")
    if not isinstance(agents, list) or not agents:
        raise ConfigError("'agents' must be a non-empty list")
    try:
        acts = [int(a["actions"]) for a in agents]
        c = [float(a["c"]) for a in agents]
        l = [float(a["l"]) for a in agents]
        r = [float(a["r"]) for a in agents]
    except KeyError as exc:
        raise ConfigError(f"agent entry is missing field {exc.args[0]!r}") from None
    n = cfg.get("N", len(agents))
    if n != len(agents):
        raise ConfigError(f"N={n} but {len(agents)} agents listed")
    return clri.ClriParams(np.array(acts), np.array(c), np.array(l), np.array(r),
                           volatility=cfg.get("volatility"), impact=cfg.get("impact"))


def _sim_clri(args, cfg, base, out) -> str:
    params = _clri_params(cfg)
    steps = args.budget if args.budget is not None else int(cfg.get("steps", 30))
    e0 = cfg.get("e0", 1.0)
    pred = clri.clri_predict(params, e0, steps)
    sim = clri.clri_simulate(
        params, int(cfg.get("states", 20)), steps, int(cfg.get("trials", 10_000)),
        _seed(args, cfg), e0, cfg.get("weights"))
    write_atomic(out / "clri.csv", clri.results_to_csv(pred, sim))
    parts = []
    for i in range(params.n_agents):
        parts.append(f"agent {i}: predicted={_num(pred.values[-1, i])} "
                     f"empirical={_num(sim.mean.values[-1, i])}"
                     f"+-{_num(sim.half_width[-1, i])}")
    if params.volatility is not None and np.any(params.volatility > 0):
        bound = params.volatility * (params.change - params.learn) / (params.actions - 1)
        parts.append("residual bound v(c-l)/(|A|-1): "
                     + ",".join(_num(b) for b in bound))
    return "; ".join(parts)


def _society_run(game, roster, steps, seed, matching):
    return nlevel.run_society(game, roster, steps, seed, matching)


def _sim_society(args, cfg, base, out) -> str:
    doc = _game_from(_require(cfg, "game"), base)
    matching = bool(cfg.get("matching", False))
    if isinstance(doc, SymmetricGame) and not matching:
        doc = embed_symmetric(doc)
    roster_cfg = _require(cfg, "roster")
    if not isinstance(roster_cfg, list):
        raise ConfigError("'roster' must be a list")
    roster = [nlevel.AgentSpec.from_dict(r) for r in roster_cfg]
    steps = args.budget if args.budget is not None else int(cfg.get("steps", 1000))
    runs = int(cfg.get("runs", 1))
    master = _seed(args, cfg)
    seeds = [run_seed(master, k) for k in range(runs)]
    with ThreadPoolExecutor(max_workers=threads()) as pool:
        traces = list(pool.map(
            lambda s: _society_run(doc, roster, steps, s, matching), seeds))
    per_level: dict[int, list[float]] = {}
    for k, trace in enumerate(traces):
        write_atomic(out / f"society_run{k:03d}.csv", nlevel.trace_to_csv(trace))
        write_atomic(out / f"society_summary{k:03d}.csv", nlevel.summary_to_csv(trace))
        for lv, m in trace.level_means().items():
            per_level.setdefault(lv, []).append(m)
    return "; ".join(f"level {lv}: mean utility {_num(np.mean(v))}"
                     for lv, v in sorted(per_level.items()))


SIMULATORS = {
    "fp": _sim_fp,
    "replicator": _sim_replicator,
    "clri": _sim_clri,
    "society": _sim_society,
}


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    base = Path(args.config).resolve().parent
    out = Path(args.out)
    status = SIMULATORS[args.dynamics](args, cfg, base, out)
    write_atomic(out / "status.txt", status + "\n")
    print(status)
    return EXIT_OK


# --- report --------------------------------------------------------------


SCHEMAS = {
    # name: (key columns, fixed value columns, allowed column prefixes)
    "society_summary": (("level",), ("mean_utility", "variance"), (), ("agent",)),
    "clri": (("step", "agent"), ("predicted", "empirical", "half_width"), (), ()),
    "replicator": (("step",), (), ("share_", "fitness_"), ()),
    "society_trace": ((), (), ("reward_",), ("step", "action_", "partner_")),
    "fp": ((), (), ("payoff_",), ("t", "action_", "belief_")),
}


def _matches(col, names, prefixes):
    return col in names or any(col.startswith(p) for p in prefixes)


def _schema_of(header):
    for name, (keys, values, value_prefixes, ignored) in SCHEMAS.items():
        if not all(k in header for k in keys) or not all(v in header for v in values):
            continue
        ignored_names = tuple(x for x in ignored if not x.endswith("_"))
        ignored_prefixes = tuple(x for x in ignored if x.endswith("_"))
        if not any(_matches(c, values, value_prefixes) for c in header):
            continue
        if all(_matches(c, keys + values + ignored_names, value_prefixes + ignored_prefixes)
               for c in header):
            return name
    return None


def _read_csv(path):
    text = _read_text(path)
    rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]
    if not rows:
        raise ValidationError(f"{path}: empty file")
    return rows[0], rows[1:]


def _offending_column(header, name=None):
    candidates = [name] if name else list(SCHEMAS)
    best = None
    for cand in candidates:
        keys, values, prefixes, ignored = SCHEMAS[cand]
        names = keys + values + tuple(x for x in ignored if not x.endswith("_"))
        pfx = prefixes + tuple(x for x in ignored if x.endswith("_"))
        bad = [c for c in header if not _matches(c, names, pfx)]
        missing = [c for c in keys + values if c not in header]
        found = (bad + missing)[:1]
        if found and (best is None or len(bad) + len(missing) < best[0]):
            best = (len(bad) + len(missing), found[0])
    return best[1] if best else header[0]


def cmd_report(args) -> int:
    if not args.traces:
        raise ConfigError("report needs at least one trace file")
    schema = None
    tables = []
    for path in args.traces:
        header, rows = _read_csv(path)
        name = _schema_of(header)
        if name is None:
            raise ValidationError(
                f"{path}: unrecognised column {_offending_column(header)!r}")
        if schema is None:
            schema = name
        elif name != schema:
            raise ValidationError(
                f"{path}: column {_offending_column(header, schema)!r} does not fit "
                f"the {schema} schema of the first file")
        tables.append((header, rows))
    keys, values, prefixes, _ = SCHEMAS[schema]
    value_cols = [c for c in tables[0][0] if _matches(c, values, prefixes)]

    # per file: mean of each value column per key; then mean/std across files
    per_file = []
    for header, rows in tables:
        idx = {c: header.index(c) for c in header}
        groups: dict[tuple, list[list[float]]] = {}
        for row in rows:
            key = tuple(row[idx[k]] for k in keys)
            try:
                vals = [float(row[idx[c]]) if row[idx[c]] != "" else float("nan")
                        for c in value_cols]
            except (KeyError, ValueError):
                raise ValidationError(f"non-numeric or missing value in {value_cols}") from None
            groups.setdefault(key, []).append(vals)
        per_file.append({k: np.mean(v, axis=0) for k, v in groups.items()})
    all_keys = sorted(set().union(*per_file), key=lambda k: tuple(
        (0, float(x)) if _isnum(x) else (1, x) for x in k))
    header = list(keys) + [f"{c}_{stat}" for c in value_cols for stat in ("mean", "std")]
    header.append("n")
    out_rows = []
    for key in all_keys:
        stack = np.array([f[key] for f in per_file if key in f])
        mean = stack.mean(axis=0)
        std = stack.std(axis=0, ddof=1) if len(stack) > 1 else np.zeros_like(mean)
        row = list(key)
        for m, s in zip(mean, std):
            row += [_num(m), _num(s)]
        row.append(str(len(stack)))
        out_rows.append(row)

    widths = [max(len(str(x)) for x in col) for col in zip(header, *out_rows)]
    text = "\n".join("  ".join(str(x).rjust(w) for x, w in zip(r, widths))
                     for r in [header] + out_rows) + "\n"
    dat = "# " + " ".join(header) + "\n" + "".join(
        " ".join(str(x) for x in r) + "\n" for r in out_rows)
    out = Path(args.out)
    write_atomic(out / "report.txt", f"# schema: {schema}; files: {len(tables)}\n" + text)
    write_atomic(out / "report.dat", dat)
    write_atomic(out / "report.csv", _csv([header] + out_rows))
    print(text, end="")
    return EXIT_OK


def _isnum(x) -> bool:
    try:
        float(x)
        return True
    except ValueError:
        return False


# --- entry point -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="magt", description="Normal-form games and multiagent learning dynamics.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default="out", help="output directory (default: %(default)s)")
        p.add_argument("--format", default="csv", choices=["csv"],
                       help="output format (default: %(default)s)")

    p = sub.add_parser("solve", help="dominance, Nash equilibria and ESS of a game file")
    p.add_argument("game", help="game file (JSON)")
    p.add_argument("--symmetric", action="store_true",
                   help="treat a two-player game as symmetric and check ESS")
    p.add_argument("--mode", choices=["strict", "weak"], default="strict",
                   help="dominance mode (default: %(default)s)")
    p.add_argument("--tolerance", type=float, default=1e-9,
                   help="Nash regret tolerance (default: %(default)s)")
    p.add_argument("--cap", type=int, default=equilibria.DEFAULT_CAP,
                   help="max actions per player for enumeration (default: %(default)s)")
    p.add_argument("--resolution", type=int, default=100,
                   help="ESS invader grid resolution (default: %(default)s)")
    p.add_argument("--seed", type=int, default=None, help="unused; accepted for uniformity")
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="run a learning dynamic from a JSON config")
    p.add_argument("dynamics", choices=sorted(SIMULATORS))
    p.add_argument("config", help="config file (JSON)")
    p.add_argument("--seed", type=int, default=None, help="override the config's seed")
    p.add_argument("--budget", type=int, default=None,
                   help="override the step budget")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="aggregate trace or summary CSV files")
    p.add_argument("traces", nargs="*", help="CSV files of one schema")
    common(p)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UnsupportedInstance as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except (ParseError, ValidationError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except GameError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
