"""
Command-line entry point.

Every subcommand writes one report (JSON or CSV) to ``--out`` or stdout.
Each option can also be set through an ``AMNESIC_<NAME>`` environment
variable; an explicit flag wins over the environment, which wins over the
built-in default.

CSV column order is fixed per subcommand (see ``CSV_COLUMNS``).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__
from . import adversary as adv
from .hashing import HashError
from .infotheory import eq3_bound
from .protocol import ABORT, HonestCommitter, amflip_run, ot_from_rot, run_amcom, run_amrot
from .quantum import MAX_QUBITS, as_bits, bits_to_str
from .verify import SUITES, run_suites

SCHEMA = 1
ENV_PREFIX = "AMNESIC_"
MAX_SAMPLED_LAMBDA = 4096

CSV_COLUMNS = {
    "commit": ["trial", "b", "verdict", "accepted", "forced_measurements", "transcript_sha256"],
    "rot": ["trial", "b", "m0", "m1", "output", "success", "forced_measurements",
            "transcript_sha256"],
    "flip": ["trial", "c_alice", "c_bob", "agree", "double_open", "transcript_sha256"],
    "ot-wrap": ["trial", "b", "m0", "m1", "output", "correct", "transcript_sha256"],
    "attack": ["attack_id", "lambda", "ell", "mode", "value", "ci_low", "ci_high", "bound",
               "passed", "seed"],
    "verify": ["suite", "name", "passed", "details"],
}

COMMITTERS = ("honest", "breidbart", "stall-holder")
FLIP_ADVERSARIES = ("honest", "breidbart")
DOUBLE_OPEN_ATTACKS = ("double-open-breidbart", "double-open-standard")


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    lam: int
    ell: int
    seed: int
    trials: int
    adversary: str
    exact: bool
    out: str | None
    format: str
    workers: int
    suite: str | None = None
    m0: str | None = None
    m1: str | None = None
    b: int | None = None

    def report_config(self) -> dict:
        d = asdict(self)
        d.pop("out")
        d.pop("workers")
        d["lambda"] = d.pop("lam")
        return d


# option name -> (type, default)
OPTIONS = {
    "lam": (int, None),
    "ell": (int, 1),
    "seed": (int, 0),
    "trials": (int, None),
    "adversary": (str, "honest"),
    "exact": (bool, False),
    "out": (str, None),
    "format": (str, "json"),
    "workers": (int, 1),
}

DEFAULT_LAMBDA = {"commit": 8, "rot": 16, "flip": 8, "ot-wrap": 16, "attack": 4, "verify": 0}
DEFAULT_TRIALS = {"commit": 1000, "rot": 1000, "flip": 10000, "ot-wrap": 1000,
                  "attack": 10**5, "verify": 1}


def _env_name(key: str) -> str:
    return ENV_PREFIX + ("LAMBDA" if key == "lam" else key.upper())


def _from_env(key: str, kind, environ):
    raw = environ.get(_env_name(key))
    if raw is None:
        return None
    if kind is bool:
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off", ""):
            return False
        raise UsageError(f"{_env_name(key)}={raw!r} is not a boolean")
    try:
        return kind(raw)
    except ValueError:
        raise UsageError(f"{_env_name(key)}={raw!r} is not a valid {kind.__name__}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument("--lambda", dest="lam", type=int, default=None, help="qubits per session")
    common.add_argument("--ell", type=int, default=None, help="ROT output length")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--trials", type=int, default=None)
    common.add_argument("--adversary", default=None, help="adversary id")
    common.add_argument("--exact", action="store_const", const=True, default=None,
                        help="exact enumeration instead of sampling")
    common.add_argument("--out", default=None, help="report path (default stdout)")
    common.add_argument("--format", choices=("json", "csv"), default=None)
    common.add_argument("--workers", type=int, default=None, help="process pool size")

    parser = argparse.ArgumentParser(prog="amnesic", allow_abbrev=False,
                                     description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("--version", action="version", version=f"amnesic {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("commit", parents=[common], allow_abbrev=False,
                   help="run bit-commitment sessions")
    sub.add_parser("rot", parents=[common], allow_abbrev=False,
                   help="run random-OT sessions")
    sub.add_parser("flip", parents=[common], allow_abbrev=False,
                   help="run coin-flip sessions")
    ot = sub.add_parser("ot-wrap", parents=[common], allow_abbrev=False,
                        help="chosen-input OT over random OT")
    ot.add_argument("--m0", default=None, help="sender input 0 as a bit string")
    ot.add_argument("--m1", default=None, help="sender input 1 as a bit string")
    ot.add_argument("--b", type=int, choices=(0, 1), default=None, help="receiver choice")
    sub.add_parser("attack", parents=[common], allow_abbrev=False,
                   help="evaluate an attack against its bound")
    ver = sub.add_parser("verify", parents=[common], allow_abbrev=False,
                         help="run verification suites")
    ver.add_argument("suite", choices=SUITES + ("all",))
    return parser


def resolve_config(args: argparse.Namespace, environ=None) -> ExperimentConfig:
    """Merge flags, environment and defaults (in that order of precedence)."""
    environ = os.environ if environ is None else environ
    values = {}
    for key, (kind, default) in OPTIONS.items():
        value = getattr(args, key)
        if value is None:
            value = _from_env(key, kind, environ)
        if value is None:
            if key == "lam":
                default = DEFAULT_LAMBDA[args.command]
            elif key == "trials":
                default = DEFAULT_TRIALS[args.command]
            value = default
        values[key] = value
    if values["format"] not in ("json", "csv"):
        raise UsageError(f"unknown format {values['format']!r}")
    cfg = ExperimentConfig(command=args.command, suite=getattr(args, "suite", None),
                           m0=getattr(args, "m0", None), m1=getattr(args, "m1", None),
                           b=getattr(args, "b", None), **values)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    if cfg.trials < 1:
        raise UsageError("--trials must be at least 1")
    if cfg.workers < 1:
        raise UsageError("--workers must be at least 1")
    # sampled attacks work qubit by qubit and need no state vector
    cap = MAX_SAMPLED_LAMBDA if cfg.command == "attack" and not cfg.exact else MAX_QUBITS
    if cfg.command != "verify" and not 1 <= cfg.lam <= cap:
        raise UsageError(f"--lambda must be in 1..{cap}")
    if cfg.ell < 1:
        raise UsageError("--ell must be at least 1")
    if cfg.command == "commit" and cfg.adversary not in COMMITTERS:
        raise UsageError(f"commit adversary must be one of {', '.join(COMMITTERS)}")
    if cfg.command == "flip" and cfg.adversary not in FLIP_ADVERSARIES:
        raise UsageError(f"flip adversary must be one of {', '.join(FLIP_ADVERSARIES)}")
    if cfg.command in ("rot", "attack"):
        known = set(adv.builtin_attacks(1))
        if cfg.command == "attack":
            known |= set(DOUBLE_OPEN_ATTACKS)
        else:
            known.add("honest")
        if cfg.adversary not in known:
            raise UsageError(f"unknown adversary {cfg.adversary!r}; "
                             f"known: {', '.join(sorted(known))}")
    if cfg.command == "attack" and cfg.adversary == "honest":
        raise UsageError("attack needs an adversary id")
    if cfg.command == "ot-wrap":
        if (cfg.m0 is None) != (cfg.m1 is None):
            raise UsageError("--m0 and --m1 go together")
        if cfg.m0 is not None:
            for s in (cfg.m0, cfg.m1):
                if not s or set(s) - {"0", "1"}:
                    raise UsageError(f"{s!r} is not a bit string")
            if len(cfg.m0) != len(cfg.m1):
                raise UsageError("--m0 and --m1 must have equal length")


def trial_rng(seed: int, trial: int, *stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, trial, *stream])


def _digest(transcript) -> str:
    return hashlib.sha256(transcript.to_bytes()).hexdigest()


# -- per-trial workers (module level so a process pool can pickle them) --------

def _commit_trial(cfg: ExperimentConfig, trial: int) -> dict:
    rng = trial_rng(cfg.seed, trial)
    b = int(rng.integers(2))
    committer = {"honest": lambda: HonestCommitter(b),
                 "breidbart": lambda: adv.BreidbartCommitter(b),
                 "stall-holder": lambda: adv.StallHolderCommitter(b)}[cfg.adversary]()
    out = run_amcom(cfg.lam, b, rng, committer=committer)
    verdict = "abort" if out.verdict is ABORT else int(out.verdict)
    return {"trial": trial, "b": b, "verdict": verdict, "accepted": int(verdict == b),
            "forced_measurements": out.transcript.forced_measurements,
            "transcript_sha256": _digest(out.transcript)}


def _rot_trial(cfg: ExperimentConfig, trial: int) -> dict:
    rng = trial_rng(cfg.seed, trial)
    b = int(rng.integers(2))
    receiver = None
    if cfg.adversary != "honest":
        receiver = adv.builtin_attacks(cfg.lam)[cfg.adversary].as_receiver()
    out = run_amrot(cfg.lam, cfg.ell, b, rng, receiver=receiver)
    if receiver is None:
        output = out.receiver_output
        success = np.array_equal(output, out.m1 if b else out.m0)
        shown = bits_to_str(output)
    else:
        g0, g1 = out.receiver_output
        success = np.array_equal(g0, out.m0) and np.array_equal(g1, out.m1)
        shown = f"{bits_to_str(g0)}|{bits_to_str(g1)}"
    return {"trial": trial, "b": b, "m0": bits_to_str(out.m0), "m1": bits_to_str(out.m1),
            "output": shown, "success": int(success),
            "forced_measurements": out.transcript.forced_measurements,
            "transcript_sha256": _digest(out.transcript)}


def _flip_trial(cfg: ExperimentConfig, trial: int) -> dict:
    alice = adv.BreidbartCommitter(0) if cfg.adversary == "breidbart" else None
    out = amflip_run(trial_rng(cfg.seed, trial, 0), trial_rng(cfg.seed, trial, 1),
                     adversary=alice, lam=cfg.lam)
    c_a = "abort" if out.c_alice is ABORT else out.c_alice
    c_b = "abort" if out.c_bob is ABORT else out.c_bob
    return {"trial": trial, "c_alice": c_a, "c_bob": c_b, "agree": int(c_a == c_b),
            "double_open": "" if out.double_open is None else int(out.double_open),
            "transcript_sha256": _digest(out.transcript)}


def _ot_trial(cfg: ExperimentConfig, trial: int) -> dict:
    rng = trial_rng(cfg.seed, trial)
    if cfg.m0 is not None:
        m0, m1 = as_bits(cfg.m0), as_bits(cfg.m1)
    else:
        m0 = rng.integers(0, 2, cfg.ell, dtype=np.uint8)
        m1 = rng.integers(0, 2, cfg.ell, dtype=np.uint8)
    b = cfg.b if cfg.b is not None else int(rng.integers(2))
    output, transcript = ot_from_rot(m0, m1, b, cfg.lam, rng)
    return {"trial": trial, "b": b, "m0": bits_to_str(m0), "m1": bits_to_str(m1),
            "output": bits_to_str(output),
            "correct": int(np.array_equal(output, m1 if b else m0)),
            "transcript_sha256": _digest(transcript)}


TRIAL_WORKERS = {"commit": _commit_trial, "rot": _rot_trial, "flip": _flip_trial,
                 "ot-wrap": _ot_trial}


def _run_chunk(args) -> list[dict]:
    cfg, start, stop = args
    fn = TRIAL_WORKERS[cfg.command]
    return [fn(cfg, t) for t in range(start, stop)]


def run_trials(cfg: ExperimentConfig) -> list[dict]:
    """Run every trial; the result is independent of ``cfg.workers``."""
    if cfg.workers == 1:
        return _run_chunk((cfg, 0, cfg.trials))
    size = math.ceil(cfg.trials / (4 * cfg.workers))
    chunks = [(cfg, s, min(s + size, cfg.trials)) for s in range(0, cfg.trials, size)]
    with ProcessPoolExecutor(cfg.workers) as pool:
        return [row for part in pool.map(_run_chunk, chunks) for row in part]


def _combined_digest(rows: list[dict]) -> str:
    h = hashlib.sha256()
    for r in rows:
        h.update(bytes.fromhex(r["transcript_sha256"]))
    return h.hexdigest()


def summarize(cfg: ExperimentConfig, rows: list[dict]) -> tuple[dict, bool]:
    n = len(rows)
    summary = {"trials": n, "transcripts_sha256": _combined_digest(rows)}
    if cfg.command == "commit":
        summary["acceptance_rate"] = sum(r["accepted"] for r in rows) / n
        summary["forced_measurements"] = sum(r["forced_measurements"] for r in rows)
        ok = cfg.adversary != "honest" or summary["acceptance_rate"] == 1.0
    elif cfg.command == "rot":
        key = "match_rate" if cfg.adversary == "honest" else "guess_both_rate"
        summary[key] = sum(r["success"] for r in rows) / n
        summary["forced_measurements"] = sum(r["forced_measurements"] for r in rows)
        ok = cfg.adversary != "honest" or summary[key] == 1.0
    elif cfg.command == "flip":
        ones = sum(r["c_bob"] == 1 for r in rows)
        summary["agreement_rate"] = sum(r["agree"] for r in rows) / n
        summary["bias"] = ones / n - 0.5
        ok = True
        if cfg.adversary == "breidbart":
            summary["double_open_rate"] = sum(r["double_open"] == 1 for r in rows) / n
            summary["double_open_predicted"] = adv.BREIDBART_VALUE**cfg.lam
        else:
            ok = summary["agreement_rate"] == 1.0
    else:
        summary["correct_rate"] = sum(r["correct"] for r in rows) / n
        ok = summary["correct_rate"] == 1.0
    summary["passed"] = ok
    return summary, ok


def cmd_protocol(cfg: ExperimentConfig) -> tuple[dict, list[dict], bool]:
    rows = run_trials(cfg)
    summary, ok = summarize(cfg, rows)
    return summary, rows, ok


def cmd_attack(cfg: ExperimentConfig) -> tuple[dict, list[dict], bool]:
    if cfg.adversary in DOUBLE_OPEN_ATTACKS:
        strategy = (adv.DoubleOpenStrategy.breidbart() if cfg.adversary.endswith("breidbart")
                    else adv.DoubleOpenStrategy.standard(0))
        value = adv.double_open_success_exact(strategy, cfg.lam)
        bound = adv.BREIDBART_VALUE**cfg.lam
        row = {"attack_id": cfg.adversary, "lambda": cfg.lam, "ell": "", "mode": "exact",
               "value": value, "ci_low": value, "ci_high": value, "bound": bound,
               "passed": bool(value <= bound + 1e-9), "seed": cfg.seed}
    else:
        strategy = adv.builtin_attacks(cfg.lam)[cfg.adversary]
        mode = "exact" if cfg.exact else "mc"
        try:
            est = adv.ot_receiver_guess_probability(strategy, cfg.lam, cfg.ell, mode, cfg.trials,
                                                    rng=np.random.default_rng([cfg.seed, 0]),
                                                    seed=cfg.seed)
        except adv.StrategyError as exc:
            raise UsageError(str(exc)) from exc
        row = adv.attack_record(est, eq3_bound(cfg.lam, cfg.ell))
        row["passed"] = bool(est.ci_high - 2.0**-cfg.ell <= row["bound"])
        if mode == "mc":
            row["trials"] = cfg.trials
    summary = {k: row[k] for k in ("attack_id", "value", "bound", "passed")}
    return summary, [row], bool(row["passed"])


def cmd_verify(cfg: ExperimentConfig) -> tuple[dict, list[dict], bool]:
    suites = run_suites(cfg.suite, cfg.seed)
    rows = []
    for s in suites:
        for c in s["checks"]:
            details = {k: v for k, v in c.items() if k not in ("name", "passed")}
            rows.append({"suite": s["suite"], "name": c["name"], "passed": c["passed"],
                         "details": json.dumps(details, sort_keys=True)})
    ok = all(s["passed"] for s in suites)
    summary = {"passed": ok, "suites": {s["suite"]: s["passed"] for s in suites}}
    tables = {s["suite"]: s["table"] for s in suites if "table" in s}
    if tables:
        summary["tables"] = tables
    return summary, rows, ok


def build_report(cfg: ExperimentConfig, summary: dict, rows: list[dict]) -> dict:
    return {"schema": SCHEMA, "version": __version__, "command": cfg.command,
            "seed": cfg.seed, "config": cfg.report_config(), "summary": summary, "rows": rows}


def render(cfg: ExperimentConfig, report: dict) -> str:
    if cfg.format == "json":
        return json.dumps(report, sort_keys=True, indent=2) + "\n"
    buf = io.StringIO()
    buf.write(f"# schema={SCHEMA} version={__version__} command={cfg.command} "
              f"config={json.dumps(report['config'], sort_keys=True)}\n")
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS[cfg.command], extrasaction="ignore",
                            lineterminator="\n")
    writer.writeheader()
    writer.writerows(report["rows"])
    return buf.getvalue()


COMMANDS = {"commit": cmd_protocol, "rot": cmd_protocol, "flip": cmd_protocol,
            "ot-wrap": cmd_protocol, "attack": cmd_attack, "verify": cmd_verify}


def main(argv=None, environ=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args, environ)
        summary, rows, ok = COMMANDS[cfg.command](cfg)
    except (UsageError, HashError) as exc:
        print(f"amnesic: error: {exc}", file=sys.stderr)
        return 2
    text = render(cfg, build_report(cfg, summary, rows))
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
