# cli/main.py
from __future__ import annotations
import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

# --- Ensure repo root is importable (so workers/core imports resolve) ---
ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

import numpy as np

from core.codes import ConfigError, EnsqcError, HeraldFailed, RoundFailed, lookup_for_exception
from core.config import COMMANDS, FORMATS, MODES, RATES, RunConfig, load_config_file, parse_grid, resolve_config
from core.detection import ExecutionMode, distribution_rows
from core.diagnostics import COLUMNS, as_csv, as_json, pretty_claims, pretty_outcome, pretty_table, write_text
from core.registry import ModeRegistry
from workers.protocols import (
    ExcitationParams,
    cz_fuse,
    encode_cluster,
    ideal_eme,
    leakage_weight,
    prepare_eme,
    prepare_three_cluster,
)
from workers.resources import expected_costs, simulate_growth, simulate_growth_lossy
from workers.verify import (
    CZ_PAIRS,
    claims_passed,
    id_cluster,
    id_ghz_reference,
    kept_state,
    loss_rate,
    run_claims,
    scan_loss,
    state_fidelity,
)

logger = logging.getLogger("ensqc")

GHZ_KEPT = ("2", "4", "6")


def build_argparser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ensqc",
        description="ensqc: Fock-space simulator and claim checker for heralded atomic-ensemble cluster states."
    )
    ap.add_argument("-v", "--verbose", action="store_true", help="Debug logging on stderr.")
    sub = ap.add_subparsers(dest="command", required=True, metavar="command")
    helps = {
        "eme": "Prepare an EME pair with two heralded rounds.",
        "ghz": "Fuse three EME pairs into a 3-qubit cluster.",
        "cz": "Destructive CZ fusion of two 2-qubit clusters.",
        "grow": "Monte Carlo of incremental linear-cluster growth.",
        "sweep-loss": "Tabulate loss rate, gate factor and threshold margin.",
        "verify-claims": "Check the headline numbers and print a pass/fail table.",
    }
    for name in COMMANDS:
        sp = sub.add_parser(name, help=helps[name])
        sp.add_argument("--config", default=None, help="JSON config file (flags override it).")
        sp.add_argument("--p", type=float, default=None, help="Excitation probability per write pulse.")
        sp.add_argument("--eta", type=float, default=None,
                        help="Overall efficiency, charged to the ensemble side (sets eta_e, eta_d=1).")
        sp.add_argument("--eta-e", dest="eta_e", type=float, default=None, help="Ensemble-coupling efficiency.")
        sp.add_argument("--eta-d", dest="eta_d", type=float, default=None, help="Detector efficiency.")
        sp.add_argument("--cutoff", type=int, default=None, help="Per-mode photon-number cutoff.")
        sp.add_argument("--mode", choices=MODES, default=None, help="analytic (all branches) or sampled.")
        sp.add_argument("--seed", type=int, default=None, help="RNG seed (required in sampled mode).")
        sp.add_argument("--trials", type=int, default=None, help="Monte Carlo trials / sampled attempts.")
        sp.add_argument("--N", dest="N", type=int, default=None, help="Qubits added to the seed 4-cluster.")
        sp.add_argument("--output", default=None, help="Write results here instead of stdout.")
        sp.add_argument("--format", dest="fmt", choices=FORMATS, default=None, help="Output format.")
        sp.add_argument("--eta-grid", dest="eta_grid", default=None, help="start:stop:step, stop inclusive.")
        sp.add_argument("--rate", choices=RATES, default=None, help="EME round rate: ideal p or derived.")
        sp.add_argument("--processes", type=int, default=None, help="Worker processes for Monte Carlo.")
    return ap


def _configure_logging(verbose: bool) -> None:
    root = logging.getLogger()
    for h in list(root.handlers):
        if getattr(h, "_ensqc", False):
            root.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("[ensqc] %(levelname)s %(name)s: %(message)s"))
    handler._ensqc = True
    root.addHandler(handler)
    root.setLevel(logging.DEBUG if verbose else logging.WARNING)


def _flags(args: argparse.Namespace) -> Dict[str, Any]:
    flags = {k: getattr(args, k) for k in ("p", "eta_e", "eta_d", "cutoff", "mode", "seed", "trials", "N",
                                           "output", "fmt", "eta_grid", "rate", "processes")}
    if args.eta is not None:
        if flags["eta_e"] is None:
            flags["eta_e"] = args.eta
        if flags["eta_d"] is None:
            flags["eta_d"] = 1.0
    return flags


def _report_error(exc: BaseException) -> None:
    code = lookup_for_exception(exc)
    if code is None:
        sys.stderr.write(f"[ensqc] {exc.__class__.__name__}: {exc}\n")
    else:
        sys.stderr.write(f"[ensqc] [{code.id}] {code.title}: {exc} ({code.hint})\n")


def _mode(cfg: RunConfig) -> ExecutionMode:
    return ExecutionMode(cfg.mode)


def _rng(cfg: RunConfig) -> Optional[np.random.Generator]:
    return np.random.default_rng(cfg.seed) if cfg.mode == "sampled" else None


def _loss(cfg: RunConfig):
    lm = cfg.loss_model
    return None if lm.is_lossless else lm


def _emit_outcome(cfg: RunConfig, name: str, outcome, fidelity: Optional[float], extra: Dict[str, Any]) -> str:
    record = outcome.record()
    if cfg.fmt == "json":
        return as_json({"command": name, "config": cfg.as_dict(), "outcome": record,
                        "fidelity": fidelity, **extra})
    if cfg.fmt == "csv":
        rows = distribution_rows(outcome.branches + outcome.rejected)
        return as_csv(rows, "distribution")
    text = pretty_outcome(name, record, fidelity)
    for k, v in extra.items():
        text += f"{k}: {v:.6g}\n" if isinstance(v, float) else f"{k}: {v}\n"
    return text


def _heralding_failure(cfg: RunConfig, name: str, exc: EnsqcError) -> str:
    _report_error(exc)
    if cfg.fmt == "json":
        return as_json({"command": name, "config": cfg.as_dict(), "outcome": {"status": "failure",
                                                                              "message": str(exc)}})
    return f"{name}: failure ({exc})\n"


# --------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------
def cmd_eme(cfg: RunConfig) -> Tuple[str, int]:
    try:
        outcome = prepare_eme("1", "2", ExcitationParams(cfg.p), _loss(cfg), _mode(cfg), _rng(cfg),
                              cfg.cutoff, max_attempts=cfg.trials)
    except RoundFailed as e:
        return _heralding_failure(cfg, "eme", e), 0
    fidelity = None
    extra: Dict[str, Any] = {}
    if outcome.branches:
        state = kept_state(outcome, ("1", "2"))
        fidelity = state_fidelity(state, ideal_eme("1", "2", ModeRegistry.for_qubits(("1", "2"))))
        extra["leakage"] = leakage_weight(state, [("1", "2")])
    extra["round_probabilities"] = outcome.details.get("round_probabilities", {})
    return _emit_outcome(cfg, "eme", outcome, fidelity, extra), 0


def cmd_ghz(cfg: RunConfig) -> Tuple[str, int]:
    try:
        outcome = prepare_three_cluster(loss_model=_loss(cfg), mode=_mode(cfg), rng=_rng(cfg), cutoff=cfg.cutoff)
    except HeraldFailed as e:
        return _heralding_failure(cfg, "ghz", e), 0
    reference = id_ghz_reference(loss_rate(cfg.loss_model.eta))
    fidelity = state_fidelity(kept_state(outcome, GHZ_KEPT), reference) if outcome.branches else None
    return _emit_outcome(cfg, "ghz", outcome, fidelity, {"r": loss_rate(cfg.loss_model.eta)}), 0


def cmd_cz(cfg: RunConfig) -> Tuple[str, int]:
    lm = cfg.loss_model
    r = loss_rate(lm.eta)
    state = encode_cluster(CZ_PAIRS) if r == 0.0 else id_cluster(CZ_PAIRS, r)
    outcome = cz_fuse(state, ("1", "2"), ("3", "4"), _loss(cfg), _mode(cfg), _rng(cfg), graph=CZ_PAIRS)
    fidelity = None
    if outcome.branches:
        fused = CZ_PAIRS.fused(("1", "2"), ("3", "4"))
        fidelity = state_fidelity(kept_state(outcome, fused.vertices), encode_cluster(fused))
    return _emit_outcome(cfg, "cz", outcome, fidelity, outcome.details.get("probabilities", {})), 0


def cmd_grow(cfg: RunConfig) -> Tuple[str, int]:
    seed = 0 if cfg.seed is None else cfg.seed
    if cfg.loss_model.is_lossless:
        stats = simulate_growth(cfg.N, cfg.p, cfg.trials, seed, cfg.rate, cfg.cutoff, cfg.processes)
    else:
        stats = simulate_growth_lossy(cfg.N, cfg.p, cfg.loss_model.eta, cfg.trials, seed, cfg.rate,
                                      cfg.cutoff, cfg.processes)
    ledger = expected_costs(cfg.p)
    if cfg.fmt == "json":
        return as_json({"command": "grow", "config": cfg.as_dict(), "stats": stats.row(),
                        "ledger": ledger.as_dict(), "ledger_total": ledger.per_qubit_cost * cfg.N}), 0
    if cfg.fmt == "csv":
        return as_csv([stats.row()], "growth"), 0
    text = pretty_table([stats.row()], COLUMNS["growth"])
    text += f"ledger 1536N/p: {ledger.per_qubit_cost * cfg.N:.6g}\n"
    text += f"ratio: {stats.mean_pulses / (ledger.per_qubit_cost * cfg.N):.6f}\n"
    return text, 0


def cmd_sweep_loss(cfg: RunConfig) -> Tuple[str, int]:
    rows = scan_loss(parse_grid(cfg.eta_grid), cfg.processes, include_crossing=True)
    if cfg.fmt == "json":
        return as_json({"command": "sweep-loss", "rows": rows}), 0
    if cfg.fmt == "csv":
        return as_csv(rows, "loss"), 0
    return pretty_table(rows, COLUMNS["loss"]), 0


def cmd_verify_claims(cfg: RunConfig) -> Tuple[str, int]:
    seed = 7 if cfg.seed is None else cfg.seed
    results = run_claims(p=cfg.p, N=cfg.N, trials=cfg.trials, seed=seed, processes=cfg.processes)
    rows = [r.as_dict() for r in results]
    status = 0 if claims_passed(results) else 1
    if cfg.fmt == "json":
        return as_json({"command": "verify-claims", "claims": rows, "passed": status == 0}), status
    if cfg.fmt == "csv":
        return as_csv(rows, "claims"), status
    return pretty_claims(rows), status


COMMAND_TABLE: Dict[str, Callable[[RunConfig], Tuple[str, int]]] = {
    "eme": cmd_eme,
    "ghz": cmd_ghz,
    "cz": cmd_cz,
    "grow": cmd_grow,
    "sweep-loss": cmd_sweep_loss,
    "verify-claims": cmd_verify_claims,
}


# -----------------------------------------------------------------------------

def run(argv: Optional[List[str]] = None) -> int:
    """Exit status: 0 success, 1 failed claim verification, 2 configuration error."""
    ap = build_argparser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    _configure_logging(args.verbose)

    try:
        cfg = resolve_config(args.command, _flags(args), load_config_file(args.config))
    except ConfigError as e:
        _report_error(e)
        return 2

    try:
        text, status = COMMAND_TABLE[cfg.command](cfg)
    except EnsqcError as e:
        _report_error(e)
        return 2
    write_text(text, cfg.output_path())
    if cfg.output_path() is not None:
        logger.info("wrote %s", cfg.output_path().resolve())
    return status


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
