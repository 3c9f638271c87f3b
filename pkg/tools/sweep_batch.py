# tools/sweep_batch.py
import argparse, functools, logging, sys
from pathlib import Path

# --- Ensure repo root is on sys.path so 'workers', 'core', 'cli' import ---
ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from core.config import LossModel, parse_grid
from core.diagnostics import as_csv, write_text
from workers.pool import map_ordered
from workers.protocols import prepare_three_cluster
from workers.verify import id_ghz_reference, kept_state, loss_rate, mixed_fidelity

logger = logging.getLogger("ensqc.sweep")


def ghz_point(point, cutoff=2):
    eta_e, eta_d = point
    lm = LossModel(eta_e, eta_d)
    outcome = prepare_three_cluster(loss_model=None if lm.is_lossless else lm, cutoff=cutoff)
    r = loss_rate(lm.eta)
    f = mixed_fidelity(kept_state(outcome, ("2", "4", "6")), id_ghz_reference(r)) if outcome.branches else 0.0
    return {"eta_e": eta_e, "eta_d": eta_d, "eta": lm.eta,
            "success_probability": outcome.probability, "r": r, "fidelity": f}


def main():
    ap = argparse.ArgumentParser(description="Scan the three-cluster network over an (eta_e, eta_d) grid.")
    ap.add_argument('--out', required=True)
    ap.add_argument('--eta-e-grid', default='0.8:1:0.05')
    ap.add_argument('--eta-d-grid', default='0.8:1:0.05')
    ap.add_argument('--cutoff', type=int, default=2)
    ap.add_argument('--processes', type=int, default=1)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="[ensqc] %(levelname)s %(name)s: %(message)s")

    grid = [(e, d) for e in parse_grid(args.eta_e_grid) for d in parse_grid(args.eta_d_grid)]
    logger.info("scanning %d grid points", len(grid))
    rows = map_ordered(functools.partial(ghz_point, cutoff=args.cutoff), grid, args.processes)

    out_path = Path(args.out)
    write_text(as_csv(rows, "sweep"), out_path)
    logger.info("wrote %s", out_path.resolve())

if __name__ == '__main__':
    main()
