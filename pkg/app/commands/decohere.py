"""
decohere-scan: off-diagonal environment overlaps against environment size.
"""
import logging

from app.commands.common import add_out, add_seed, out_dir, parse_list, require_seed
from app.core.decoherence import scaling_scan
from app.utils.output import OutputSink

logger = logging.getLogger(__name__)

SCALING_COLUMNS = ["N", "rms_offdiag", "stderr"]


def run_decohere_scan(args) -> int:
    stream = require_seed(args.seed)
    env_dims = parse_list(args.env_dims, int, "--env-dims")
    result = scaling_scan(env_dims, args.trials, args.mode, stream, n_outcomes=args.outcomes)
    rows = [{"N": r.env_dim, "rms_offdiag": r.rms_offdiag, "stderr": r.stderr} for r in result.rows]
    sink = OutputSink(out_dir(args))
    sink.table("scaling.csv", rows, SCALING_COLUMNS, primary=True)
    sink.flush()
    print(f"slope={result.slope:.6g} stderr={result.slope_stderr:.6g} mode={result.mode.value}")
    return 0


def register(subparsers) -> None:
    p = subparsers.add_parser("decohere-scan", help="RMS environment overlap against environment dimension")
    p.add_argument("--env-dims", required=True, help="comma-separated environment dimensions")
    p.add_argument("--trials", type=int, default=200, help="samples per dimension")
    p.add_argument("--mode", choices=["pure", "mixed"], default="pure")
    p.add_argument("--outcomes", type=int, default=2, help="outcome blocks per sample")
    add_seed(p)
    add_out(p)
    p.set_defaults(handler=run_decohere_scan)
