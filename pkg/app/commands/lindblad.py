"""
lindblad: RK4 time series and, optionally, convergence of the discrete Kraus chain.
"""
import logging

import numpy as np

from app.commands.common import add_input, add_out, out_dir, parse_list, read_density
from app.core.errors import ValidationError
from app.core.lindblad import compare_limit, trajectory
from app.services.codec import load_document
from app.utils.output import OutputSink

logger = logging.getLogger(__name__)

CONVERGENCE_COLUMNS = ["delta_t", "steps", "trace_distance"]


def _entry_columns(dim: int):
    names = []
    for i in range(dim):
        for j in range(dim):
            names += [f"re_{i}_{j}", f"im_{i}_{j}"]
    return names


def run_lindblad(args) -> int:
    kind, model = load_document(args.input)
    if kind != "generator":
        raise ValidationError("WrongKind", f"{args.input} holds a {kind}, expected a generator")
    g = model.to_domain()
    rho0 = read_density(args.state, None)

    columns = ["t"] + _entry_columns(g.dim)
    rows = []
    for time, rho in trajectory(g, rho0, args.t, args.dt, args.every):
        flat = rho.matrix.reshape(-1)
        row = {"t": time}
        row.update(dict(zip(columns[1:], np.column_stack([flat.real, flat.imag]).reshape(-1))))
        rows.append(row)

    sink = OutputSink(out_dir(args))
    sink.table("timeseries.csv", rows, columns, primary=True)
    summary = None
    if args.delta_t:
        result = compare_limit(g, rho0, args.t, parse_list(args.delta_t, float, "--delta-t"), dt_fine=args.dt)
        conv = [{"delta_t": r.delta_t, "steps": r.steps, "trace_distance": r.distance} for r in result.rows]
        sink.table("convergence.csv", conv, CONVERGENCE_COLUMNS)
        order = "nan" if result.order is None else f"{result.order:.6g}"
        summary = f"order={order} reference_dt={result.reference_dt:g}"
    sink.flush()
    if summary:
        print(summary)
    return 0


def register(subparsers) -> None:
    p = subparsers.add_parser("lindblad", help="integrate a Lindblad generator")
    add_input(p, "generator file")
    p.add_argument("--state", required=True, help="initial state file")
    p.add_argument("--t", type=float, required=True, help="final time")
    p.add_argument("--dt", type=float, required=True, help="RK4 step")
    p.add_argument("--every", type=int, default=1, help="record every n-th step")
    p.add_argument("--delta-t", help="comma-separated Kraus step sizes to compare against RK4")
    add_out(p)
    p.set_defaults(handler=run_lindblad)
