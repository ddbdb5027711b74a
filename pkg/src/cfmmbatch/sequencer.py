"""Run batches back to back, carrying CFMM reserves from one to the next.

The first batch declares the CFMMs. Later batches may mention a CFMM by id
(its declared reserves are ignored in favour of the carried ones); CFMMs
they leave out still take part with their carried reserves. Fees charged on
inflows either stay in the reserves (``carry_fee_deposit``) or move to a fee
sink, one account per CFMM.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Callable, TextIO

import numpy as np

from .errors import InstanceError, UnknownCfmm
from .functions import fee_image
from .market import BatchInstance, BatchSolution, CfmmDecl
from .verify import VerifierReport, verify_solution

log = logging.getLogger(__name__)

Solver = Callable[[BatchInstance], BatchSolution]


@dataclass
class SequenceResult:
    solutions: list[BatchSolution]
    instances: list[BatchInstance]
    reports: list[VerifierReport]
    reserves: dict[str, np.ndarray]
    fee_sink: dict[str, np.ndarray]  # per CFMM, in the CFMM's own asset order
    trajectory: list[dict[str, np.ndarray]] = field(default_factory=list)  # reserves after each batch

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)

    def rates(self) -> list[np.ndarray]:
        return [np.asarray(s.prices, dtype=float) for s in self.solutions]


def _default_solver(inst: BatchInstance) -> BatchSolution:
    from .convex import solve_convex

    return solve_convex(inst)


def _bind(batch: BatchInstance, state: dict[str, CfmmDecl], first: bool) -> BatchInstance:
    """The batch with every known CFMM at its carried reserves."""
    parts = []
    seen = set()
    for part in batch.participants:
        if not isinstance(part, CfmmDecl):
            parts.append(part)
            continue
        if part.id in seen:
            raise InstanceError(f"CFMM {part.id} declared twice in one batch")
        seen.add(part.id)
        if first:
            state[part.id] = part
            parts.append(part)
            continue
        known = state.get(part.id)
        if known is None:
            raise UnknownCfmm(f"CFMM {part.id} was not declared in the first batch")
        if tuple(known.assets) != tuple(part.assets):
            raise UnknownCfmm(f"CFMM {part.id} changed assets from {known.assets} to {part.assets}")
        parts.append(known)
    for cid, known in state.items():
        if cid not in seen:
            parts.append(known)
    return BatchInstance(batch.assets, tuple(parts), dict(batch.options))


def run_sequence(batches: list[BatchInstance], carry_fee_deposit: bool = False,
                 solver: Solver | None = None, tol: float | None = None) -> SequenceResult:
    solver = solver or _default_solver
    if not batches:
        return SequenceResult([], [], [], {}, {})
    symbols = batches[0].symbols
    state: dict[str, CfmmDecl] = {}
    sink: dict[str, np.ndarray] = {}
    out = SequenceResult([], [], [], {}, sink)
    for t, batch in enumerate(batches):
        if batch.symbols != symbols:
            raise InstanceError(f"batch {t} trades {batch.symbols}, expected {symbols}")
        inst = _bind(batch, state, first=(t == 0))
        sol = solver(inst)
        report = verify_solution(inst, sol, tol)
        if not report.passed:
            log.warning("batch %d fails %s", t, ", ".join(report.failed()))
        sol.verifier_report = report.checks
        out.solutions.append(sol)
        out.instances.append(inst)
        out.reports.append(report)
        for i, part in inst.cfmms():
            x0 = part.reserves
            x = x0 + np.asarray(sol.trades[i], dtype=float)[list(part.assets)]
            if part.fee and not carry_fee_deposit:
                kept = fee_image(x, x0, part.fee)
                sink[part.id] = sink.get(part.id, np.zeros(x.size)) + (x - kept)
                x = kept
            state[part.id] = part.with_reserves(np.maximum(x, 0.0))
        out.trajectory.append({cid: d.reserves.copy() for cid, d in state.items()})
    out.reserves = {cid: d.reserves.copy() for cid, d in state.items()}
    return out


def write_rates_csv(result: SequenceResult, symbols: list[str], fh: TextIO):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["batch", *symbols])
    for t, p in enumerate(result.rates()):
        w.writerow([t, *(f"{v:.17g}" for v in p)])
