#!/usr/bin/env python3
"""Envelope sweeps over the certifiable benchmark rows: simulate random
members of each certificate's declared uncertainty family at the certified
period bound and report the worst envelope margin.

Usage: python scripts/run_envelope_sweeps.py [draws]
"""

import sys
import time

from escert.golden import GOLDEN_ROWS
from escert.oracle import envelope_sweep

SWEEP_ROWS = [
    "table1-row2", "table1-row3", "table1-row5", "table1-row6",
    "table3-row2", "table3-row3", "table7-row1", "table7-row2",
    "table6-row1", "table6-row2", "table8-row1",
]


def main(draws: int = 20) -> int:
    rows = {r.row_id: r for r in GOLDEN_ROWS}
    bad = 0
    for rid in SWEEP_ROWS:
        row = rows[rid]
        t0 = time.perf_counter()
        cert = row.certificate(at_period_bound=True)
        report = envelope_sweep(cert, draws=draws, sim_dither=row.sweep_dither)
        flag = "VIOLATION" if report.violation else "ok"
        print(
            f"{rid:<13} route={row.route:<13} eps*={cert.epsilon_star:.4g} "
            f"worst margin={report.worst_margin:+.5g} at {report.worst_location:.4g} "
            f"[{flag}, {time.perf_counter() - t0:.1f}s]"
        )
        bad += report.violation
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main(int(sys.argv[1]) if len(sys.argv) > 1 else 20))
