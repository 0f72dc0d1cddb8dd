#!/usr/bin/env python3
"""Run every static verification study and drop the tables into a directory.

Covers the three families that need no time stepping: truncation refinement
for all built-in cases, the spectral symbol bound, and the randomized norm
inequalities.  Exit status is nonzero if anything is out of band, so this
doubles as a quick health check after touching the operator code.
"""

from __future__ import annotations

import argparse
import pathlib
import sys

from chfd.grid import GridSpec
from chfd.verification import (
    TRUNCATION_CASES,
    inequality_study,
    symbol_bound_study,
    truncation_study,
)


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="verification_out")
    ap.add_argument("--trials", type=int, default=200, help="inequality trials per grid")
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args(argv)

    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    failures = 0

    for name in TRUNCATION_CASES:
        report = truncation_study(name, m_list=(32, 64, 128, 256))
        (out / f"truncation_{name}.csv").write_text(report.to_csv())
        rate_l2, rate_linf = report.finest_rates(1)[0]
        ok = 3.9 <= rate_l2 <= 4.1
        failures += not ok
        print(f"[{'ok' if ok else 'FAIL'}] truncation {name}: "
              f"finest rates l2 {rate_l2:.3f}, linf {rate_linf:.3f}")

    symbols = symbol_bound_study(L=1.0, m_list=(16, 32, 64, 128, 256, 512))
    (out / "symbol_bound.csv").write_text(symbols.to_csv())
    bound = 2.0 * symbols.rows[-1][1]
    ok = symbols.max_ratio() <= bound and symbols.min_defect() >= 0.0
    failures += not ok
    print(f"[{'ok' if ok else 'FAIL'}] symbol bound: max ratio {symbols.max_ratio():.6f} "
          f"(allowed {bound:.6f}), min defect {symbols.min_defect():.3e}")

    for m in (32, 64):
        report = inequality_study(GridSpec(L=3.2, m=m), args.trials, args.seed)
        (out / f"inequalities_m{m}.csv").write_text(report.to_csv())
        ok = report.violations == 0
        failures += not ok
        print(f"[{'ok' if ok else 'FAIL'}] inequalities m={m}: "
              f"{report.violations} violations in {report.n_trials} trials")

    print(f"tables written to {out}/")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
