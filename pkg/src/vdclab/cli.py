"""``vdclab <mode> --config <path> [--seed N] [--budget N] [--out DIR]``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .errors import EnumerationBudgetError, HypothesisError, PreconditionError, SearchExhausted
from .harness import MODES, ConfigError, ExperimentConfig, SweepPointError, run

CSV_COLUMNS = """\
CSV columns per mode:
  count          count.csv: B, q, count, ratio (= count / B^dim X)
  ffpoints       ffpoints.csv: q, affine, projective_Z
  singdim        singdim.csv: q, dim_Z, dim_sing, complete_intersection
  expsum         expsum.csv: instance, n, r, q, box, lhs, rhs_re, rhs_im, abs_err, sampled
  vsubspace      vsubspace.csv: instance, q, box, dim_V, lhs_re, lhs_im, rhs, abs_err
  audit          audit.csv: instance, n, r, B, p, q, one column per identity flag;
                 delta.csv (single audit): y1..yn, numerator, denominator
  select-primes  exponents.csv: n, r, e_p, e_q, exponent, heath_brown; plans.csv
  hooley-sweep   hooley.csv: q, count, main, residual, bound, ratio
  katz-sweep     katz.csv: q, max_ratio, rms_ratio, flagged, samples; katz_q<q>.csv: a, abs_sum, delta, ratio
  thm2-sweep     thm2.csv: instance_seed, B, p, q, N, main, residual, terms_total, ratio
  weighted       weighted.csv: B, q, lhs, rhs_main, residual, s, paper_error_term, ratio
  difference-law difference_law.csv: case, n, degree, p, y, holds
  strata         strata.csv: q, dim_S, S_size, dim_S_ok, dim_T_ok
Every run also writes report.json (deterministic), summary.txt and timings.json.
"""


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="vdclab", description="Point counts, exponential sums and differencing audits.",
        epilog=CSV_COLUMNS, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("mode", help="one of: " + ", ".join(MODES))
    ap.add_argument("--config", required=True, help="JSON experiment config")
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("--budget", type=int, help="enumeration budget (points per sweep)")
    ap.add_argument("--out", help="output directory (default: config 'out' or ./out/<mode>)")
    ap.add_argument("--workers", type=int, help="worker processes for sweep points")
    ap.add_argument("--version", action="version", version=f"vdclab {__version__}")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.mode not in MODES:
            raise ConfigError(f"unknown mode {args.mode!r}; expected one of {', '.join(MODES)}")
        path = Path(args.config)
        obj = json.loads(path.read_text())
        if obj.get("mode", args.mode) != args.mode:
            raise ConfigError(f"config is for mode {obj['mode']!r}, not {args.mode!r}")
        obj["mode"] = args.mode
        for key in ("seed", "budget", "out", "workers"):
            val = getattr(args, key)
            if val is not None:
                obj[key] = val
        obj.setdefault("out", str(Path("out") / args.mode))
        cfg = ExperimentConfig.from_dict(obj, base_dir=path.parent)
        result = run(cfg)
    except (ConfigError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"vdclab: config error: {exc}", file=sys.stderr)
        return 2
    except (SweepPointError, PreconditionError, HypothesisError, SearchExhausted,
            EnumerationBudgetError) as exc:
        print(f"vdclab: {exc}", file=sys.stderr)
        return 1
    print(result.files["summary.txt"], end="")
    print(f"wrote {', '.join(sorted(result.files))} to {cfg.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
