"""Write a synthetic daily `date,close` series for bootstrap experiments."""

import argparse
import datetime as dt

import numpy as np


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out")
    ap.add_argument("--days", type=int, default=3000)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--s0", type=float, default=50.0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    # Slowly switching volatility regimes so windows differ in character.
    vol = np.where(np.sin(np.arange(args.days) / 180.0) > 0, 0.012, 0.025)
    log_ret = rng.normal(0.0002, vol)
    closes = args.s0 * np.exp(np.cumsum(log_ret))
    start = dt.date(2000, 1, 3)
    with open(args.out, "w", encoding="utf-8") as f:
        f.write("date,close\n")
        for i, c in enumerate(closes):
            f.write(f"{(start + dt.timedelta(days=i)).isoformat()},{c:.6f}\n")


if __name__ == "__main__":
    main()
