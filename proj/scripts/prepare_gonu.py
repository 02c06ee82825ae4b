#!/usr/bin/env python3
"""Prepare the GONU (gold, oil, NASDAQ, USD/EUR) CSV from raw daily quotes.

The library consumes a wide-form CSV (x, GOLD, OIL, NASDAQ, USD). This script
resamples raw daily close prices to weekly frequency (Friday anchor, last
observation of the week) and writes that layout. It does not download
anything; pass the four raw CSVs exported from the providers.

Choices documented here because the upstream pipeline is underspecified:
  - weekly anchor: Friday (W-FRI), last close of the week;
  - weeks missing any of the four series are dropped;
  - x is the week index starting at 0, not a date, so that training code
    sees a uniform grid.

Usage:
  prepare_gonu.py --gold gold.csv --oil oil.csv --nasdaq nasdaq.csv \
      --usd usd.csv --out gonu.csv

Each raw file needs columns: Date, Close.
"""

import argparse

import pandas as pd


def load_series(path: str, name: str) -> pd.Series:
    df = pd.read_csv(path)
    cols = {c.lower(): c for c in df.columns}
    if "date" not in cols or "close" not in cols:
        raise SystemExit(f"{path}: need Date and Close columns")
    s = pd.Series(
        pd.to_numeric(df[cols["close"]], errors="coerce").values,
        index=pd.to_datetime(df[cols["date"]]),
        name=name,
    ).dropna()
    return s.resample("W-FRI").last()


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--gold", required=True)
    ap.add_argument("--oil", required=True)
    ap.add_argument("--nasdaq", required=True)
    ap.add_argument("--usd", required=True)
    ap.add_argument("--out", required=True)
    args = ap.parse_args()

    frame = pd.concat(
        [
            load_series(args.gold, "GOLD"),
            load_series(args.oil, "OIL"),
            load_series(args.nasdaq, "NASDAQ"),
            load_series(args.usd, "USD"),
        ],
        axis=1,
    ).dropna()
    frame.insert(0, "x", range(len(frame)))
    frame.to_csv(args.out, index=False, float_format="%.6g")
    print(f"wrote {len(frame)} weekly rows to {args.out}")


if __name__ == "__main__":
    main()
