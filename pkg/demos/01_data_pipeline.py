"""From raw price CSVs to labeled training windows, step by step."""
import datetime as dt
import tempfile
from pathlib import Path

import numpy as np

from advalstm.market_data import (
    SplitSpec, align_trading_days, compute_features, ingest_eod,
    label_and_window, stack_examples,
)
from advalstm.synthetic import write_regime_price_csv

# fabricate a small universe of price files so the demo is self-contained
work = Path(tempfile.mkdtemp(prefix="advalstm_demo_"))
symbols = write_regime_price_csv(work, n_stocks=4, n_days=150, seed=7)
print("wrote", len(symbols), "price files to", work)
print((work / f"{symbols[0]}.csv").read_text().splitlines()[0])  # the header

# ingest: parse, validate, sort; one list of EOD records per stock
records = ingest_eod(work)
first = records[symbols[0]][0]
print("first record:", first.date, "close", first.close, "volume", first.volume)

# align: intersect trading calendars, drop stocks with poor coverage
aligned = align_trading_days(records, min_coverage=0.98)
print("aligned", len(aligned.series), "stocks over", len(aligned.calendar), "days,",
      "dropped", aligned.dropped)

# features: 11 numbers per stock-day; ratios, so price scale cancels out
series = aligned.series[symbols[0]]
feats = compute_features(series, 40)
print("feature vector on day 40:")
print(np.array2string(feats, precision=4))

# label + window: lag-day windows anchored at day t, labeled by day t+1's
# adjusted-close movement; moves inside (-0.5%, +0.55%) are dropped as neutral
spec = SplitSpec(
    train_end=dt.date(2020, 3, 1),
    val_end=dt.date(2020, 4, 15),
    test_end=dt.date(2020, 6, 1),
    lag=5,
)
splits = label_and_window(aligned, spec)
fractions = splits.positive_fraction()
for name in ("train", "val", "test"):
    x, y = stack_examples(getattr(splits, name))
    pos = fractions[name]
    pos_text = f"{pos:.1%} positive" if pos is not None else "empty"
    print(f"{name}: {y.size} examples, windows {x.shape}, {pos_text}")

# each example remembers where it came from
ex = splits.train[0]
print("first train example:", ex.stock_id, "anchored at", ex.anchor_date,
      "label", ex.label, f"movement {ex.movement_percent:+.4%}")
