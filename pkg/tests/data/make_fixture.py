"""Regenerate the bundled two-month record fixture.

The fixture covers September and October 2019 with twelve synthetic
users.  Each user owns a pool of three addresses that are co-spent in
rotating pairs, so address clustering recovers one multi-address user
per pool.  Users 0-5 send a non-self transfer every single UTC day of
both months (the "regular" senders); users 6-11 transact sporadically
and occasionally pay themselves.  A handful of payouts go to one-off
addresses that never spend, which therefore stay singletons.

Run from the repository root:

    python tests/data/make_fixture.py
"""

from __future__ import annotations

import json
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

N_USERS = 12
POOL = 3
START = datetime(2019, 9, 1, tzinfo=timezone.utc)
DAYS = 61  # through 2019-10-31
OUT = Path(__file__).resolve().parent / "two_month.jsonl"


def address(user: int, slot: int) -> str:
    return f"u{user:02d}a{slot}"


def btc(sats: int) -> str:
    whole, frac = divmod(sats, 10**8)
    return f"{whole}.{frac:08d}"


def main() -> None:
    rng = np.random.default_rng(7)
    lines = []
    serial = 0

    def emit(day: int, hour: int, sender: int, outputs: list[tuple[str, int]]):
        nonlocal serial
        ts = START + timedelta(days=day, hours=hour, minutes=int(rng.integers(60)))
        pair = serial % POOL
        record = {
            "tx_id": f"t{serial:05d}",
            "inputs": [address(sender, pair), address(sender, (pair + 1) % POOL)],
            "outputs": [{"address": a, "amount": btc(s)} for a, s in outputs],
            "timestamp": ts.strftime("%Y-%m-%dT%H:%M:%SZ"),
        }
        lines.append(json.dumps(record, sort_keys=True))
        serial += 1

    for day in range(DAYS):
        for sender in range(6):
            target = int(rng.choice([u for u in range(N_USERS) if u != sender]))
            sats = int(rng.integers(10**4, 10**9))
            outs = [(address(target, int(rng.integers(POOL))), sats)]
            if rng.random() < 0.25:
                extra = int(rng.choice([u for u in range(N_USERS) if u != sender]))
                outs.append((address(extra, 0), int(rng.integers(10**4, 10**8))))
            emit(day, int(rng.integers(24)), sender, outs)

        for sender in range(6, N_USERS):
            if (day + sender) % 3:
                continue
            if rng.random() < 0.3:  # self-payment, stays a self-loop edge
                outs = [(address(sender, int(rng.integers(POOL))), int(rng.integers(10**4, 10**8)))]
            else:
                target = int(rng.choice([u for u in range(N_USERS) if u != sender]))
                outs = [(address(target, int(rng.integers(POOL))), int(rng.integers(10**4, 10**9)))]
            emit(day, int(rng.integers(24)), sender, outs)

        if day % 7 == 0:  # occasional payout to a never-spending address
            emit(day, 12, int(rng.integers(6)), [(f"sink{day:02d}", int(rng.integers(10**4, 10**7)))])

    OUT.write_text("\n".join(lines) + "\n")
    print(f"wrote {len(lines)} records to {OUT}")


if __name__ == "__main__":
    main()
