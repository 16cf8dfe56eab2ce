"""Writes the synthetic pair and the expected trade log.

The trade log comes from a standalone reimplementation of the backtest
rules below, kept independent of the Rust code.

    python3 make_fixture.py
"""
import csv
import datetime as dt
import random

N = 420
WINDOW = 20
RULE = dict(x0=-0.142, x1=-0.077, x2=0.077, m=-0.2)
CAPITAL = 100_000.0
COMMISSION = 5.0


def business_days(start, n):
    out, d = [], start
    while len(out) < n:
        if d.weekday() < 5:
            out.append(d)
        d += dt.timedelta(days=1)
    return out


def make_prices():
    rng = random.Random(20240611)
    f, u = 0.0, 0.0
    p1, p2 = [], []
    for _ in range(N):
        f += rng.gauss(0.0, 0.01)
        u = 0.93 * u + rng.gauss(0.0, 0.045)
        base = 2.718281828459045 ** f
        p1.append(round(80.0 * base * (1.0 + u), 4))
        p2.append(round(40.0 * base, 4))
    return p1, p2


def spread(p1, p2):
    z = []
    for i in range(WINDOW - 1, len(p1)):
        s1 = 0.0
        s2 = 0.0
        for j in range(i + 1 - WINDOW, i + 1):
            s1 += p1[j]
            s2 += p2[j]
        z.append(p1[i] / (s1 / WINDOW) - p2[i] / (s2 / WINDOW))
    return z


def backtest(dates, z, lp, sp):
    equity = CAPITAL
    trades, open_ = [], None
    last = len(z) - 1
    for i in range(len(z)):
        reason = None
        if open_ is not None:
            if z[i] <= RULE["m"]:
                reason = "stop-loss"
            elif z[i] >= RULE["x2"]:
                reason = "target"
            elif i == last:
                reason = "end-of-data"
        if reason:
            d0, z0, l0, s0, la, sa = open_
            pnl = la * (lp[i] / l0 - 1.0) + sa * (s0 - sp[i]) / s0
            profit = pnl - 2.0 * COMMISSION
            equity += profit
            trades.append([d0, dates[i], z0, z[i], reason, l0, lp[i], s0, sp[i], la, sa, 2.0 * COMMISSION, profit])
            open_ = None
        elif open_ is None and RULE["x0"] <= z[i] <= RULE["x1"] and i != last:
            open_ = (dates[i], z[i], lp[i], sp[i], 0.5 * equity, 0.5 * equity)
    return trades, equity


def main():
    dates = business_days(dt.date(2019, 1, 2), N)
    p1, p2 = make_prices()
    for name, p in (("leg1.csv", p1), ("leg2.csv", p2)):
        with open(name, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["date", "close"])
            for d, x in zip(dates, p):
                w.writerow([d.isoformat(), repr(x)])
    z = spread(p1, p2)
    zd = dates[WINDOW - 1:]
    lp = p1[WINDOW - 1:]
    sp = p2[WINDOW - 1:]
    trades, equity = backtest(zd, z, lp, sp)
    with open("expected_trades.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["entry_date", "exit_date", "entry_z", "exit_z", "exit_reason",
                    "long_entry_price", "long_exit_price", "short_entry_price", "short_exit_price",
                    "long_amount", "short_amount", "commission", "profit"])
        for t in trades:
            w.writerow([t[0].isoformat(), t[1].isoformat()] + [repr(x) if isinstance(x, float) else x for x in t[2:]])
    print(len(trades), "trades", [t[4] for t in trades], "end", repr(equity), "zmin", min(z), "zmax", max(z))


if __name__ == "__main__":
    main()
