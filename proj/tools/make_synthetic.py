#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Writes the synthetic scenario bundles under data/synthetic.

Output is deterministic: rerunning reproduces the committed files byte for
byte. Prices are hourly in $/MWh, PV is a one-minute trace of a 5 kWp array.
"""

import argparse
import json
import math
import random
from pathlib import Path

# Hourly day-ahead shape, $/MWh: cheap night, morning shoulder, late peak.
BASE_PRICES = [21, 19, 18, 18, 19, 22, 27, 31, 33, 32, 30, 29,
               31, 36, 45, 58, 64, 55, 46, 40, 34, 29, 25, 22]

FLEET = [
    # id, arrival, departure, demand, arrival SOC, max SOC, charger
    ("1", "09:00", "17:00", 40, 20, 85, "1"),
    ("2", "08:30", "16:30", 30, 20, 60, "1"),
    ("3", "09:30", "17:30", 10, 5, 24, "2"),
    ("4", "09:00", "17:00", 40, 20, 85, "3"),
    ("5", "08:30", "16:30", 30, 20, 60, "4"),
    ("6", "09:30", "17:30", 10, 5, 24, "4"),
]

PV_KWP = 5.0


def fmt(x):
    text = f"{x:.6f}".rstrip("0").rstrip(".")
    return "0" if text in ("", "-0") else text


def write(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def market_csv(days):
    rows = ["timestamp,spp_buy,regup,regdn"]
    for d, prices in enumerate(days):
        for h, p in enumerate(prices):
            rows.append(f"2014-03-{1 + d:02d}T{h:02d}:00,{fmt(p)},{fmt(0.32 * max(p, 0))},{fmt(0.25 * max(p, 0))}")
    return "\n".join(rows) + "\n"


def pv_csv(days, seed):
    rng = random.Random(seed)
    rows = ["timestamp,power_kw"]
    for d, cloudy in enumerate(days):
        cloud = 1.0
        for m in range(1440):
            h = m / 60.0
            clear = 0.8 * math.sin(math.pi * (h - 6.0) / 14.0) ** 2 if 6.0 < h < 20.0 else 0.0
            if cloudy:
                # Slow random walk of the cloud factor, clipped to [0.3, 1].
                cloud = min(1.0, max(0.3, cloud + rng.gauss(0.0, 0.03)))
            rows.append(f"2014-03-{1 + d:02d}T{m // 60:02d}:{m % 60:02d},{fmt(PV_KWP * clear * cloud)}")
    return "\n".join(rows) + "\n"


def fleet_csv():
    rows = ["id,arrival,departure,demand_kwh,arrival_soc_kwh,soc_min_kwh,soc_max_kwh,charge_max_kw,"
            "discharge_min_kw,eff_charge,eff_discharge,penalty_rate,charger_id"]
    for ev, arr, dep, d, ba, bmax, c in FLEET:
        rows.append(f"{ev},{arr},{dep},{d},{ba},5,{bmax},50,-10,0.95,0.95,1,{c}")
    return "\n".join(rows) + "\n"


def chargers_csv(converters, inverter_kw):
    rows = ["id,pv_rated_kw,inverter_rated_kw,ev_port_rated_kw,dc_converter_count,connection_count,eff_conv,pv_scale"]
    for cid, pv in (("1", 10), ("2", 10), ("3", 0), ("4", 10)):
        rows.append(f"{cid},{pv},{inverter_kw},10,{converters},2,0.96,1")
    return "\n".join(rows) + "\n"


def limits_csv(import_kw, export_kw):
    return f"start,import_cap_kw,export_cap_kw\n00:00,{import_kw},{export_kw}\n"


def scenario(extra=None):
    s = {
        "step_minutes": 15,
        "price_unit": "usd_per_mwh",
        "sell_factor": 0.98,
        "pv_rated_kwp": PV_KWP,
        "pv_uncertainty": 0.1,
        "wear_rate": 0.042,
        "pv_cost": 0.0,
        "taper_charge": 0.9,
        "taper_discharge": 0.1,
        "market": "market.csv",
        "pv": "pv.csv",
        "fleet": "fleet.csv",
        "chargers": "chargers.csv",
        "limits": "limits.csv",
    }
    s.update(extra or {})
    return json.dumps(s, indent=2) + "\n"


def overlay_csv():
    rows = ["step,entity,field,value"]
    for t in range(44, 61):
        rows.append(f"{t},site,pv_multiplier,0.9")
    rows.append("*,5,arrival_step,36")
    rows.append("*,3,arrival_soc_kwh,6")
    return "\n".join(rows) + "\n"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data" / "synthetic"))
    args = ap.parse_args()
    root = Path(args.out)

    # Second day: a hot afternoon with a price spike and a negative night hour.
    hot = [p * 1.1 for p in BASE_PRICES]
    hot[3] = -4.5
    hot[15], hot[16], hot[17] = 96.0, 131.0, 88.0

    day = root / "desk_day"
    write(day / "scenario.json", scenario())
    write(day / "market.csv", market_csv([BASE_PRICES]))
    write(day / "pv.csv", pv_csv([False], seed=1))
    write(day / "fleet.csv", fleet_csv())
    write(day / "chargers.csv", chargers_csv(1, 10))
    write(day / "limits.csv", limits_csv(40, 40))
    write(day / "disturbed_overlay.csv", overlay_csv())

    # Two converters per charger and a roomier grid connection: both
    # baselines fit inside the optimizer's constraint set here.
    dom = root / "dominance_day"
    write(dom / "scenario.json", scenario({"v2g": False, "reserves": False}))
    write(dom / "market.csv", market_csv([BASE_PRICES]))
    write(dom / "pv.csv", pv_csv([False], seed=1))
    write(dom / "fleet.csv", fleet_csv())
    write(dom / "chargers.csv", chargers_csv(2, 20))
    write(dom / "limits.csv", limits_csv(80, 40))

    sweep = root / "two_days"
    write(sweep / "scenario.json", scenario())
    write(sweep / "market.csv", market_csv([BASE_PRICES, hot]))
    write(sweep / "pv.csv", pv_csv([False, True], seed=7))
    write(sweep / "fleet.csv", fleet_csv())
    write(sweep / "chargers.csv", chargers_csv(1, 10))
    write(sweep / "limits.csv", limits_csv(40, 40))


if __name__ == "__main__":
    main()
