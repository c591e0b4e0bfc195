"""Generate the demo corpus, run the pipeline and print the typology table.

    python scripts/run_demo.py --work /tmp/demo --threads 4
"""
import argparse
import sys
from pathlib import Path

import pandas as pd

from nasdisrupt import cli


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--work", type=Path, default=Path("demo_run"))
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--seed", type=int, default=None, help="override the corpus seed")
    args = ap.parse_args()

    data, out = args.work / "data", args.work / "results"
    synth = ["synth", "--out", str(data), "--write-config"]
    if args.seed is not None:
        synth += ["--seed", str(args.seed)]
    if (rc := cli.main(synth)) != 0:
        return rc
    rc = cli.main(["run", "--config", str(data / "run_config.json"), "--out", str(out),
                   "--threads", str(args.threads)])
    if rc != 0:
        return rc

    profiles = pd.read_csv(out / "profiles.csv")
    cols = ["cluster_id", "label", "n_days", "avg_anomaly", "avg_cx_rate", "avg_arrd_per_flight"]
    print(profiles.sort_values("avg_anomaly", ascending=False)[cols].to_string(index=False))

    labels = pd.read_csv(data / "labels.csv", dtype={"day": str})
    days = pd.read_csv(out / "day_records.csv", dtype={"day": str}).merge(labels, on="day")
    planted = days[days["label"] != "normal"]
    print()
    print(planted[["day", "label", "cluster_id", "scaled_score"]].to_string(index=False))
    return 0


if __name__ == "__main__":
    sys.exit(main())
