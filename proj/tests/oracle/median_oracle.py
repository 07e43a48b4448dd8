# Copyright 2026 The zsdgen Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Recomputes report medians from raw run manifests and compares them with
the medians.csv that `zsdgen report` writes."""

import csv
import json
import os
import statistics
import sys
import tempfile

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))
from tiny import TINY, run  # noqa: E402


def expected_medians(manifests):
    groups = {}
    for path in manifests:
        with open(path) as f:
            doc = json.load(f)
        for result in doc["results"]:
            for row in result["rows"]:
                key = (row["table"], row["variant"], row["metric"], float(row["threshold"]))
                groups.setdefault(key, []).append(float(row["value"]))
    return {k: (len(v), statistics.median(v)) for k, v in groups.items()}


def main(binary):
    with tempfile.TemporaryDirectory() as tmp:
        runs = []
        # Three seeds in one run and two in another: odd and even group sizes.
        for name, seeds in (("a", "[1,2,3]"), ("b", "[4,5]")):
            out = os.path.join(tmp, name)
            run(binary, "run-full", "-q", "--out", out, overrides=TINY + [f"seeds={seeds}"], check=0)
            runs.append(out)
        rep = os.path.join(tmp, "report")
        run(binary, "report", *runs, "--out", rep, check=0)
        want = expected_medians([os.path.join(r, "manifest.json") for r in runs])
        with open(os.path.join(rep, "medians.csv")) as f:
            got = {(r["table"], r["variant"], r["metric"], float(r["threshold"])): (int(r["n"]), float(r["median"]))
                   for r in csv.DictReader(f)}
        assert got.keys() == want.keys(), sorted(set(got) ^ set(want))
        worst = 0.0
        for key, (n, med) in want.items():
            assert got[key][0] == n, (key, got[key][0], n)
            worst = max(worst, abs(got[key][1] - med))
        assert worst <= 1e-12, worst
        assert any(n == 5 for n, _ in want.values())
    print(f"medians ok: {len(want)} groups, max deviation {worst:.3g}")


if __name__ == "__main__":
    main(sys.argv[1])
