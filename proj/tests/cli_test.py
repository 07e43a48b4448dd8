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
"""Exit codes and artifacts of the zsdgen command line."""

import json
import os
import sys
import tempfile

from tiny import TINY, run


def main(binary):
    with tempfile.TemporaryDirectory() as tmp:
        out = os.path.join(tmp, "run")

        p = run(binary, "run-full", "--dry-run", "--out", out, overrides=TINY, check=0)
        assert json.loads(p.stdout)["output"] == out
        assert not os.path.exists(out), "dry run wrote a run directory"

        run(binary, "run-full", "--out", out, "--set", "train.epochs=zero", check=2)
        run(binary, "run-full", "--out", out, "--set", "train.no_such_key=1", check=2)
        run(binary, "run-full", "--out", out, overrides=TINY + ["domain.bg_threshold=0.9"], check=2)
        run(binary, "run-full", "--bogus-flag", check=2)
        run(binary, check=2)
        run(binary, "run-full", overrides=TINY, check=2)  # no run directory
        run(binary, "--version", check=0)

        bad = os.path.join(tmp, "bad.json")
        with open(bad, "w") as f:
            json.dump({"mode": "gzsd"}, f)
        run(binary, "ablate", "--config", bad, "--out", out, check=2)

        run(binary, "report", os.path.join(tmp, "nowhere"), "--out", os.path.join(tmp, "r"), check=1)
        # --model is checked while parsing, so a missing file is a usage error.
        run(binary, "eval", "--model", os.path.join(tmp, "missing.bin"), "--out", out, check=2)
        with open(bad, "wb") as f:
            f.write(b"not a checkpoint")
        p = run(binary, "eval", "--model", bad, "--out", out, check=1)
        assert bad in p.stderr

        p = run(binary, "run-full", "-q", "--out", out, overrides=TINY, check=0)
        assert "recall@100" in p.stdout
        for name in ("config.json", "manifest.json", "metrics.json", "losses.csv"):
            assert os.path.exists(os.path.join(out, name)), name
        with open(os.path.join(out, "manifest.json")) as f:
            manifest = json.load(f)
        assert manifest["status"] == "completed"

        model = os.path.join(out, "seed-1", "model.bin")
        ev = os.path.join(tmp, "eval")
        run(binary, "eval", "-q", "--model", model, "--out", ev, check=0)
        for name in ("metrics.csv", "per_class.csv", "metrics.json"):
            assert os.path.exists(os.path.join(ev, name)), name

        rep = os.path.join(tmp, "report")
        p = run(binary, "report", out, "--out", rep, check=0)
        assert "# Results" in p.stdout

        with open(os.path.join(out, "manifest.json"), "w") as f:
            json.dump(dict(manifest, schema_version=99), f)
        p = run(binary, "report", out, "--out", rep, check=1)
        assert "99" in p.stderr
    print("cli ok")


if __name__ == "__main__":
    main(sys.argv[1])
