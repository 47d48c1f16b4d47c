"""Recompute the seeded regression fixtures in tests/data/fixtures.json.

Run once after a verified build; later test runs compare against these
numbers at three standard errors.
"""

import io
import json
from contextlib import redirect_stdout
from pathlib import Path

from rfic import cli
from rfic.chain import run_replicas
from rfic.disorder import DisorderLaw
from rfic.experiments import sandwich_test_gaussian

OUT = Path(__file__).resolve().parents[1] / "tests" / "data" / "fixtures.json"


def main():
    g = DisorderLaw.gaussian(1.0)
    fx = {}
    tab = run_replicas(g, [2.0, 4.0, 6.0, 8.0], 10**7, 32, seed=7)
    est = tab.free_energy_estimates()
    fx["sweep_gaussian"] = {"J": [e.J for e in est], "chain_length": 10**7, "replicas": 32, "seed": 7,
                            "value": [e.value for e in est], "stderr": [e.stderr for e in est]}
    e4 = est[1]
    fx["fe_gaussian_J4"] = {"chain_length": 10**7, "replicas": 32, "seed": 7,
                            "value": e4.value, "stderr": e4.stderr}
    tab = run_replicas(g, [2.0, 4.0, 6.0], 10**6, 32, seed=11, order=1)
    d = tab.flip_density_estimates()
    fx["flip_gaussian"] = {"J": [2.0, 4.0, 6.0], "chain_length": 10**6, "replicas": 32, "seed": 11,
                           "value": [e.value for e in d], "stderr": [e.stderr for e in d]}
    sw = sandwich_test_gaussian([4.0, 6.0], 10**6, 32, seed=3)
    fx["sandwich"] = {"J": [4.0, 6.0], "chain_length": 10**6, "replicas": 32, "seed": 3,
                      "rows": [r.__dict__ for r in sw]}
    buf = io.StringIO()
    with redirect_stdout(buf):
        cli.main(["fe", "--law", "gaussian", "--variance", "1", "--J", "4", "--N", "1e7",
                  "--replicas", "32", "--seed", "7"])
    fx["cli_fe_csv"] = buf.getvalue()
    OUT.write_text(json.dumps(fx, indent=1) + "\n")


if __name__ == "__main__":
    main()
