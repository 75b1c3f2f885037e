"""Solve the scalar double-well connection and verify the run artifacts.

The geodesic step minimizes the weighted length with K = sqrt(2W), the
reparametrization step balances kinetic and potential energy; for this
potential the result must be tanh(t - t0) with action 4/3.
"""

import json
import sys
from pathlib import Path

from hetconn.cli import main

ROOT = Path(__file__).resolve().parent.parent
CONFIG = ROOT / "configs" / "double_well.json"


def run(out="runs/double_well"):
    code = main(["connect", "--config", str(CONFIG), "--out", out])
    if code != 0:
        return code
    results = json.loads((Path(out) / "manifest.json").read_text())["results"]
    print(f"action       {results['action']:.8f}   (4/3 = {4/3:.8f})")
    print(f"k-length     {results['k_length_value']:.8f}")
    print(f"defect       {results['equipartition_defect']:.3e}")
    print(f"el residual  {results['el_residual']:.3e}")
    print(f"artifacts    {out}")
    return main(["verify", out])


if __name__ == "__main__":
    sys.exit(run(*sys.argv[1:]))
