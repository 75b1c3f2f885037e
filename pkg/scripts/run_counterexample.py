"""Show a weight whose minimal connection length is never attained.

The weight vanishes on two horizontal lines and decays along them; candidate
curves pushed further out get strictly shorter toward the infimum 2 g_inf,
while every curve confined to a box stays above the crossing bound.  Writes
both series (candidates.tsv, boxed.tsv) as plot data.
"""

import json
import sys
from pathlib import Path

from hetconn.cli import main

ROOT = Path(__file__).resolve().parent.parent
CONFIG = ROOT / "configs" / "counterexample.json"


def run(out="runs/counterexample"):
    code = main(["counterexample", "--config", str(CONFIG), "--out", out])
    if code != 0:
        return code
    results = json.loads((Path(out) / "manifest.json").read_text())["results"]
    print(f"infimum          {results['infimum']:.6f}")
    print(f"final candidate  {results['final_candidate']:.6f}")
    print(f"boxed above bound  {results['boxed_above_bound']}")
    print(results["conclusion"])
    print(f"artifacts        {out}")
    return main(["verify", out])


if __name__ == "__main__":
    sys.exit(run(*sys.argv[1:]))
