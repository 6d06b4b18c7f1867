"""Regenerate the regression fixtures under ``tests/fixtures``.

Run once from a build whose identity and oracle tests pass, then commit the
JSON files; the tests compare against them from then on.
"""
import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

import scenarios  # noqa: E402

OUT = ROOT / "tests" / "fixtures"


def dump(name, data):
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / name).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {OUT / name}")


def main():
    dump("lattice_trends.json", {"N": [4, 8, 16], "force_scale": scenarios.force_scale_sweep()})
    dump("diagnostic_trends.json", {
        "assumption": {"N": [8, 16, 32], **scenarios.assumption_sweep()},
        "lt_ratio": {"N": [3, 5, 7], "ratio": scenarios.lt_sweep()},
        "sc_condition": {"N": [2, 3, 4], **scenarios.sc_ratios(scenarios.semiclassical_sweep())},
    })
    dump("dilute_sweep.json", scenarios.dilute_summary(scenarios.dilute_sweep()))
    ref = scenarios.reference_run()
    dump("reference_run.json", {"N": 2, "times": ref.times, "alpha_n": ref.alpha["n"],
                                "tr_norm": ref.tr_norm})


if __name__ == "__main__":
    main()
