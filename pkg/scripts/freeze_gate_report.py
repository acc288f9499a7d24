#!/usr/bin/env python3
"""Regenerate the committed end-to-end gate report fixture.

Builds the 61-node strict-mode fixture (60 cleared deps plus one unknown
transitive dep), runs the gate once, strips volatile fields (timestamps,
machine-local artifact paths), and writes the result to
tests/fixtures/gate_e2e_report.json. The acceptance suite then asserts the
composed pipeline still produces exactly this report.
"""

import json
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

from conftest import GateEnv  # noqa: E402

from complygate.gate import run_check  # noqa: E402
from complygate.inventory import Coordinates  # noqa: E402

E2E_LICENSES = ["MIT", "Apache-2.0", "BSD-3-Clause", "ISC", "BSD-2-Clause"]


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        env = GateEnv(Path(tmp))
        deps = [("npm", f"dep-{i:02d}") for i in range(60)]
        coords = [Coordinates(eco, name, "1.0.0") for eco, name in deps]
        env.populate_inventory(
            [
                (c, E2E_LICENSES[i % len(E2E_LICENSES)], True)
                for i, c in enumerate(coords)
            ]
        )
        env.chain_lockfile(deps + [("npm", "unknown-dep")])
        exit_code, report = run_check(env.config(strict=True))
        assert exit_code == 2, f"expected exit 2, got {exit_code}"
        doc = report.to_dict()
        for volatile in ("generated_at", "timing_secs", "artifacts"):
            doc.pop(volatile)
    out = ROOT / "tests" / "fixtures" / "gate_e2e_report.json"
    out.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out} (exit_code={doc['exit_code']}, nodes={len(doc['nodes'])})")


if __name__ == "__main__":
    main()
