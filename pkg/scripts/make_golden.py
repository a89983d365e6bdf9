"""Regenerate the committed golden outputs under tests/fixtures/golden/.

Only rerun this after an intentional change to the output format or the
algorithms; the golden-file tests exist to catch unintended ones.
"""
import sys
from pathlib import Path

from coevgan.cli import main

ROOT = Path(__file__).resolve().parents[1] / "tests" / "fixtures"

if __name__ == "__main__":
    cfg = str(ROOT / "golden.cfg")
    out = str(ROOT / "golden")
    for cmd in ("converge", "grid-run"):
        code = main([cmd, "--config", cfg, "--out", out])
        if code:
            sys.exit(code)
