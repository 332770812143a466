"""Regenerate the datasets bundled under src/splitbound/data."""
from pathlib import Path

from splitbound.synthetic import FIXTURE_NAMES, fixture_filename, fixture_text

out = Path(__file__).resolve().parents[1] / "src" / "splitbound" / "data"
for name in FIXTURE_NAMES:
    (out / fixture_filename(name)).write_text(fixture_text(name))
    print("wrote", fixture_filename(name))
