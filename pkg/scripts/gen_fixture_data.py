#!/usr/bin/env python3
"""Regenerate the checked-in data fixtures under src/recapaug/data/.

Writes the 11 RGB profiles (binary .icc + bank.json), the subpixel
layout bank, the press presets, and the dot-cluster table. Run after
changing any of the in-code definitions; the test suite asserts the
checked-in files match the code.
"""

from pathlib import Path

from recapaug.icc import write_profile_bank
from recapaug.press import write_preset_bank
from recapaug.printsim import write_cluster_table
from recapaug.replay import write_layout_bank

DATA_DIR = Path(__file__).resolve().parent.parent / "src" / "recapaug" / "data"


def main() -> None:
    DATA_DIR.mkdir(parents=True, exist_ok=True)
    paths = write_profile_bank(DATA_DIR / "profiles")
    print(f"wrote {len(paths)} profiles -> {DATA_DIR / 'profiles'}")
    write_preset_bank(DATA_DIR / "presets.json")
    print("wrote presets.json")
    write_layout_bank(DATA_DIR / "layouts.json")
    print("wrote layouts.json")
    write_cluster_table(DATA_DIR / "dot_clusters.json")
    print("wrote dot_clusters.json")


if __name__ == "__main__":
    main()
