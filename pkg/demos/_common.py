"""Shared plotting helpers for the demo scripts (headless-safe)."""

import os
from pathlib import Path

OUT_DIR = Path(__file__).parent / "output"

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:  # plots are optional; numbers always print
    plt = None


def save_figure(fig, name):
    if plt is None:
        return None
    OUT_DIR.mkdir(exist_ok=True)
    path = OUT_DIR / name
    fig.savefig(path, dpi=160, bbox_inches="tight")
    print(f"  figure -> {os.path.relpath(path)}")
    return path
