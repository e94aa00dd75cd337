"""Small bundled CSV pair drawn from the simulation design (N=2000, seed 2024).

``toy_nonprob.csv`` has covariates x1..x4 and outcome ``y``;
``toy_prob.csv`` has x1..x4 and design weight ``d``. The population mean is
recorded in ``TOY_MU_Y``.
"""

from importlib.resources import files
from pathlib import Path


def toy_paths() -> tuple[Path, Path]:
    root = files(__name__)
    return Path(str(root / "toy_nonprob.csv")), Path(str(root / "toy_prob.csv"))
TOY_MU_Y = 9.456045149944122
