"""Bundled example data and simulation design builders."""

from __future__ import annotations

import numpy as np

from .engine import ModelSpec
from .families import Family, Link

__all__ = ["clotting_data", "clotting_spec", "three_level_design"]

# Blood-clotting times (seconds) for nine plasma concentrations (percent)
# and two thromboplastin lots; classic gamma/log regression example.
CLOTTING_CONCENTRATION = np.array(
    [5.0, 10.0, 15.0, 20.0, 30.0, 40.0, 60.0, 80.0, 100.0])
CLOTTING_TIME_LOT1 = np.array(
    [118.0, 58.0, 42.0, 35.0, 27.0, 25.0, 21.0, 19.0, 18.0])
CLOTTING_TIME_LOT2 = np.array(
    [69.0, 35.0, 26.0, 21.0, 18.0, 16.0, 13.0, 12.0, 12.0])


def clotting_data():
    """(X, y): 18 x 4 design and clotting times.

    Columns: intercept, second-lot indicator, log concentration and the
    lot-by-log-concentration interaction.
    """
    conc = np.concatenate([CLOTTING_CONCENTRATION, CLOTTING_CONCENTRATION])
    lot2 = np.concatenate([np.zeros(9), np.ones(9)])
    y = np.concatenate([CLOTTING_TIME_LOT1, CLOTTING_TIME_LOT2])
    lc = np.log(conc)
    X = np.column_stack([np.ones(18), lot2, lc, lot2 * lc])
    return X, y


def clotting_spec() -> ModelSpec:
    """Gamma/log ModelSpec for the clotting data."""
    X, y = clotting_data()
    return ModelSpec(X=X, y=y, family=Family("gamma"), link=Link("log"))


# Fixed unit-exponential covariate values for the 12-row invariance design;
# frozen so the parameterization-mismatch pattern is reproducible.
THREE_LEVEL_T = np.array([
    2.08500041, 0.483206, 0.02377763, 2.38815245, 1.43283523, 1.14176963,
    2.57128441, 1.12120826, 0.03056646, 0.51839493, 1.04834763, 0.3679732])


def three_level_design(rng: np.random.Generator | None = None,
                       t: np.ndarray | None = None):
    """12-row design: three-level factor indicators plus a positive covariate.

    Returns (X, labels).  The factor enters as x1 (level-1 indicator, rows
    1-4), x2 (level 2, rows 5-8), x3 (level 3, rows 9-12) with no separate
    intercept; t is a fixed unit-exponential draw unless supplied (pass rng
    to redraw it).
    """
    n = 12
    levels = np.repeat(np.arange(3), n // 3)
    if t is None:
        t = rng.exponential(1.0, size=n) if rng is not None else THREE_LEVEL_T
    t = np.asarray(t, dtype=float)
    if t.shape != (n,):
        raise ValueError("t must have 12 entries")
    X = np.column_stack([(levels == 0).astype(float),
                         (levels == 1).astype(float),
                         (levels == 2).astype(float), t])
    return X, ["x1", "x2", "x3", "t"]
