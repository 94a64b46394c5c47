"""Main-effects sum-of-squares decomposition for up to three crossed factors."""
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError


@dataclass
class VarianceDecomposition:
    sum_squares: dict
    percent: dict
    total_ss: float

    def explained_share(self, factor):
        """Share of the main-effect (explained) SS attributed to ``factor``."""
        explained = sum(v for k, v in self.sum_squares.items() if k != "residual")
        return self.sum_squares[factor] / explained if explained > 0 else float("nan")


def variance_decomposition(observations, names=("A", "B", "C")):
    """``observations``: iterable of (value, level_a, level_b, level_c).

    Main effects are level-mean deviations from the grand mean; the residual
    absorbs interactions and noise. Percentages are of the total SS.
    """
    rows = list(observations)
    if not rows:
        raise InvalidInputError("no observations")
    y = np.array([r[0] for r in rows], dtype=np.float64)
    grand = y.mean()
    total = float(((y - grand) ** 2).sum())
    ss = {}
    for f, name in enumerate(names, start=1):
        levels = [r[f] for r in rows]
        uniq = sorted(set(levels), key=str)
        if len(uniq) < 2:
            raise InvalidInputError(f"factor {name!r} has a single level")
        lv = np.array([uniq.index(v) for v in levels])
        counts = np.bincount(lv)
        means = np.bincount(lv, weights=y) / counts
        ss[name] = float((counts * (means - grand) ** 2).sum())
    ss["residual"] = total - sum(ss.values())
    pct = {k: (100.0 * v / total if total > 0 else 0.0) for k, v in ss.items()}
    return VarianceDecomposition(sum_squares=ss, percent=pct, total_ss=total)
