import numpy as np
import pandas as pd

import melt.const.error as error_const


def smooth(power_mw: np.ndarray, n: int) -> np.ndarray:
    """Centered moving average over n samples; the edges average over whatever part of the window exists."""
    if n < 1:
        error_const.AnalysisError.INVALID_PARAMETER.build(name="n", value=n).raise_()
    if n == 1 or not len(power_mw):
        return np.asarray(power_mw, dtype=float).copy()
    return pd.Series(power_mw, dtype=float).rolling(n, center=True, min_periods=1).mean().to_numpy()
