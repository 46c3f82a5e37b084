"""Correlation series container shared by the estimators and diagnostics."""
from dataclasses import dataclass, field

import numpy as np


@dataclass
class CorrelationSeries:
    """Sampled values c(t) = <e^{tU} f, f> with per-point error bars.

    ``estimator`` records how the values were produced (method, samples, seed,
    grid, ...); ``method`` is "quadrature" for deterministic grid estimates and
    "montecarlo" for sampled ones.
    """
    times: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    estimator: dict = field(default_factory=dict)
    system_desc: str = ""

    def __post_init__(self):
        self.times = np.asarray(self.times, float)
        self.values = np.asarray(self.values, complex)
        self.stderr = np.asarray(self.stderr, float)
        if not (self.times.shape == self.values.shape == self.stderr.shape):
            raise ValueError("times, values and stderr must have equal length")

    @property
    def method(self):
        return self.estimator.get("method", "quadrature")

    @property
    def c0(self):
        i = np.flatnonzero(self.times == 0.0)
        return float(self.values[i[0]].real) if i.size else float(abs(self.values[0]))

    def scaled(self, lam):
        """Series of lam * f: values times |lam|^2."""
        s = abs(lam) ** 2
        return CorrelationSeries(self.times.copy(), self.values * s, self.stderr * s,
                                 dict(self.estimator), self.system_desc)

    def __len__(self):
        return self.times.size
