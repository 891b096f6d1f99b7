"""scikit-learn style front ends.

:class:`NocSimulator` treats a traffic trace as ``X``: ``fit`` runs the
network on it and ``predict`` returns per-message latencies.  Because its
parameters are plain constructor arguments, ``clone(est).set_params(...)``
is how sweeps vary the configuration.  :class:`InverseDesigner` is fitted on
a sweep table and predicts the cheapest configuration meeting a constraint.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_optional_int, check_positive_int, check_trace
from .dse import Constraint, inverse_query
from .engine import Simulation
from .topology import NetworkSpec
from .workload import PAYLOAD_BITS

LATENCY_COLUMNS = ("latency", "queueing", "serialization", "transit")


class NocSimulator(BaseEstimator):
    def __init__(self, version="v2", width=None, vc_depth=32, na_depth=32, n_inputs=4,
                 n_outputs=4, switching=None, sink_period=1, horizon=None, drain=True,
                 warmup=0, log_events=False, verify=True):
        self.version = version
        self.width = width
        self.vc_depth = vc_depth
        self.na_depth = na_depth
        self.n_inputs = n_inputs
        self.n_outputs = n_outputs
        self.switching = switching
        self.sink_period = sink_period
        self.horizon = horizon
        self.drain = drain
        self.warmup = warmup
        self.log_events = log_events
        self.verify = verify

    def network_spec(self) -> NetworkSpec:
        return NetworkSpec(self.version, self.n_inputs, self.n_outputs, self.width,
                           self.vc_depth, self.na_depth, self.switching, self.sink_period)

    def _simulate(self, X) -> Simulation:
        trace = check_trace(X)
        horizon = check_optional_int(self.horizon, "horizon")
        warmup = check_positive_int(self.warmup, "warmup", 0)
        sim = Simulation(self.network_spec(), payload_bits={**PAYLOAD_BITS, **trace.kinds},
                         log_events=self.log_events, verify=self.verify, warmup=warmup)
        sim.load(trace)
        sim.metrics = sim.run(horizon, drain=self.drain)
        return sim

    def fit(self, X, y=None):
        """Simulate the traffic ``X``; sets ``metrics_`` and ``simulation_``."""
        sim = self._simulate(X)
        self.simulation_ = sim
        self.metrics_ = sim.metrics
        self.n_messages_ = sim.metrics.injected
        return self

    def latencies(self) -> np.ndarray:
        """Per-message ``LATENCY_COLUMNS`` of the fitted run; NaN rows for
        messages still in flight at the horizon."""
        check_is_fitted(self, "simulation_")
        out = np.full((len(self.simulation_.messages), len(LATENCY_COLUMNS)), np.nan)
        for i, m in enumerate(self.simulation_.messages):
            if m.delivered is not None:
                out[i] = (m.latency, m.latency - m.serialization - m.transit,
                          m.serialization, m.transit)
        return out

    def predict(self, X) -> np.ndarray:
        """End-to-end latency of each message of ``X`` (NaN if undelivered)."""
        check_is_fitted(self, "metrics_")
        sim = self._simulate(X)
        return np.array([np.nan if m.delivered is None else m.latency for m in sim.messages])

    def score(self, X, y=None) -> float:
        """Payload throughput in bits per base cycle (higher is better)."""
        return self.fit(X).metrics_.throughput_bits_per_cycle


class InverseDesigner(BaseEstimator):
    """Fitted on sweep rows; ``predict`` maps constraints to configurations."""

    def __init__(self, frequency_mhz=None):
        self.frequency_mhz = frequency_mhz

    def fit(self, X, y=None):
        rows = list(X)
        if not rows:
            raise ValueError("empty sweep table")
        self.table_ = rows
        return self

    def _constraint(self, c) -> Constraint:
        if isinstance(c, dict):
            c = Constraint(**c)
        if c.frequency_mhz is None and self.frequency_mhz is not None:
            c = Constraint(**{**c.__dict__, "frequency_mhz": self.frequency_mhz})
        return c

    def query(self, c) -> list[dict]:
        """All admissible rows, cheapest first."""
        check_is_fitted(self, "table_")
        return inverse_query(self.table_, self._constraint(c))

    def predict(self, X) -> list[dict | None]:
        """Cheapest admissible row per constraint, None when none qualifies."""
        out = []
        for c in X:
            ranked = self.query(c)
            out.append(ranked[0] if ranked else None)
        return out
