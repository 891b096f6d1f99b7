"""Input checks shared by the estimators and the CLI."""

from __future__ import annotations

import numbers

import numpy as np

from .workload import TraceMessage, TrafficTrace

TRACE_COLUMNS = ("time", "source", "port", "kind", "payload", "n_bits")


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_optional_int(value, name: str, minimum: int = 0) -> int | None:
    return None if value is None else check_positive_int(value, name, minimum)


def check_trace(X) -> TrafficTrace:
    """Accept a trace, a sequence of messages, or a 2-D integer array whose
    columns are ``time, source, port, kind, payload, n_bits``."""
    if isinstance(X, TrafficTrace):
        return X
    if isinstance(X, (list, tuple)) and all(isinstance(m, TraceMessage) for m in X):
        return TrafficTrace(X)
    try:
        a = np.asarray(X, dtype=object)
    except Exception as exc:  # pragma: no cover - numpy raises assorted types
        raise ValueError(f"cannot read traffic from {type(X).__name__}: {exc}") from None
    if a.size == 0:
        return TrafficTrace()
    if a.ndim != 2 or a.shape[1] not in (len(TRACE_COLUMNS), len(TRACE_COLUMNS) + 1):
        raise ValueError(f"traffic array must be 2-D with columns {TRACE_COLUMNS} "
                         f"(+ optional int_length), got shape {a.shape}")
    out = TrafficTrace()
    for row in a:
        vals = []
        for v in row:
            if isinstance(v, bool) or not isinstance(v, numbers.Integral):
                raise ValueError(f"traffic array entries must be integers, got {v!r}")
            vals.append(int(v))
        out.append(TraceMessage(*vals))
    return sorted_trace(out)


def sorted_trace(trace: TrafficTrace) -> TrafficTrace:
    # stable: same-cycle messages of one source keep their order
    return TrafficTrace(sorted(trace, key=lambda m: m.time))
