"""Log-domain arithmetic used by the estimators.

Zero is represented by ``-inf`` throughout (a failed trial has N = 0).
"""

import math

import numpy as np

NEG_INF = float("-inf")

_TABLE_LIMIT = 1 << 20
_log_fact_table = np.zeros(1, dtype=np.float64)


def log_sum_exp(values):
    """Return ``log(sum(exp(v)))``; an empty input gives ``-inf``.

    Terms are sorted before the shifted sum, so the result does not depend on
    input order.
    """
    vals = np.sort(np.fromiter(values, dtype=np.float64) if not isinstance(values, np.ndarray)
                   else values.astype(np.float64, copy=False))
    if vals.size == 0:
        return NEG_INF
    top = vals[-1]
    if top == NEG_INF:
        return NEG_INF
    if top == math.inf:
        return math.inf
    return float(top + math.log(np.sum(np.exp(vals - top))))


def _grow_table(n):
    global _log_fact_table
    size = len(_log_fact_table)
    if n < size:
        return
    new_size = min(_TABLE_LIMIT, max(n + 1, 2 * size, 1024))
    logs = np.log(np.arange(size, new_size, dtype=np.float64))
    tail = _log_fact_table[-1] + np.cumsum(logs)
    _log_fact_table = np.concatenate([_log_fact_table, tail])


def log_factorial(n):
    """Natural log of ``n!``."""
    n = int(n)
    if n < 0:
        raise ValueError(f"log_factorial needs n >= 0, got {n}")
    if n < _TABLE_LIMIT:
        _grow_table(n)
        return float(_log_fact_table[n])
    return math.lgamma(n + 1.0)


def log_mean_and_relvar(values):
    """Return ``(log mean, Var/mean**2)`` of the positive numbers ``exp(values)``.

    Variance is the population variance, computed in two passes on values
    scaled by the largest one. The relative variance is ``nan`` when every
    value is zero.
    """
    vals = np.asarray(values, dtype=np.float64)
    if vals.size == 0:
        raise ValueError("log_mean_and_relvar needs at least one value")
    log_mean = log_sum_exp(vals) - math.log(vals.size)
    if log_mean == NEG_INF:
        return NEG_INF, math.nan
    y = np.exp(vals - vals.max())
    y_bar = np.sum(np.sort(y)) / y.size
    spread = np.sum(np.sort((y - y_bar) ** 2)) / y.size
    return log_mean, float(spread / (y_bar * y_bar))
