"""Risk laboratory for a pension guarantee fund.

Simulates sponsor insolvencies under correlated markets, prices the
guarantee as a put on scheme assets, applies levy schedules, runs the
twin-peaks regulatory stress tests and tracks the fund's own solvency.
"""

__version__ = "0.1.0"
