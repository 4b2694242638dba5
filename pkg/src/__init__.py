"""
graph-kalman Python package.

Kalman filtering of signals diffusing over graphs, with EM/gradient fitting and the GKNet learner.
"""

__all__: list[str] = []
