"""Monolithic vs. structured neural models under interventional distribution shifts.

A stack of N masked MLPs (one conditional model per variable) is trained with
six objectives on data from a ground-truth discrete SCM, then evaluated
zero-shot and under few-shot adaptation on unseen interventions.
"""

__version__ = "0.1.0"

from . import adaptation, graph, metrics, nn, scm, training  # noqa: E402,F401
