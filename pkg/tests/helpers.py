"""Shared numeric helpers for the test suite."""

import numpy as np

from geomquant.expr import evaluate


def max_abs(e, space, pts, params=None):
    vals = np.atleast_1d(np.asarray(evaluate(e, space, pts, params)))
    return float(np.max(np.abs(vals)))


def field_residual(X, Y, space, pts):
    """Max componentwise deviation between two vector fields at sample points."""
    xv = X.values(space, pts)
    yv = Y.values(space, pts)
    return float(np.max(np.abs(xv - yv)))
