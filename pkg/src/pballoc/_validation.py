"""Input validation helpers shared by the estimators and loaders."""

import math

import numpy as np

from .exceptions import InvalidInput, StructuralError


def as_float_array(values, name, ndim=None):
    try:
        arr = np.asarray(values, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InvalidInput(f"{name}: not numeric ({exc})") from None
    if ndim is not None and arr.ndim != ndim:
        raise StructuralError(f"{name}: expected {ndim}-d array, got shape {arr.shape}")
    return arr


def check_finite(arr, name):
    bad = ~np.isfinite(arr)
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise InvalidInput(f"{name}: non-finite entry at index {idx}")
    return arr


def check_nonnegative(arr, name, exc=InvalidInput):
    neg = arr < 0
    if neg.any():
        idx = tuple(int(i) for i in np.argwhere(neg)[0])
        raise exc(f"{name}: negative entry {arr[idx]!r} at index {idx}")
    return arr


def check_vector(values, name, length=None, nonnegative=False):
    arr = check_finite(as_float_array(values, name, ndim=1), name)
    if length is not None and arr.shape[0] != length:
        raise StructuralError(f"{name}: expected length {length}, got {arr.shape[0]}")
    if nonnegative:
        check_nonnegative(arr, name)
    return arr


def check_matrix(values, name, shape=None, nonnegative=False):
    arr = check_finite(as_float_array(values, name, ndim=2), name)
    if shape is not None and arr.shape != tuple(shape):
        raise StructuralError(f"{name}: expected shape {tuple(shape)}, got {arr.shape}")
    if nonnegative:
        check_nonnegative(arr, name)
    return arr


def check_labels(labels, name):
    labels = tuple(str(x) for x in labels)
    if not labels:
        raise StructuralError(f"{name}: empty label list")
    if len(set(labels)) != len(labels):
        dup = sorted({x for x in labels if labels.count(x) > 1})
        raise StructuralError(f"{name}: duplicate labels {dup}")
    return labels


def normalize(weights):
    """Divide by a compensated (fsum) total so the result sums to 1 tightly."""
    total = math.fsum(weights)
    return np.asarray(weights, dtype=float) / total, total
