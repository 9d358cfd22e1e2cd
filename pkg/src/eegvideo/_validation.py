"""Input validation helpers shared by the estimators."""
import numpy as np


def check_trials(X, n_channels=None, dtype=np.float64) -> np.ndarray:
    """Validate a finite ``(n_trials, n_channels, n_samples)`` array."""
    X = np.asarray(X, dtype=dtype)
    if X.ndim != 3:
        raise ValueError("expected (n_trials, n_channels, n_samples), got shape %s" % (X.shape,))
    if X.shape[0] == 0:
        raise ValueError("no trials")
    if n_channels is not None and X.shape[1] != n_channels:
        raise ValueError("channel mismatch: expected %d channels, got %d" % (n_channels, X.shape[1]))
    if not np.all(np.isfinite(X)):
        raise ValueError("input contains non-finite values")
    return X


def check_labels(y, n=None) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError("labels must be 1-D")
    if n is not None and len(y) != n:
        raise ValueError("got %d labels for %d samples" % (len(y), n))
    if y.size and not np.issubdtype(y.dtype, np.integer):
        if not np.all(np.equal(np.mod(y, 1), 0)):
            raise ValueError("labels must be integer class indices")
        y = y.astype(np.int64)
    return y
