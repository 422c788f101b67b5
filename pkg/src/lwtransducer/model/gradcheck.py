"""Central-difference gradient checking."""
import numpy as np


def relative_error(analytic, numeric):
    return np.abs(analytic - numeric) / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)


def grad_check(fn, store, eps=1e-5, names=None, max_entries=None, seed=0):
    """Max relative error between analytic and central-difference gradients.

    ``fn()`` must return ``(loss, grads)`` for the current values in ``store``,
    with ``grads`` a dict keyed like ``store.params``. ``max_entries`` caps
    the entries probed per parameter (picked at random), for large tensors.
    Returns ``(max_error, (name, index))`` of the worst entry.
    """
    _, analytic = fn()
    analytic = {k: np.array(v, copy=True) for k, v in analytic.items()}
    rng = np.random.default_rng(seed)
    worst, where = 0.0, None
    for name in names or list(store.params):
        p = store.params[name]
        flat = p.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            idx = rng.choice(flat.size, size=max_entries, replace=False)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + eps
            up = fn()[0]
            flat[i] = orig - eps
            down = fn()[0]
            flat[i] = orig
            num = (up - down) / (2 * eps)
            err = float(relative_error(analytic[name].reshape(-1)[i], num))
            if err > worst:
                worst, where = err, (name, int(i))
    return worst, where
