"""Hot kernels with a compiled backend and a numpy fallback.

The Cython extension ``_ckernels`` is used when it was built; otherwise, or
when ``REGRETLAB_PURE=1`` is set in the environment, the numpy versions in
``_pykernels`` are used. ``BACKEND`` names the active choice.
"""
import os

import numpy as np

from . import _pykernels

try:
    if os.environ.get("REGRETLAB_PURE", "") not in ("", "0"):
        raise ImportError("pure backend requested")
    from . import _ckernels as _impl
    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"

NAMES = (
    "prefix_sq_norms",
    "lemma4_terms",
    "lemma103_terms",
    "adam_moments",
    "lemma104_terms",
    "adagrad_update",
    "adam_update",
)


def _c2(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def _c1(a):
    return np.ascontiguousarray(a, dtype=np.float64).reshape(-1)


def backend(name):
    """Module implementing kernels for ``name`` in {"cython", "python"}."""
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels
        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")


def prefix_sq_norms(G):
    return _impl.prefix_sq_norms(_c2(G))


def lemma4_terms(G):
    return _impl.lemma4_terms(_c2(G))


def lemma103_terms(G):
    return _impl.lemma103_terms(_c2(G))


def adam_moments(G, beta1, beta2, lam=1.0):
    return _impl.adam_moments(_c2(G), float(beta1), float(beta2), float(lam))


def lemma104_terms(G, beta1, beta2):
    return _impl.lemma104_terms(_c2(G), float(beta1), float(beta2))


def adagrad_update(theta, accum, g, eta, eps):
    return _impl.adagrad_update(_c1(theta), _c1(accum), _c1(g), float(eta), float(eps))


def adam_update(theta, m, v, g, beta1_t, beta2, bc1, bc2, eta_t, eps):
    return _impl.adam_update(_c1(theta), _c1(m), _c1(v), _c1(g), float(beta1_t),
                             float(beta2), float(bc1), float(bc2), float(eta_t), float(eps))
