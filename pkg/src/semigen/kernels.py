"""Backend selection for the likelihood kernels.

The compiled ``_ckernels`` extension is used when it was built; otherwise
the numpy implementation in ``_pykernels`` is loaded. Setting the
environment variable ``SEMIGEN_BACKEND=python`` forces the fallback.
"""

import os

from semigen import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("SEMIGEN_BACKEND", "").lower() != "python":
    try:
        from semigen import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels

gc_sup = _impl.gc_sup
gc_unsup = _impl.gc_unsup
lg_sup = _impl.lg_sup
lg_unsup = _impl.lg_unsup
disc_sup = _impl.disc_sup
disc_unsup = _impl.disc_unsup


def available_backends():
    """Return ``{name: module}`` for every importable kernel backend."""
    out = {"python": _pykernels}
    try:
        from semigen import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
