"""Import-time kernel backend selection.

Prefers the compiled extension, falls back to pure numpy. Override with
OPTMANET_BACKEND=python|cython (anything else raises; "auto"/unset keeps the
default preference). The chosen module is exposed as K.
"""

import os

from . import _kernels_py
from .errors import ConfigError


def _select():
    choice = os.environ.get("OPTMANET_BACKEND", "auto").strip().lower()
    if choice == "python":
        return _kernels_py
    try:
        from . import _kernels_cy
    except ImportError:
        _kernels_cy = None
    if choice == "cython":
        if _kernels_cy is None:
            raise ConfigError(
                "OPTMANET_BACKEND=cython but the compiled extension is not available"
            )
        return _kernels_cy
    if choice != "auto":
        raise ConfigError(f"unknown OPTMANET_BACKEND value: {choice!r}")
    return _kernels_cy if _kernels_cy is not None else _kernels_py


K = _select()
BACKEND_NAME = K.NAME
