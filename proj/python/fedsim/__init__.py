"""Federated-averaging simulator and detection-metrics toolkit."""

try:
    from ._fedsim import *  # noqa: F401,F403  (installed package layout)
except ImportError:
    # Source-tree layout: the extension lives in the CMake build directory
    # named by FEDSIM_EXT_DIR.
    import os
    import sys

    _ext_dir = os.environ.get("FEDSIM_EXT_DIR")
    if not _ext_dir:
        raise
    sys.path.insert(0, _ext_dir)
    from _fedsim import *  # noqa: F401,F403
