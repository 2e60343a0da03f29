"""Fay-Herriot small-area estimation with spectral clustering."""

try:
    from ._fhsc import *  # noqa: F401,F403  (wheel layout: extension inside the package)
    from ._fhsc import __version__  # noqa: F401
except ImportError:  # development layout: extension on FHSC_MODULE_DIR / sys.path
    import os
    import sys

    _module_dir = os.environ.get("FHSC_MODULE_DIR")
    if _module_dir and _module_dir not in sys.path:
        sys.path.insert(0, _module_dir)
    from _fhsc import *  # noqa: F401,F403
    from _fhsc import __version__  # noqa: F401
