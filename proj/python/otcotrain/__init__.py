"""Entropic and unbalanced optimal transport with DTW-guided pairing."""

try:
    from ._otcotrain import *  # noqa: F401,F403
    from ._otcotrain import __version__  # noqa: F401
except ImportError:
    # Build-tree layout: the extension sits on sys.path as a top-level module.
    from _otcotrain import *  # noqa: F401,F403
    from _otcotrain import __version__  # noqa: F401
