"""Expression-search PDE solver: python surface over the C++ core."""

try:
    from ._xpde import *  # noqa: F401,F403
    from ._xpde import __doc__ as _core_doc
except ImportError:  # in-tree builds put the module on PYTHONPATH directly
    from _xpde import *  # noqa: F401,F403
    from _xpde import __doc__ as _core_doc

__doc__ = _core_doc
