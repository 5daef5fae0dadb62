"""Backend selection for the equivocation kernel.

The compiled extension is used when it was built; otherwise the numpy
implementation. Both expose ``equivocation`` with the same signature.
"""
from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKEND = "cython" if _ckernels is not None else "numpy"
equivocation = (_ckernels or _pykernels).equivocation
