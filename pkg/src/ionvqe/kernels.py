"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
fallback. Set ``IONVQE_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("IONVQE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled  # type: ignore[attr-defined]
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"

apply_pauli = _impl.apply_pauli
expval_pauli_state = _impl.expval_pauli_state
expval_pauli_density = _impl.expval_pauli_density
pauli_channel = _impl.pauli_channel
dephase = _impl.dephase
collective_dephase = _impl.collective_dephase
parity_expectations = _impl.parity_expectations


def backends() -> dict:
    """All importable implementations by name, for tests and benchmarks."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels  # type: ignore[attr-defined]
    except ImportError:
        pass
    else:
        out["cython"] = _kernels
    return out
