"""Kernel lane selection: compiled extension when available, else Python.

Set ``VPPSIM_PURE_KERNEL=1`` to force the Python lane (used by the parity
tests and the benchmark). Both lanes are bit-identical; the compiled one is
just faster.
"""
import os

from . import _pykernel

if os.environ.get("VPPSIM_PURE_KERNEL"):
    BACKEND = "python"
    step_core = _pykernel.step_core
    uncontrolled_rollout = _pykernel.uncontrolled_rollout
else:
    try:
        from . import _speedups

        BACKEND = "compiled"
        step_core = _speedups.step_core
        uncontrolled_rollout = _speedups.uncontrolled_rollout
    except ImportError:
        BACKEND = "python"
        step_core = _pykernel.step_core
        uncontrolled_rollout = _pykernel.uncontrolled_rollout
