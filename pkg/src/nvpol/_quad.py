"""Select the shell-quadrature backend at import time.

The compiled extension is used when it was built; setting the environment
variable ``NVPOL_PURE_PYTHON=1`` forces the pure-Python twin.
"""
import os

from . import _shells_py

python_shell_integral = _shells_py.shell_integral

try:
    if os.environ.get("NVPOL_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-Python backend requested")
    from ._shells import shell_integral as compiled_shell_integral
except ImportError:
    compiled_shell_integral = None

shell_integral = compiled_shell_integral or python_shell_integral
BACKEND = "cython" if compiled_shell_integral is not None else "python"

HALFSPACE, CYLINDER, DOME = _shells_py.HALFSPACE, _shells_py.CYLINDER, _shells_py.DOME
MEAN, VARIANCE = _shells_py.MEAN, _shells_py.VARIANCE
