"""freepd: matrix-valued positive definite functions on the rank-2 free group.

Subpackages are organized bottom-up: words (the group and its generalized
Cayley graphs), pdcore (function storage and positivity), hilbert (partial
Hilbert spaces and orthogonalization), extend (the parametrized one-entry
extension and the full-ball recursion), transport (relative energies between
functions), energysolver (energy-controlled extension over configurations),
surgery (4-regular labeled graph rewiring), cli (command line entry point).
"""

from .errors import FreePDError

__version__ = "0.1.0"

__all__ = ["FreePDError", "__version__"]
