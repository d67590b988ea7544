"""Simulation of Gaussian multiplicative chaos over fractal and curve measures.

The subpackages build the pieces bottom-up: :mod:`gmcsim.domain` (domains,
Green functions, lines, curves), :mod:`gmcsim.gff` (circle averages of the
free field), :mod:`gmcsim.measures` (base measures as weighted atoms),
:mod:`gmcsim.gmc` (approximants and mass ladders), :mod:`gmcsim.criteria`
(threshold algebra) and :mod:`gmcsim.analysis` (estimators).
"""

__version__ = "0.1.0"

from .errors import BudgetError, GmcError  # noqa: E402

__all__ = ["BudgetError", "GmcError", "__version__"]
