"""blab: a numerical lab for commutators of the Bergman projection.

Library layout:

- ``geometry``    exact geometry of the unit ball (metrics, regions, frames)
- ``montecarlo``  seeded sampling and integral/measure estimators
- ``dyadic``      boundary dyadic systems, kubes, tents, layer decompositions
- ``operators``   Bergman kernel, symbols, closed-form and MC commutators
- ``orlicz``      Young functions, Luxembourg averages, oscillation norms
- ``harness``     the ``blab`` CLI: reproducible experiments, CSV and figures
"""

__version__ = "0.1.0"
