"""Mimetic discretization of Maxwell fields of arbitrary form degree.

The package provides a fiberwise exterior algebra with explicit sign
conventions (:mod:`kmaxwell.exterior`), a staggered cubical cochain complex
on box and torus grids (:mod:`kmaxwell.mesh`), the first-order split form of
the field equations with symbol and boundary audits (:mod:`kmaxwell.system`),
an RK4 evolution loop with flux-projecting boundary handling
(:mod:`kmaxwell.evolution`), discrete retarded/advanced/causal solution
operators and a pre-symplectic pairing (:mod:`kmaxwell.green`), manufactured
problem families (:mod:`kmaxwell.manufactured`), and a small CLI
(``kmaxwell run`` / ``kmaxwell validate``).
"""

__version__ = "0.1.0"
