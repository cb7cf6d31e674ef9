"""Numerical experiments on families of analytic discs and holomorphic extension.

Modules:
    numerics: Fourier data on the circle, winding numbers, certified polynomial roots.
    family: disc families, builders, closure intersection and regularity audits.
    extension: boundary functions and per-disc holomorphic extension.
    jacobian: the Jacobian field ``J``, the phase ``Theta`` and zero tracking.
    topology: fibers of ``G``, Brouwer degree and the homology test.
    verify: symmetry relation, jump profiles, verdicts and the counterexample suite.
    hypersurface: minors, ``K_mu`` and tangential Cauchy-Riemann checks in C^2.
    cli: config-driven runner.
"""

__version__ = "0.1.0"
