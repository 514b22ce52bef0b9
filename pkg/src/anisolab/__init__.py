"""Numerical laboratory for comparison geometry with an elliptic Codazzi tensor field.

The package builds chart-based Riemannian manifolds, self-adjoint (1,1)-tensor
fields on them, and the anisotropic Laplace operators those fields induce.  On
top of that it verifies curvature identities, mean-curvature and volume
comparison inequalities, rigidity premises, and global consequences (diameter,
excess, ends) against independently computed model-space quantities.
"""

__version__ = "0.1.0"
