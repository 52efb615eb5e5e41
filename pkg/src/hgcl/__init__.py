"""Two-view hyperbolic graph contrastive learning on the Poincare ball and
Lorentz models, with a from-scratch reverse-mode tape engine underneath."""

__version__ = "0.1.0"

from .manifolds import Manifold, Model, lorentz, poincare  # noqa: F401
