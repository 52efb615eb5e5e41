"""Two-view hyperbolic GNN encoders.

Each layer aggregates in the tangent space at the origin: log map the node
points, average neighbors through the normalized adjacency, apply an affine
map and activation, and push the result back with the exp map. Euclidean
input features are lifted once through the origin exp map, so every
intermediate embedding satisfies its model constraint by construction.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import diffgeo as dg
from .autodiff import Tensor
from .manifolds import Manifold

ACTIVATIONS = {
    "tanh": ad.tanh,
    "relu": ad.relu,
    "none": lambda t: t,
}

# validate every layer output against its model constraint (slow path)
DEBUG_VALIDATE = bool(os.environ.get("HGCL_DEBUG_VALIDATE"))


class EncoderError(RuntimeError):
    pass


def lift_features(manifold: Manifold, features: np.ndarray,
                  max_norm: float = 8.0) -> tuple[Tensor, int]:
    """Treat feature rows as origin tangents and exp-map them onto the manifold.

    Rows with tangent norm above ``max_norm`` are rescaled onto the clamp;
    the count of clamped rows is returned alongside the lifted points.
    """
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if not np.all(np.isfinite(x)):
        raise EncoderError("non-finite features")
    norms = np.sqrt(np.sum(x * x, axis=1, keepdims=True))
    over = norms[:, 0] > max_norm
    if np.any(over):
        x = x * np.where(norms > max_norm, max_norm / norms, 1.0)
    man = dataclasses.replace(manifold, dim=x.shape[1])
    return dg.exp0(man, Tensor(x)), int(np.sum(over))


@dataclass
class HgnnLayer:
    """One tangent-space graph convolution on a fixed manifold."""

    weight: Tensor
    bias: Tensor
    manifold: Manifold
    activation: str = "tanh"

    @classmethod
    def init(cls, manifold: Manifold, d_in: int, d_out: int, activation: str,
             rng: np.random.Generator) -> "HgnnLayer":
        s = 1.0 / np.sqrt(d_in)
        weight = ad.parameter(rng.uniform(-s, s, size=(d_in, d_out)))
        bias = ad.parameter(np.zeros((1, d_out)))
        return cls(weight, bias, manifold, activation)

    def forward(self, h: Tensor, a_norm) -> Tensor:
        man_in = dataclasses.replace(self.manifold, dim=h.value.shape[1])
        man_out = dataclasses.replace(self.manifold, dim=self.weight.value.shape[1])
        u = dg.log0(man_in, h)
        msg = ad.aggregate(a_norm, u)
        z = ad.add(ad.matmul(msg, self.weight), self.bias)
        z = ACTIVATIONS[self.activation](z)
        return dg.exp0(man_out, z)

    def parameters(self) -> list[Tensor]:
        return [self.weight, self.bias]


class Encoder:
    """Stack of HgnnLayers producing one hyperbolic view of the graph."""

    def __init__(self, manifold: Manifold, d_in: int, dims: list[int],
                 activation: str, rng: np.random.Generator,
                 max_feature_norm: float = 8.0):
        if activation not in ACTIVATIONS:
            raise EncoderError(f"unknown activation {activation!r}")
        self.manifold = dataclasses.replace(manifold, dim=dims[-1])
        self.max_feature_norm = max_feature_norm
        self.layers: list[HgnnLayer] = []
        prev = d_in
        for i, d in enumerate(dims):
            act = activation if i < len(dims) - 1 else "none"
            self.layers.append(HgnnLayer.init(self.manifold, prev, d, act, rng))
            prev = d
        self.clamped_rows = 0

    def encode(self, features: np.ndarray, a_norm) -> Tensor:
        h, clamped = lift_features(self.manifold, features, self.max_feature_norm)
        self.clamped_rows = clamped
        for i, layer in enumerate(self.layers):
            try:
                h = layer.forward(h, a_norm)
            except ad.NonFiniteError as exc:
                raise EncoderError(f"layer {i}: {exc}") from exc
            if DEBUG_VALIDATE:
                man = dataclasses.replace(self.manifold, dim=h.value.shape[1])
                man.check_points(dg.internal_to_ambient(man, h.value))
        return h

    def parameters(self) -> list[Tensor]:
        return [p for layer in self.layers for p in layer.parameters()]


@dataclass
class DualEmbedding:
    """Per-node embedding pair, one view per manifold (intrinsic coordinates)."""

    alpha: Tensor
    beta: Tensor
    manifold_alpha: Manifold
    manifold_beta: Manifold

    def points(self, view: str) -> np.ndarray:
        """Materialize one view as validated ambient point rows."""
        if view == "alpha":
            man, t = self.manifold_alpha, self.alpha
        elif view == "beta":
            man, t = self.manifold_beta, self.beta
        else:
            raise ValueError(f"view must be 'alpha' or 'beta', got {view!r}")
        pts = dg.internal_to_ambient(man, t.value)
        man.check_points(pts)
        return pts


def encode_views(features: np.ndarray, a_norm, encoder_alpha: Encoder,
                 encoder_beta: Encoder) -> DualEmbedding:
    return DualEmbedding(
        alpha=encoder_alpha.encode(features, a_norm),
        beta=encoder_beta.encode(features, a_norm),
        manifold_alpha=encoder_alpha.manifold,
        manifold_beta=encoder_beta.manifold,
    )
