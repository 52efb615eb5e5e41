"""Hyperbolic position consistency loss.

Positives for an anchor are the same node in the other view (consistency)
plus its one-hop neighbors in the same view (tolerance); negatives are m
uniform draws per anchor from the nodes that are neither the anchor nor its
neighbors, drawn independently for the intra-view and inter-view pools.
Pair similarity runs through a distance-aware discriminator
sigma((b - d)/tau), clamped away from {0, 1} before any log.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import diffgeo as dg
from .autodiff import Tensor
from .encoder import DualEmbedding
from .manifolds import Manifold, Point

PROB_CLAMP = 1e-7


class SamplingError(ValueError):
    pass


@dataclass(frozen=True)
class HpcConfig:
    """Knobs of the contrastive term (negative weight, draws, discriminator)."""

    lambda_neg: float = 0.5
    num_negatives: int = 5
    bias: float = 2.0
    temperature: float = 1.0
    similarity: str = "distance"  # "neg_dot" swaps in the tangent inner product

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")
        if self.num_negatives < 1:
            raise ValueError(f"num_negatives must be >= 1, got {self.num_negatives}")
        if self.lambda_neg < 0:
            raise ValueError(f"lambda_neg must be >= 0, got {self.lambda_neg}")
        if self.similarity not in ("distance", "neg_dot"):
            raise ValueError(f"unknown similarity {self.similarity!r}")


@dataclass
class SamplePlan:
    """Per-anchor positive/negative ids for one epoch of contrastive terms."""

    neighbors: list[np.ndarray]
    neg_intra: np.ndarray  # (n, m)
    neg_inter: np.ndarray  # (n, m)
    edge_anchor: np.ndarray  # flattened (anchor, neighbor) pairs, both directions
    edge_nbr: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.neighbors)

    @property
    def num_negatives(self) -> int:
        return self.neg_intra.shape[1]


def build_sample_plan(graph, m: int, rng: np.random.Generator) -> SamplePlan:
    """Draw m intra-view and m inter-view negatives per anchor, excluding the
    anchor and its one-hop neighborhood, uniformly without replacement."""
    n = graph.n_nodes
    nbrs = graph.neighbor_lists()
    neg_intra = np.empty((n, m), dtype=np.int64)
    neg_inter = np.empty((n, m), dtype=np.int64)
    all_ids = np.arange(n)
    for i in range(n):
        excluded = np.zeros(n, dtype=bool)
        excluded[i] = True
        excluded[nbrs[i]] = True
        pool = all_ids[~excluded]
        if pool.size < m:
            raise SamplingError(
                f"anchor {i}: negative pool has {pool.size} nodes < m={m}"
            )
        neg_intra[i] = np.sort(pool[rng.choice(pool.size, size=m, replace=False)])
        neg_inter[i] = np.sort(pool[rng.choice(pool.size, size=m, replace=False)])
    edge_anchor = np.concatenate([np.full(len(a), i, dtype=np.int64) for i, a in enumerate(nbrs)]) \
        if n else np.empty(0, dtype=np.int64)
    edge_nbr = np.concatenate(nbrs) if n else np.empty(0, dtype=np.int64)
    return SamplePlan(nbrs, neg_intra, neg_inter, edge_anchor, edge_nbr)


# ---------------------------------------------------------------------------
# Discriminator
# ---------------------------------------------------------------------------

def pair_probs(man: Manifold, a: Tensor, b: Tensor, cfg: HpcConfig) -> Tensor:
    """Rowwise pair probability sigma((b - similarity)/tau) in (clamp, 1-clamp)."""
    if cfg.similarity == "distance":
        score = dg.dist_rows(man, a, b)
    else:
        score = ad.scalar_mul(dg.tangent_dot_rows(man, man, a, b), -1.0)
    z = ad.scalar_mul(ad.sub(cfg.bias, score), 1.0 / cfg.temperature)
    return ad.clip(ad.sigmoid(z), PROB_CLAMP, 1.0 - PROB_CLAMP)


def discriminator(x: Point, y: Point, cfg: HpcConfig = HpcConfig()) -> float:
    """Probability that the pair (x, y) is a positive; decreasing in distance."""
    if x.manifold != y.manifold:
        raise ValueError(f"manifold mismatch: {x.manifold} vs {y.manifold}")
    man = x.manifold
    ai = dg.ambient_to_internal(man, x.coords[None, :])
    bi = dg.ambient_to_internal(man, y.coords[None, :])
    return pair_probs(man, Tensor(ai), Tensor(bi), cfg).item()


# ---------------------------------------------------------------------------
# Per-anchor mutual-information terms (evaluation path)
# ---------------------------------------------------------------------------

def _views(emb: DualEmbedding, view: str):
    if view == "alpha":
        return emb.alpha, emb.beta, emb.manifold_alpha, emb.manifold_beta
    return emb.beta, emb.alpha, emb.manifold_beta, emb.manifold_alpha


def mi_consistency(i: int, emb: DualEmbedding, plan: SamplePlan, cfg: HpcConfig,
                   view: str = "alpha") -> float:
    """log D(anchor, transferred same-id node) + lambda_n * sum log(1 - D(negatives))."""
    own, other, man_own, man_other = _views(emb, view)
    transferred = dg.transfer0(man_other, man_own, other)
    anchor = ad.gather_rows(own, [i])
    pos = math.log(pair_probs(man_own, anchor, ad.gather_rows(transferred, [i]), cfg).item())
    if cfg.lambda_neg == 0.0:
        return pos
    negs = [
        math.log(1.0 - pair_probs(man_own, anchor, ad.gather_rows(transferred, [j]), cfg).item())
        for j in plan.neg_inter[i]
    ]
    return pos + cfg.lambda_neg * math.fsum(negs)


def mi_tolerance(i: int, emb: DualEmbedding, plan: SamplePlan, cfg: HpcConfig,
                 view: str = "alpha") -> float:
    """sum over one-hop neighbors of log D + lambda_n * sum log(1 - D(intra negatives))."""
    own, _, man_own, _ = _views(emb, view)
    anchor = ad.gather_rows(own, [i])
    pos = math.fsum(
        math.log(pair_probs(man_own, anchor, ad.gather_rows(own, [j]), cfg).item())
        for j in plan.neighbors[i]
    )
    if cfg.lambda_neg == 0.0:
        return pos
    negs = [
        math.log(1.0 - pair_probs(man_own, anchor, ad.gather_rows(own, [j]), cfg).item())
        for j in plan.neg_intra[i]
    ]
    return pos + cfg.lambda_neg * math.fsum(negs)


# ---------------------------------------------------------------------------
# Full loss (vectorized, differentiable)
# ---------------------------------------------------------------------------

def hpc_loss(emb: DualEmbedding, plan: SamplePlan, cfg: HpcConfig,
             include_tolerance: bool = True) -> Tensor:
    """-(1/2n) sum_i [consistency(alpha) + consistency(beta)
    + tolerance(alpha) + tolerance(beta)], differentiable in both views."""
    n = plan.n_nodes
    man_a, man_b = emb.manifold_alpha, emb.manifold_beta
    beta_in_alpha = dg.transfer0(man_b, man_a, emb.beta)
    alpha_in_beta = dg.transfer0(man_a, man_b, emb.alpha)

    total = ad.reduce_sum(ad.log(pair_probs(man_a, emb.alpha, beta_in_alpha, cfg)))
    total = ad.add(total, ad.reduce_sum(ad.log(pair_probs(man_b, emb.beta, alpha_in_beta, cfg))))
    if cfg.lambda_neg > 0.0:
        neg_sum = None
        for j in range(plan.num_negatives):
            idx = plan.neg_inter[:, j]
            na = ad.reduce_sum(ad.log(ad.sub(1.0, pair_probs(
                man_a, emb.alpha, ad.gather_rows(beta_in_alpha, idx), cfg))))
            nb = ad.reduce_sum(ad.log(ad.sub(1.0, pair_probs(
                man_b, emb.beta, ad.gather_rows(alpha_in_beta, idx), cfg))))
            term = ad.add(na, nb)
            neg_sum = term if neg_sum is None else ad.add(neg_sum, term)
        total = ad.add(total, ad.scalar_mul(neg_sum, cfg.lambda_neg))

    if include_tolerance:
        if plan.edge_anchor.size:
            ta = ad.reduce_sum(ad.log(pair_probs(
                man_a, ad.gather_rows(emb.alpha, plan.edge_anchor),
                ad.gather_rows(emb.alpha, plan.edge_nbr), cfg)))
            tb = ad.reduce_sum(ad.log(pair_probs(
                man_b, ad.gather_rows(emb.beta, plan.edge_anchor),
                ad.gather_rows(emb.beta, plan.edge_nbr), cfg)))
            total = ad.add(total, ad.add(ta, tb))
        if cfg.lambda_neg > 0.0:
            neg_sum = None
            for j in range(plan.num_negatives):
                idx = plan.neg_intra[:, j]
                na = ad.reduce_sum(ad.log(ad.sub(1.0, pair_probs(
                    man_a, emb.alpha, ad.gather_rows(emb.alpha, idx), cfg))))
                nb = ad.reduce_sum(ad.log(ad.sub(1.0, pair_probs(
                    man_b, emb.beta, ad.gather_rows(emb.beta, idx), cfg))))
                term = ad.add(na, nb)
                neg_sum = term if neg_sum is None else ad.add(neg_sum, term)
            total = ad.add(total, ad.scalar_mul(neg_sum, cfg.lambda_neg))

    return ad.scalar_mul(total, -1.0 / (2.0 * n))
