"""Collision-based gradient transforms.

A layer's weight rows are treated as particle positions and its gradient
rows as particle velocities. Two transforms are provided:

* :func:`hard_collision` picks colliding neuron pairs with a deterministic
  acceptance test and applies elastic hard-sphere scattering to their
  gradients, with a random post-collision direction.
* :func:`soft_collision` adds a repulsion term weighted by the elementwise
  product of the weight and gradient cosine-similarity matrices.

Weights are never modified here; only the returned gradient differs.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform

from . import _kernels
from .linalg import as_matrix, sample_unit_sphere
from .metrics import cosine_matrix

__all__ = [
    "CollisionMode",
    "KineticConfig",
    "PairwiseRelatives",
    "pairwise_relatives",
    "collision_mask",
    "collide_pairs",
    "hard_collision",
    "soft_collision",
    "kinetic_transform",
    "PreconditionError",
    "OracleReport",
    "thm3_oracle",
]


class CollisionMode(str, enum.Enum):
    HARD = "hard"
    SOFT = "soft"


@dataclass(frozen=True)
class KineticConfig:
    mode: CollisionMode = CollisionMode.SOFT
    coll_coef: float = 0.1
    soft_zero_diagonal: bool = False
    hard_max_one_collision_per_neuron: bool = False
    rng_stream_label: str = "kinetic"

    def __post_init__(self):
        try:
            mode = CollisionMode(str(getattr(self.mode, "value", self.mode)).strip().lower())
        except ValueError:
            raise ValueError(f"mode: unknown collision mode {self.mode!r}") from None
        object.__setattr__(self, "mode", mode)
        if not 0.0 <= self.coll_coef <= 1.0:
            raise ValueError(f"coll_coef: must lie in [0, 1], got {self.coll_coef}")


@dataclass
class PairwiseRelatives:
    """Pairwise distances between weight rows and between gradient rows."""

    w_r: np.ndarray
    g_r: np.ndarray
    g: np.ndarray

    @property
    def g_r_max(self) -> float:
        return float(self.g_r.max()) if self.g_r.size else 0.0

    def g_cm(self, i: int, j: int) -> np.ndarray:
        return 0.5 * (self.g[i] + self.g[j])


def _check_pair(w, g):
    w = as_matrix(w, "w")
    g = as_matrix(g, "g")
    if w.shape != g.shape:
        raise ValueError(f"weight shape {w.shape} != gradient shape {g.shape}")
    if w.shape[0] < 1:
        raise ValueError("layer has no neurons")
    return w, g


def pairwise_relatives(w, g) -> PairwiseRelatives:
    w, g = _check_pair(w, g)
    if w.shape[0] == 1:
        z = np.zeros((1, 1))
        return PairwiseRelatives(z, z.copy(), g)
    return PairwiseRelatives(squareform(pdist(w)), squareform(pdist(g)), g)


def collision_mask(rel: PairwiseRelatives, coll_coef: float) -> np.ndarray:
    """Boolean ``N x N`` acceptance mask.

    Pair ``(i, j)`` collides iff ``g_r * exp(-w_r) / g_r_max > 1 - coll_coef``.
    Nothing collides when all gradient rows coincide (``g_r_max == 0``).
    """
    if not 0.0 <= coll_coef <= 1.0:
        raise ValueError(f"coll_coef must lie in [0, 1], got {coll_coef}")
    n = rel.g_r.shape[0]
    gmax = rel.g_r_max
    if gmax == 0.0 or coll_coef == 0.0:
        return np.zeros((n, n), dtype=bool)
    score = rel.g_r * np.exp(-rel.w_r) / gmax
    mask = score > 1.0 - coll_coef
    np.fill_diagonal(mask, False)
    return mask


def _collision_scores(rel: PairwiseRelatives) -> np.ndarray:
    return rel.g_r * np.exp(-rel.w_r) / rel.g_r_max


def _accepted_pairs(rel, mask, one_per_neuron):
    i, j = np.nonzero(np.triu(mask, k=1))
    if not one_per_neuron or i.size == 0:
        return i, j
    score = _collision_scores(rel)[i, j]
    # stable sort keeps the (i, j) row-major order among ties
    order = np.argsort(-score, kind="stable")
    used = np.zeros(mask.shape[0], dtype=bool)
    keep = []
    for k in order:
        a, b = i[k], j[k]
        if not (used[a] or used[b]):
            used[a] = used[b] = True
            keep.append(k)
    keep = np.sort(np.asarray(keep, dtype=int))
    return i[keep], j[keep]


def collide_pairs(g, pairs_i, pairs_j, directions) -> np.ndarray:
    """Apply hard-sphere scattering to the listed gradient pairs.

    ``directions[k]`` is the unit vector for pair ``(pairs_i[k], pairs_j[k])``;
    its partner sees the negated vector. Every change is computed from the
    input gradients and the changes are then summed per neuron.
    """
    g = as_matrix(g, "g")
    pairs_i = np.asarray(pairs_i, dtype=int)
    pairs_j = np.asarray(pairs_j, dtype=int)
    out = g.copy()
    if pairs_i.size == 0:
        return out
    n = np.asarray(directions, dtype=np.float64).reshape(pairs_i.size, g.shape[1])
    gi = g[pairs_i]
    gj = g[pairs_j]
    g_r = np.linalg.norm(gi - gj, axis=1)[:, None]
    g_cm = 0.5 * (gi + gj)
    half = 0.5 * g_r * n
    np.add.at(out, pairs_i, g_cm + half - gi)
    np.add.at(out, pairs_j, g_cm - half - gj)
    return out


def hard_collision(w, g, cfg: KineticConfig, rng: np.random.Generator) -> np.ndarray:
    """Hard-sphere collisions between every accepted pair of neurons.

    One uniform direction is drawn per accepted pair, in row-major pair
    order. With ``hard_max_one_collision_per_neuron`` pairs are taken
    greedily by descending acceptance score so that each neuron collides at
    most once, which makes momentum and energy conservation exact per pair.
    """
    w, g = _check_pair(w, g)
    if cfg.coll_coef == 0.0 or w.shape[0] < 2:
        return g.copy()
    pi, pj = _kernels.hard_pairs(w, g, cfg.coll_coef, cfg.hard_max_one_collision_per_neuron)
    if pi.size == 0:
        return g.copy()
    while True:
        out, ok = _kernels.hard_apply(g, pi, pj, rng.standard_normal((pi.size, g.shape[1])))
        if ok:
            return out


def soft_collision(w, g, cfg: KineticConfig) -> np.ndarray:
    """Repulsion update ``g + coll_coef * K @ g`` with ``K = -(C_w * C_g)``.

    ``C_w`` and ``C_g`` are row cosine-similarity matrices; rows with zero
    norm get zero similarity. The diagonal of ``K`` is kept unless
    ``cfg.soft_zero_diagonal`` is set.
    """
    w, g = _check_pair(w, g)
    if cfg.coll_coef == 0.0:
        return g.copy()
    return _kernels.soft_kernel(w, g, cfg.coll_coef, cfg.soft_zero_diagonal)


def kinetic_transform(w, g, cfg: KineticConfig, rng=None) -> np.ndarray:
    if cfg.mode is CollisionMode.HARD:
        if rng is None:
            raise ValueError("hard collision needs a random generator")
        return hard_collision(w, g, cfg, rng)
    return soft_collision(w, g, cfg)


# -- single-step correlation oracle ----------------------------------------


class PreconditionError(ValueError):
    pass


@dataclass
class OracleReport:
    """Absolute cosine between two neurons before and after one descent step."""

    cos_before: float
    cos_plain: float
    cos_collision: float

    @property
    def plain_change(self) -> float:
        return self.cos_plain - self.cos_before

    @property
    def collision_change(self) -> float:
        return self.cos_collision - self.cos_before

    @property
    def relative_change(self) -> float:
        """Effect of the collision term alone; negative means less correlated."""
        return self.cos_collision - self.cos_plain


def _abs_cos_rows(a, b):
    num = np.einsum("...d,...d->...", a, b)
    return np.abs(num / (np.linalg.norm(a, axis=-1) * np.linalg.norm(b, axis=-1)))


def check_stable_phase(w, g, i=0, j=1, *, hard=False):
    """Raise :class:`PreconditionError` unless the stable-training conditions hold."""
    wi, wj, gi, gj = w[i], w[j], g[i], g[j]
    if not wi @ gi < 0:
        raise PreconditionError("w_i . g_i < 0 violated")
    if not wj @ gj < 0:
        raise PreconditionError("w_j . g_j < 0 violated")
    if not wi @ wj > 0:
        raise PreconditionError("cos(w_i, w_j) > 0 violated")
    if hard and not (wj - wi) @ (gj - gi) > 0:
        raise PreconditionError("(w_j - w_i) . (g_j - g_i) > 0 violated")


def _hard_draws(w, g, cfg, rng, n_draws):
    """Collided gradients for ``n_draws`` independent direction draws, stacked."""
    rel = pairwise_relatives(w, g)
    mask = collision_mask(rel, cfg.coll_coef)
    pi, pj = _accepted_pairs(rel, mask, cfg.hard_max_one_collision_per_neuron)
    out = np.broadcast_to(g, (n_draws,) + g.shape).copy()
    if pi.size == 0:
        return out
    n = sample_unit_sphere(rng, g.shape[1], size=n_draws * pi.size).reshape(n_draws, pi.size, -1)
    gi, gj = g[pi], g[pj]
    g_cm = 0.5 * (gi + gj)
    half = 0.5 * np.linalg.norm(gi - gj, axis=1)[:, None] * n
    for k in range(pi.size):
        out[:, pi[k]] += g_cm[k] + half[:, k] - gi[k]
        out[:, pj[k]] += g_cm[k] - half[:, k] - gj[k]
    return out


def thm3_oracle(w, g, eta, transform, *, i=0, j=1, n_draws=10_000, rng=None, check=True) -> OracleReport:
    """Compare one plain descent step against one step with a collision term.

    ``transform`` is a :class:`KineticConfig` or a callable ``(w, g) -> g*``.
    For a hard-mode config the collided cosine is the mean over ``n_draws``
    direction draws. With ``check`` set the stable-phase conditions for
    neurons ``i`` and ``j`` are verified first.
    """
    w, g = _check_pair(w, g)
    hard = isinstance(transform, KineticConfig) and transform.mode is CollisionMode.HARD
    if check:
        check_stable_phase(w, g, i, j, hard=hard)
    before = float(_abs_cos_rows(w[i], w[j]))
    wp = w - eta * g
    plain = float(_abs_cos_rows(wp[i], wp[j]))
    if hard:
        if rng is None:
            raise ValueError("hard mode oracle needs rng")
        gs = _hard_draws(w, g, transform, rng, n_draws)
        wc = w - eta * gs
        coll = float(_abs_cos_rows(wc[:, i], wc[:, j]).mean())
    else:
        g_new = soft_collision(w, g, transform) if isinstance(transform, KineticConfig) else transform(w, g)
        wc = w - eta * g_new
        coll = float(_abs_cos_rows(wc[i], wc[j]))
    return OracleReport(before, plain, coll)
