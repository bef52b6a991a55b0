"""Structured random feature maps in log-linear time.

One expansion block realizes the product

    (1 / (sigma * sqrt(n))) * C * H * G * P * H * B

where B is a random ±1 diagonal, H the Walsh-Hadamard transform, P a
random permutation, G an i.i.d. gaussian diagonal and C a kernel-dependent
radial calibration diagonal.  Blocks are stacked ``expansions`` times and
the cos/sin pairs of the stacked output form the feature vector whose
inner products estimate the kernel.

Every factor is recomputed on demand from ``(seed, kernel, block_index)``
through named :mod:`mckernel.detrand` streams; nothing random is stored
with a model.  The permutation is applied as a gather,
``out[i] = in[perm[i]]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import detrand
from .detrand import RandomStream
from .wht import wht_fast_batch

PIPELINE_DTYPE = np.float32


@dataclass(frozen=True)
class RBF:
    """Gaussian kernel exp(-|x - x'|^2 / (2 sigma^2))."""
    sigma: float

    def __post_init__(self):
        if self.sigma <= 0.0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class RBFMatern:
    """Radial kernel whose spectral radius is the norm of a sum of t
    uniform unit-ball samples."""
    sigma: float
    t: int

    def __post_init__(self):
        if self.sigma <= 0.0:
            raise ValueError("sigma must be positive")
        if self.t < 1:
            raise ValueError("t must be a positive integer")


Kernel = RBF | RBFMatern


def next_pow2(d: int) -> int:
    if d < 1:
        raise ValueError("dimension must be positive")
    return 1 << (d - 1).bit_length()


@dataclass(frozen=True)
class FeatureMapSpec:
    """Complete description of one feature map; determines it bit-exactly."""
    input_dim: int
    expansions: int
    kernel: Kernel
    seed: int
    padded_dim: int = field(init=False)

    def __post_init__(self):
        if self.input_dim < 1:
            raise ValueError("input_dim must be positive")
        if self.expansions < 1:
            raise ValueError("expansions must be positive")
        object.__setattr__(self, "padded_dim", next_pow2(self.input_dim))


@dataclass(frozen=True)
class FastfoodBlock:
    """Realized factor set for one expansion block (all length n)."""
    b_signs: np.ndarray      # float32, entries in {-1, +1}
    permutation: np.ndarray  # int64, bijection on {0..n-1}
    g_diag: np.ndarray       # float32, i.i.d. standard normal
    c_diag: np.ndarray       # float32, positive radial scales
    block_index: int

    @property
    def n(self) -> int:
        return len(self.b_signs)


def calibration_rbf(stream: RandomStream, n: int, g_diag: np.ndarray) -> np.ndarray:
    """n chi(n)-distributed radial scales, normalized by |g_diag|.

    Each entry is the norm of n fresh gaussian draws, so rows of the
    assembled block have chi(n)-distributed norms, the spectral radius of
    the Gaussian kernel.
    """
    g_norm = float(np.sqrt((g_diag.astype(np.float64) ** 2).sum()))
    if g_norm == 0.0:
        raise ValueError("degenerate gaussian diagonal")
    draws = stream.gaussian_array(n * n).reshape(n, n)
    return np.sqrt((draws * draws).sum(axis=1)) / g_norm


def calibration_matern(stream: RandomStream, n: int, t: int) -> np.ndarray:
    """n radial scales; each is |sum of t i.i.d. uniform n-ball samples|.

    Entries consume the stream sequentially (entry e draws its t samples
    before entry e+1); several entries are drawn per call purely to cut
    Python overhead, which leaves every value bit-identical to the
    one-sample-at-a-time composition.
    """
    if t < 1:
        raise ValueError("t must be a positive integer")
    out = np.empty(n, dtype=np.float64)
    per_entry = t * (n + 1)
    chunk = max(1, (1 << 22) // max(per_entry, 1))
    done = 0
    while done < n:
        k = min(chunk, n - done)
        balls = detrand.unit_ball_batch(stream, k * t, n, r=1.0)
        sums = balls.reshape(k, t, n).sum(axis=1)
        out[done:done + k] = np.sqrt((sums * sums).sum(axis=1))
        done += k
    return out


def build_block(spec: FeatureMapSpec, block_index: int) -> FastfoodBlock:
    """Realize one block's factors from the spec's seed. Pure function.

    Factors live on independent streams labeled "B", "Pi", "G" and "C",
    all at this block index.  The calibration diagonal is divided by
    |g_diag| for both kernels so the assembled rows carry the intended
    radial law independent of the gaussian factor's norm.
    """
    if not 0 <= block_index < spec.expansions:
        raise ValueError(f"block index {block_index} outside 0..{spec.expansions - 1}")
    n = spec.padded_dim
    seed = spec.seed
    b = RandomStream(seed, "B", block_index).sign_array(n)
    perm = detrand.fisher_yates_permutation(RandomStream(seed, "Pi", block_index), n)
    g = RandomStream(seed, "G", block_index).gaussian_array(n)
    c_stream = RandomStream(seed, "C", block_index)
    if isinstance(spec.kernel, RBF):
        c = calibration_rbf(c_stream, n, g)
    else:
        g_norm = float(np.sqrt((g * g).sum()))
        if g_norm == 0.0:
            raise ValueError("degenerate gaussian diagonal")
        c = calibration_matern(c_stream, n, spec.kernel.t) / g_norm
    return FastfoodBlock(
        b_signs=b.astype(PIPELINE_DTYPE),
        permutation=perm,
        g_diag=g.astype(PIPELINE_DTYPE),
        c_diag=c.astype(PIPELINE_DTYPE),
        block_index=block_index,
    )


def build_blocks(spec: FeatureMapSpec) -> list[FastfoodBlock]:
    return [build_block(spec, e) for e in range(spec.expansions)]


def _pad_batch(spec: FeatureMapSpec, x: np.ndarray) -> np.ndarray:
    if x.shape[-1] != spec.input_dim:
        raise ValueError(
            f"input has {x.shape[-1]} features, spec expects {spec.input_dim}")
    m = x.shape[0]
    padded = np.zeros((m, spec.padded_dim), dtype=PIPELINE_DTYPE)
    padded[:, :spec.input_dim] = x
    return padded


def apply_zhat_batch(spec: FeatureMapSpec, blocks: list[FastfoodBlock],
                     x: np.ndarray) -> np.ndarray:
    """Stacked block outputs for a batch; shape (m, n * expansions)."""
    if len(blocks) != spec.expansions:
        raise ValueError(f"expected {spec.expansions} blocks, got {len(blocks)}")
    x = np.atleast_2d(np.asarray(x, dtype=PIPELINE_DTYPE))
    n = spec.padded_dim
    scale = PIPELINE_DTYPE(1.0 / (spec.kernel.sigma * np.sqrt(n)))
    out = np.empty((x.shape[0], n * spec.expansions), dtype=PIPELINE_DTYPE)
    for blk in blocks:
        v = _pad_batch(spec, x)
        v *= blk.b_signs
        wht_fast_batch(v)
        v = np.ascontiguousarray(v[:, blk.permutation])
        v *= blk.g_diag
        wht_fast_batch(v)
        v *= blk.c_diag
        v *= scale
        out[:, blk.block_index * n:(blk.block_index + 1) * n] = v
    return out


def apply_zhat(spec: FeatureMapSpec, blocks: list[FastfoodBlock],
               x: np.ndarray) -> np.ndarray:
    """Image of one input vector under the stacked transform, length n * E."""
    if np.asarray(x).ndim != 1:
        raise ValueError("apply_zhat expects a single vector")
    return apply_zhat_batch(spec, blocks, x)[0]


def feature_map_batch(spec: FeatureMapSpec, blocks: list[FastfoodBlock],
                      x: np.ndarray, normalize: bool = True) -> np.ndarray:
    """Paired cos/sin features for a batch, shape (m, 2 * n * expansions).

    With ``normalize`` the map carries a 1/sqrt(D) scale (D = n * E) so
    inner products of feature vectors are unbiased kernel estimates and
    |phi(x)| = 1 identically.  Without it the raw cos/sin pairs are
    returned; the two differ by a constant factor absorbed into any
    linear model trained on top.
    """
    z = apply_zhat_batch(spec, blocks, x)
    out = np.empty((z.shape[0], 2 * z.shape[1]), dtype=PIPELINE_DTYPE)
    d = z.shape[1]
    np.cos(z, out=out[:, :d])
    np.sin(z, out=out[:, d:])
    if normalize:
        out *= PIPELINE_DTYPE(1.0 / np.sqrt(d))
    return out


def feature_map(spec: FeatureMapSpec, blocks: list[FastfoodBlock],
                x: np.ndarray, normalize: bool = True) -> np.ndarray:
    if np.asarray(x).ndim != 1:
        raise ValueError("feature_map expects a single vector")
    return feature_map_batch(spec, blocks, x, normalize=normalize)[0]


def feature_dim(spec: FeatureMapSpec) -> int:
    """Output dimension of the feature map: 2 * padded_dim * expansions."""
    return 2 * spec.padded_dim * spec.expansions


def param_count(spec: FeatureMapSpec, num_classes: int) -> int:
    """Learned parameters of a softmax head on these features."""
    if num_classes < 2:
        raise ValueError("need at least two classes")
    return num_classes * (feature_dim(spec) + 1)


def dense_zhat(spec: FeatureMapSpec, block: FastfoodBlock) -> np.ndarray:
    """Explicit dense matrix of one block, for small-n verification."""
    from .wht import hadamard_matrix

    n = spec.padded_dim
    h = hadamard_matrix(n, np.float64)
    p = np.zeros((n, n), dtype=np.float64)
    p[np.arange(n), block.permutation] = 1.0  # gather: out[i] = in[perm[i]]
    z = (np.diag(block.c_diag.astype(np.float64)) @ h
         @ np.diag(block.g_diag.astype(np.float64)) @ p @ h
         @ np.diag(block.b_signs.astype(np.float64)))
    return z / (spec.kernel.sigma * np.sqrt(n))


# -- plain-text spec config ----------------------------------------------

def spec_to_config(spec: FeatureMapSpec) -> str:
    """Serialize a spec to the key=value text form used by checkpoints."""
    lines = [
        f"d={spec.input_dim}",
        f"E={spec.expansions}",
        f"kernel={'rbf' if isinstance(spec.kernel, RBF) else 'matern'}",
        f"sigma={spec.kernel.sigma!r}",
        f"t={spec.kernel.t if isinstance(spec.kernel, RBFMatern) else 0}",
        f"seed={spec.seed}",
    ]
    return "\n".join(lines) + "\n"


def spec_from_config(text: str) -> FeatureMapSpec:
    fields: dict[str, str] = {}
    for line in text.strip().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        fields[key.strip()] = value.strip()
    try:
        d = int(fields["d"])
        expansions = int(fields["E"])
        kind = fields["kernel"]
        sigma = float(fields["sigma"])
        seed = int(fields["seed"])
    except KeyError as exc:
        raise ValueError(f"config is missing key {exc}") from exc
    if kind == "rbf":
        kernel: Kernel = RBF(sigma)
    elif kind == "matern":
        kernel = RBFMatern(sigma, int(fields.get("t", "0")))
    else:
        raise ValueError(f"unknown kernel kind {kind!r}")
    return FeatureMapSpec(input_dim=d, expansions=expansions,
                          kernel=kernel, seed=seed)
