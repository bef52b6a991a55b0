"""Deterministic, hash-derived randomness.

Every random quantity in the toolkit is a pure function of a 64-bit seed,
a short stream label, a block index and a draw counter.  Nothing is ever
stored: any factor can be recomputed on demand, in any process, in any
order, and the result is bit-identical.

The pinned mixer
----------------
All draws are produced by a fixed 64-bit mixing function.  The exact
definition, which must never change once golden tests are pinned:

* ``mix64(z)`` is the MurmurHash3 64-bit finalizer::

      z ^= z >> 33
      z *= 0xFF51AFD7ED558CCD   (mod 2^64)
      z ^= z >> 33
      z *= 0xC4CEB9FE1A85EC53   (mod 2^64)
      z ^= z >> 33

* Labels are folded with FNV-1a 64 over their UTF-8 bytes
  (offset ``0xCBF29CE484222325``, prime ``0x100000001B3``).

* The per-stream key packs the tuple ``(seed, label, block)``::

      key = mix64(mix64(mix64(seed) ^ fnv1a64(label)) ^ (block * GAMMA))

  with the Weyl constant ``GAMMA = 0x9E3779B97F4A7C15``.

* The value at draw counter ``c`` is ``mix64(key + c * GAMMA)`` (mod 2^64).

``uniform01`` maps the top 53 bits of that value to ``[0, 1)``.  Gaussians
come from the Box-Muller transform on consecutive uniform pairs
``(u1, u2) -> (r cos(2 pi u2), r sin(2 pi u2))`` with ``r = sqrt(-2 ln u1)``;
the second variate of a pair is cached, so the counter advances exactly two
uniforms per two gaussians.  A ``u1`` of exactly 0 is replaced by ``2^-53``
before the log.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_FMIX_C1 = 0xFF51AFD7ED558CCD
_FMIX_C2 = 0xC4CEB9FE1A85EC53
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3

_U64_GAMMA = np.uint64(GAMMA)
_U64_C1 = np.uint64(_FMIX_C1)
_U64_C2 = np.uint64(_FMIX_C2)
_SHIFT33 = np.uint64(33)
_SHIFT11 = np.uint64(11)
_SHIFT63 = np.uint64(63)
_TWO_NEG53 = 2.0 ** -53


def mix64(z: int) -> int:
    """MurmurHash3 64-bit finalizer on a Python int (mod 2^64)."""
    z &= _MASK64
    z ^= z >> 33
    z = (z * _FMIX_C1) & _MASK64
    z ^= z >> 33
    z = (z * _FMIX_C2) & _MASK64
    z ^= z >> 33
    return z


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return h


def stream_key(seed: int, label: str, block: int) -> int:
    """Pack (seed, label, block) into the 64-bit per-stream key."""
    k = mix64(seed & _MASK64)
    k = mix64(k ^ fnv1a64(label.encode("utf-8")))
    k = mix64(k ^ ((block * GAMMA) & _MASK64))
    return k


def _mix64_array(z: np.ndarray) -> np.ndarray:
    # in-place fmix64 on a uint64 array
    z ^= z >> _SHIFT33
    z *= _U64_C1
    z ^= z >> _SHIFT33
    z *= _U64_C2
    z ^= z >> _SHIFT33
    return z


class RandomStream:
    """One named, counter-addressed stream of deterministic draws.

    Two streams constructed with the same ``(seed, label, block)`` yield
    identical sequences; differing in any component decorrelates them.
    The only mutable state is the draw counter and the cached second
    Box-Muller variate.  Scalar and array draws interleave freely and
    consume the same underlying counter sequence.
    """

    __slots__ = ("seed", "label", "block", "counter", "_key", "_pending")

    def __init__(self, seed: int, label: str, block: int = 0):
        if block < 0:
            raise ValueError("block index must be non-negative")
        self.seed = seed & _MASK64
        self.label = label
        self.block = block
        self.counter = 0
        self._key = stream_key(seed, label, block)
        self._pending: float | None = None

    def __repr__(self) -> str:
        return (f"RandomStream(seed={self.seed}, label={self.label!r}, "
                f"block={self.block}, counter={self.counter})")

    # -- raw hash layer ----------------------------------------------------

    def hash64(self) -> int:
        """Mixer output at the current counter. Does not advance."""
        return mix64((self._key + self.counter * GAMMA) & _MASK64)

    def _hash_block(self, count: int) -> np.ndarray:
        c = np.arange(self.counter, self.counter + count, dtype=np.uint64)
        self.counter += count
        z = np.uint64(self._key) + c * _U64_GAMMA
        return _mix64_array(z)

    # -- distribution layer ------------------------------------------------

    def uniform01(self) -> float:
        return float(self.uniform01_array(1)[0])

    def uniform01_array(self, count: int) -> np.ndarray:
        """``count`` uniforms in [0, 1), top 53 bits of the hash."""
        h = self._hash_block(count)
        return (h >> _SHIFT11).astype(np.float64) * _TWO_NEG53

    def sign_pm1(self) -> float:
        return float(self.sign_array(1)[0])

    def sign_array(self, count: int) -> np.ndarray:
        """``count`` values in {-1.0, +1.0} from the top hash bit."""
        h = self._hash_block(count)
        return np.where((h >> _SHIFT63).astype(bool), 1.0, -1.0)

    def gaussian(self) -> float:
        return float(self.gaussian_array(1)[0])

    def gaussian_array(self, count: int) -> np.ndarray:
        """``count`` standard normals via Box-Muller with pair caching."""
        out = np.empty(count, dtype=np.float64)
        pos = 0
        if self._pending is not None and count > 0:
            out[0] = self._pending
            self._pending = None
            pos = 1
        m = count - pos
        if m <= 0:
            return out
        pairs = (m + 1) // 2
        z = self._gaussian_pairs(self.uniform01_array(2 * pairs))
        out[pos:] = z[:m]
        if m & 1:
            self._pending = float(z[m])
        return out

    @staticmethod
    def _gaussian_pairs(u: np.ndarray) -> np.ndarray:
        # u has even length; consecutive (u1, u2) pairs -> (z1, z2)
        u1 = u[0::2].copy()
        u2 = u[1::2]
        u1[u1 == 0.0] = _TWO_NEG53
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.empty_like(u)
        z[0::2] = r * np.cos(2.0 * np.pi * u2)
        z[1::2] = r * np.sin(2.0 * np.pi * u2)
        return z


def fisher_yates_permutation(stream: RandomStream, n: int) -> np.ndarray:
    """Uniform permutation of {0..n-1} as an int64 index array.

    Standard downward Fisher-Yates; swap target ``j`` at step ``i`` is
    ``int(u * (i + 1))`` from one uniform draw.  O(n) time and space.
    """
    if n < 1:
        raise ValueError("empty permutation")
    perm = np.arange(n, dtype=np.int64)
    if n == 1:
        return perm
    u = stream.uniform01_array(n - 1)
    for k, i in enumerate(range(n - 1, 0, -1)):
        j = int(u[k] * (i + 1))
        if j > i:  # u == nextafter(1) cannot occur, guard anyway
            j = i
        perm[i], perm[j] = perm[j], perm[i]
    return perm


def _row_norms(x: np.ndarray) -> np.ndarray:
    # deterministic reduction order shared by scalar and batch paths
    return np.sqrt((x * x).sum(axis=-1))


def unit_ball_sample(stream: RandomStream, n: int, r: float = 1.0) -> np.ndarray:
    """One point uniform in the n-ball of radius r: ``r * U^(1/n) * X/|X|``."""
    return unit_ball_batch(stream, 1, n, r)[0]


def unit_ball_batch(stream: RandomStream, count: int, n: int,
                    r: float = 1.0) -> np.ndarray:
    """``count`` i.i.d. uniform n-ball points, shape (count, n).

    Draw order per point is n gaussians then one uniform for the radius,
    so a batch consumes exactly the same counter range as ``count``
    successive single samples.
    """
    if n < 1:
        raise ValueError("dimension must be positive")
    if r <= 0.0:
        raise ValueError("radius must be positive")
    if count < 1:
        raise ValueError("count must be positive")
    if n % 2 == 0 and stream._pending is None:
        # fast path: per point, n gaussians consume exactly n uniforms
        u = stream.uniform01_array(count * (n + 1)).reshape(count, n + 1)
        u1 = u[:, 0:n:2].copy()
        u2 = u[:, 1:n:2]
        u1[u1 == 0.0] = _TWO_NEG53
        rad = np.sqrt(-2.0 * np.log(u1))
        x = np.empty((count, n), dtype=np.float64)
        x[:, 0::2] = rad * np.cos(2.0 * np.pi * u2)
        x[:, 1::2] = rad * np.sin(2.0 * np.pi * u2)
        uball = u[:, n]
    else:
        x = np.empty((count, n), dtype=np.float64)
        uball = np.empty(count, dtype=np.float64)
        for i in range(count):
            x[i] = stream.gaussian_array(n)
            uball[i] = stream.uniform01()
    norms = _row_norms(x)
    while (norms == 0.0).any():  # zero vector has probability zero
        bad = norms == 0.0
        for i in np.flatnonzero(bad):
            x[i] = stream.gaussian_array(n)
        norms = _row_norms(x)
    scale = r * uball ** (1.0 / n) / norms
    return x * scale[:, None]


def chi_sample(stream: RandomStream, d: int) -> float:
    """A chi(d) variate: Euclidean norm of d i.i.d. standard normals."""
    if d < 1:
        raise ValueError("degrees of freedom must be positive")
    g = stream.gaussian_array(d)
    return float(_row_norms(g))
