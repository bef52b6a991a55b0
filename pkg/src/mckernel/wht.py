"""In-place Walsh-Hadamard transforms.

Three implementations of the same ±1 orthogonal transform of length 2^m:

* ``wht_naive``    explicit matrix product, O(n^2), the correctness oracle
                   (64-bit accumulation);
* ``wht_recursive`` textbook divide-and-conquer reference, O(n log n);
* ``wht_fast``     iterative in-place butterflies, O(n log n), the pipeline
                   path: a cache-resident hard-coded routine handles each
                   aligned base-size block, then combine stages double the
                   span until the whole transform is done.  All inner loops
                   are contiguous-run adds and subtracts.

``wht_fast`` allocates nothing proportional to the input length: the
combine stages are three in-place ufunc passes, and the base routine works
through a constant-size scratch (CHUNK_ROWS x base) chunk by chunk.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

DEFAULT_BASE_SIZE = 256
_CHUNK_ROWS = 64

_base_cache: dict[tuple[int, str], np.ndarray] = {}


def is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def _check_pow2(n: int) -> None:
    if not is_power_of_two(n):
        raise ValueError(f"length {n} is not a power of two")


def _and_parity(i: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Parity of popcount(i & j) for index arrays, as 0/1."""
    z = i[:, None] & j[None, :]
    if hasattr(np, "bitwise_count"):
        return np.bitwise_count(z) & np.uint32(1)
    z ^= z >> 16
    z ^= z >> 8
    z ^= z >> 4
    z ^= z >> 2
    z ^= z >> 1
    return z & np.uint32(1)


def hadamard_matrix(n: int, dtype=np.float64) -> np.ndarray:
    """Dense H_m of size n = 2^m; entry (i, j) is (-1)^popcount(i & j)."""
    _check_pow2(n)
    key = (n, np.dtype(dtype).str)
    h = _base_cache.get(key)
    if h is None:
        i = np.arange(n, dtype=np.uint32)
        h = np.where(_and_parity(i, i), -1.0, 1.0).astype(dtype)
        h.setflags(write=False)
        _base_cache[key] = h
    return h


def wht_naive(v: np.ndarray) -> np.ndarray:
    """Transform by explicit matrix product in float64. Returns a new array.

    Accepts a vector of length n or an (n, k) matrix of k column vectors.
    Sign rows are generated in bounded chunks so large sizes stay within a
    fixed memory footprint.
    """
    x = np.asarray(v, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[:, None]
    n = x.shape[0]
    _check_pow2(n)
    out = np.empty_like(x)
    j = np.arange(n, dtype=np.uint32)
    rows_per_chunk = max(1, min(n, (1 << 22) // n))
    for r0 in range(0, n, rows_per_chunk):
        i = np.arange(r0, min(r0 + rows_per_chunk, n), dtype=np.uint32)
        signs = np.where(_and_parity(i, j), -1.0, 1.0)
        out[r0:r0 + len(i)] = signs @ x
    return out[:, 0] if single else out


def wht_recursive(v: np.ndarray) -> np.ndarray:
    """Divide-and-conquer reference: T(n) = 2 T(n/2) + O(n). Returns new array."""
    x = np.asarray(v, dtype=np.float64)
    n = x.shape[0]
    _check_pow2(n)
    if n == 1:
        return x.copy()
    half = n // 2
    a = wht_recursive(x[:half])
    b = wht_recursive(x[half:])
    return np.concatenate([a + b, a - b])


def _base_blocks_inplace(flat: np.ndarray, base: int) -> None:
    # multiply every row of (num_blocks, base) by H_base through a
    # constant-size scratch; H_base itself fits in cache
    h = hadamard_matrix(base, flat.dtype)
    scratch = np.empty((min(_CHUNK_ROWS, flat.shape[0]), base), dtype=flat.dtype)
    for i in range(0, flat.shape[0], _CHUNK_ROWS):
        chunk = flat[i:i + _CHUNK_ROWS]
        out = scratch[:chunk.shape[0]]
        np.matmul(chunk, h, out=out)
        chunk[:] = out


def _combine_stages_inplace(v: np.ndarray, start: int, n: int) -> None:
    # butterfly spans start, 2*start, ..., n/2 over the last axis;
    # (a, b) <- (a + b, a - b) in three allocation-free passes
    h = start
    while h < n:
        view = v.reshape(v.shape[:-1] + (-1, 2, h))
        a = view[..., 0, :]
        b = view[..., 1, :]
        a += b
        b *= 2.0
        np.subtract(a, b, out=b)
        h <<= 1


def wht_fast(v: np.ndarray, base_size: int = DEFAULT_BASE_SIZE) -> np.ndarray:
    """In-place fast transform of a 1-D float array; returns its argument.

    Equal to ``wht_naive`` up to roundoff at any power-of-two length; the
    high-level partitioning adapts to the length, so no size table is
    required.
    """
    if v.ndim != 1:
        raise ValueError("wht_fast expects a 1-D buffer; see wht_fast_batch")
    _wht_lastaxis(v, base_size)
    return v


def wht_fast_batch(mat: np.ndarray, base_size: int = DEFAULT_BASE_SIZE) -> np.ndarray:
    """Transform every row of a contiguous (m, n) array in place."""
    if mat.ndim != 2:
        raise ValueError("wht_fast_batch expects an (m, n) array")
    _wht_lastaxis(mat, base_size)
    return mat


def _wht_lastaxis(v: np.ndarray, base_size: int) -> None:
    n = v.shape[-1]
    _check_pow2(n)
    if not is_power_of_two(base_size):
        raise ValueError(f"base size {base_size} is not a power of two")
    if not v.flags.c_contiguous:
        raise ValueError("transform buffer must be C-contiguous")
    if not np.issubdtype(v.dtype, np.floating):
        raise ValueError("transform buffer must be a float array")
    base = min(n, base_size)
    _base_blocks_inplace(v.reshape(-1, base), base)
    if base < n:
        _combine_stages_inplace(v, base, n)


@dataclass
class BenchRecord:
    size: int
    fast_ms: float
    naive_ms: float | None
    reps: int


def _median_ms(fn, proto: np.ndarray, reps: int) -> float:
    times = []
    for _ in range(reps):
        buf = proto.copy()
        t0 = time.perf_counter_ns()
        fn(buf)
        times.append(time.perf_counter_ns() - t0)
    return float(np.median(times)) / 1e6


def bench_wht(sizes: list[int], repetitions: int = 5,
              naive_cutoff: int = 1 << 16,
              dtype=np.float32) -> list[BenchRecord]:
    """Median wall-clock per transform for fast and naive paths.

    The naive oracle is skipped above ``naive_cutoff`` where its O(n^2)
    cost dominates without adding information.
    """
    if repetitions < 3:
        raise ValueError("repetitions must be at least 3")
    for s in sizes:
        _check_pow2(s)
    rng = np.random.default_rng(0)
    records = []
    for size in sizes:
        proto = rng.standard_normal(size).astype(dtype)
        wht_fast(proto.copy())  # warm transform caches before timing
        fast_ms = _median_ms(wht_fast, proto, repetitions)
        naive_ms = None
        if size <= naive_cutoff:
            naive_ms = _median_ms(wht_naive, proto, repetitions)
        records.append(BenchRecord(size, fast_ms, naive_ms, repetitions))
    return records
