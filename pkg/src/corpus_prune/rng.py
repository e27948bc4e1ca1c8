"""Deterministic 64-bit PRNG for platform-stable shuffles and sampling.

Dataset splits and within-cluster subsampling must reproduce bit-for-bit
across platforms and Python/numpy versions, so they are driven by an
explicitly specified generator rather than a library default:

* state seeding: splitmix64 (Steele et al.), iterated four times over the
  user seed to fill the xoshiro state;
* stream: xoshiro256** (Blackman & Vigna), 64-bit outputs;
* bounded integers: rejection sampling on the top of the range (draw u64,
  reject values >= 2**64 - (2**64 % n), then reduce mod n), which is
  unbiased for any n;
* shuffles: Fisher-Yates from the last index down, j = randbelow(i + 1);
* sampling without replacement: partial Fisher-Yates taking the first k
  swapped elements.

Any change to these rules is a file-format-level break for split
reproducibility.
"""

from __future__ import annotations

from .errors import ValidationError

_MASK64 = (1 << 64) - 1


def splitmix64(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state once. Returns (new_state, output)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Xoshiro256StarStar:
    """xoshiro256** seeded from a 64-bit integer via splitmix64."""

    def __init__(self, seed: int):
        if not 0 <= seed <= _MASK64:
            raise ValidationError(f"seed must be an unsigned 64-bit integer, got {seed}")
        s = seed
        self._s = []
        for _ in range(4):
            s, out = splitmix64(s)
            self._s.append(out)

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n), unbiased via rejection sampling."""
        if n <= 0:
            raise ValidationError(f"randbelow requires n >= 1, got {n}")
        if n == 1:
            return 0
        bound = _MASK64 + 1 - ((_MASK64 + 1) % n)
        while True:
            u = self.next_u64()
            if u < bound:
                return u % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample(self, items: list, k: int) -> list:
        """k distinct elements via partial Fisher-Yates over a copy."""
        n = len(items)
        if not 0 <= k <= n:
            raise ValidationError(f"cannot sample {k} of {n} items")
        pool = list(items)
        for i in range(k):
            j = i + self.randbelow(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]
