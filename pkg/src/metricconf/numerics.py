"""Deterministic random streams and the distribution kernels used by the tests.

Random streams
--------------
Every resample iteration owns its own stream, addressed by ``(seed, stream_index)``.
The generator is xoshiro256** (Blackman & Vigna, 2018).  Its 256-bit state is
filled by splitmix64 as follows (all arithmetic modulo 2**64)::

    mix(z):  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
             z = (z ^ (z >> 27)) * 0x94D049BB133111EB
             return z ^ (z >> 31)

    splitmix state  = mix(seed) + stream_index
    repeat 4 times:   state += 0x9E3779B97F4A7C15;  word = mix(state)

and the four words become ``s0, s1, s2, s3`` in that order.  Each draw is::

    result = rotl(s1 * 5, 7) * 9
    t = s1 << 17
    s2 ^= s0; s3 ^= s1; s1 ^= s2; s0 ^= s3; s2 ^= t; s3 = rotl(s3, 45)

Derived draws:

* ``uniform_index(n)``: draw ``r``; reject while ``r >= 2**64 - (2**64 mod n)``;
  return ``r mod n``.
* ``fair_coin()``: draw ``r``; return the top bit ``r >> 63 == 1``.

:class:`RngStream` is the scalar reference; :class:`StreamBatch` advances many
consecutive streams in lock-step with numpy and yields identical values.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


def _initial_state(seed: int, stream_index: int) -> tuple[int, int, int, int]:
    state = (_mix64(seed & MASK64) + stream_index) & MASK64
    words = []
    for _ in range(4):
        state = (state + GOLDEN_GAMMA) & MASK64
        words.append(_mix64(state))
    return tuple(words)


def _check_seed(seed: int, stream_index: int) -> None:
    if not 0 <= seed <= MASK64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    if not 0 <= stream_index <= MASK64:
        raise ValueError(f"stream_index must be a 64-bit unsigned integer, got {stream_index}")


class RngStream:
    """A single xoshiro256** stream identified by ``(seed, stream_index)``."""

    def __init__(self, seed: int, stream_index: int = 0):
        _check_seed(seed, stream_index)
        self.seed = seed
        self.stream_index = stream_index
        self._s = list(_initial_state(seed, stream_index))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_index={self.stream_index})"

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & MASK64, 7) * 9) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def uniform_index(self, n: int) -> int:
        if n < 1:
            raise ValueError(f"uniform_index needs n >= 1, got {n}")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            r = self.next_u64()
            if r < limit:
                return r % n

    def fair_coin(self) -> bool:
        return (self.next_u64() >> 63) == 1


def uniform_index(stream: RngStream, n: int) -> int:
    return stream.uniform_index(n)


def fair_coin(stream: RngStream) -> bool:
    return stream.fair_coin()


def derive_seed(seed: int, index: int) -> int:
    """First output of stream ``(seed, index)``; used to give sub-tasks their own seed."""
    return RngStream(seed, index).next_u64()


_U = np.uint64


def _rotl_arr(x: np.ndarray, k: int) -> np.ndarray:
    return (x << _U(k)) | (x >> _U(64 - k))


class StreamBatch:
    """Streams ``start .. start+count-1`` of one seed, advanced together.

    Every method returns one value per stream, in stream order.  Draw for draw
    the values match :class:`RngStream` exactly.
    """

    def __init__(self, seed: int, start: int, count: int):
        _check_seed(seed, start)
        if count < 0 or start + count - 1 > MASK64:
            raise ValueError("stream range out of bounds")
        self.seed = seed
        self.start = start
        self.count = count
        base = (_mix64(seed) + start) & MASK64
        idx = np.arange(count, dtype=np.uint64)
        with np.errstate(over="ignore"):
            state = np.full(count, base, dtype=np.uint64) + idx
            words = []
            for _ in range(4):
                state = state + _U(GOLDEN_GAMMA)
                words.append(self._mix(state))
        self._s = words

    @staticmethod
    def _mix(z: np.ndarray) -> np.ndarray:
        z = (z ^ (z >> _U(30))) * _U(_MIX1)
        z = (z ^ (z >> _U(27))) * _U(_MIX2)
        return z ^ (z >> _U(31))

    def next_u64(self, where: np.ndarray | None = None) -> np.ndarray:
        """Advance every stream (or only those selected by index array ``where``)."""
        s0, s1, s2, s3 = self._s
        if where is not None:
            s0, s1, s2, s3 = s0[where], s1[where], s2[where], s3[where]
        with np.errstate(over="ignore"):
            result = _rotl_arr(s1 * _U(5), 7) * _U(9)
            t = s1 << _U(17)
            s2 = s2 ^ s0
            s3 = s3 ^ s1
            s1 = s1 ^ s2
            s0 = s0 ^ s3
            s2 = s2 ^ t
            s3 = _rotl_arr(s3, 45)
        if where is None:
            self._s = [s0, s1, s2, s3]
        else:
            for full, part in zip(self._s, (s0, s1, s2, s3)):
                full[where] = part
        return result

    def uniform_index(self, n: int) -> np.ndarray:
        if n < 1:
            raise ValueError(f"uniform_index needs n >= 1, got {n}")
        limit = (1 << 64) - ((1 << 64) % n)
        r = self.next_u64()
        out = np.empty(self.count, dtype=np.int64)
        if limit > MASK64:
            # n is a power of two: nothing to reject
            out[:] = r % _U(n)
            return out
        bad = np.flatnonzero(r >= _U(limit))
        out[:] = r % _U(n)
        while bad.size:
            redraw = self.next_u64(bad)
            out[bad] = redraw % _U(n)
            bad = bad[redraw >= _U(limit)]
        return out

    def fair_coin(self) -> np.ndarray:
        return (self.next_u64() >> _U(63)) == _U(1)


# ---------------------------------------------------------------------------
# distribution kernels

# AS241 (PPND16), Wichura 1988
_A = (3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
      1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
      3.3430575583588128105e4, 2.5090809287301226727e3)
_B = (1.0, 4.2313330701600911252e1, 6.8718700749205790830e2, 5.3941960214247511077e3,
      2.1213794301586595867e4, 3.9307895800092710610e4, 2.8729085735721942674e4,
      5.2264952788528545610e3)
_C = (1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
      3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4)
_D = (1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
      1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
      1.05075007164441684324e-9)
_E = (6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
      2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7)
_F = (1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
      7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
      2.04426310338993978564e-15)


def _poly(coefs, x: float) -> float:
    acc = 0.0
    for c in reversed(coefs):
        acc = acc * x + c
    return acc


def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"normal_quantile needs 0 < p < 1, got {p}")
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        return q * _poly(_A, r) / _poly(_B, r)
    r = math.sqrt(-math.log(min(p, 1.0 - p)))
    if r <= 5.0:
        r -= 1.6
        val = _poly(_C, r) / _poly(_D, r)
    else:
        r -= 5.0
        val = _poly(_E, r) / _poly(_F, r)
    return -val if q < 0 else val


def normal_sf(z: float) -> float:
    """Upper tail P(Z > z) of the standard normal."""
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def student_t_sf(t: float, df: float) -> float:
    """Upper tail P(T > t) of Student's t with ``df`` degrees of freedom."""
    if not df > 0:
        raise ValueError(f"degrees of freedom must be positive, got {df}")
    if t == 0:
        return 0.5
    # P(|T| > |t|) = I_{df/(df+t^2)}(df/2, 1/2)
    x = df / (df + t * t)
    tail = 0.5 * float(special.betainc(0.5 * df, 0.5, x))
    return tail if t > 0 else 1.0 - tail
