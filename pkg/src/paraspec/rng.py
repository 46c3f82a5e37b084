"""Counter-based seed derivation.

Every random draw in the package is a pure function of
``(master_seed, stream_id, index, draw)``, so results never depend on how
samples are split across workers.

Bit-exact definition (all arithmetic modulo 2**64)::

    splitmix64(x):
        x = x + 0x9E3779B97F4A7C15
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9
        x = (x ^ (x >> 27)) * 0x94D049BB133111EB
        return x ^ (x >> 31)

    mix(master, stream, index) =
        splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index)

    uniform(master, stream, index, draw) =
        (splitmix64(mix(master, stream, index) ^ draw) >> 11) * 2**-53

``uniform`` lies in [0, 1).
"""
import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

# stream ids, one per independent use of randomness
STREAM_FUNDAMENTAL_DOMAIN = 1
STREAM_FRAME = 2
STREAM_CIRCLE = 3
STREAM_TORUS = 4
STREAM_BOOTSTRAP = 5
STREAM_NORMALIZATION = 6


def splitmix64(x):
    """Scalar reference implementation on Python ints."""
    x = (x + _GOLDEN) & _MASK
    x = ((x ^ (x >> 30)) * _M1) & _MASK
    x = ((x ^ (x >> 27)) * _M2) & _MASK
    return x ^ (x >> 31)


def mix(master, stream, index):
    return splitmix64(splitmix64(splitmix64(master & _MASK) ^ (stream & _MASK)) ^ (index & _MASK))


def _splitmix64_array(x):
    x = x + np.uint64(_GOLDEN)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(_M1)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(_M2)
    return x ^ (x >> np.uint64(31))


def mix_array(master, stream, index):
    """Vectorized ``mix`` over an array of indices."""
    index = np.asarray(index, dtype=np.uint64)
    base = np.uint64(splitmix64(splitmix64(master & _MASK) ^ (stream & _MASK)))
    with np.errstate(over="ignore"):
        return _splitmix64_array(base ^ index)


def uniforms(master, stream, index, draw=0):
    """Uniform doubles in [0, 1), one per entry of ``index``."""
    keys = mix_array(master, stream, index)
    with np.errstate(over="ignore"):
        bits = _splitmix64_array(keys ^ np.uint64(draw & _MASK))
    return (bits >> np.uint64(11)).astype(np.float64) * 2.0**-53


def generator(master, stream, index=0):
    """A numpy Generator keyed by the derived seed (for non-hot-path uses)."""
    return np.random.Generator(np.random.Philox(key=mix(master, stream, index)))
