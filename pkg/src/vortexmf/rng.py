"""Counter-based random streams.

Every random quantity in a simulation is addressed by (seed, purpose,
context, word index) through the Philox4x64 generator, so any single draw
can be regenerated in O(1) without replaying the stream.  Results are
therefore independent of thread count, chunking, and execution order.

Word layout: purpose 0 holds the Brownian increments, one block of
``n * dim`` words per time step (context = step index); purpose 1 holds
initial-condition sampling, a fixed 4 words per particle (context = 0);
purpose 2 is a general-use stream for auxiliary sampling experiments.
"""

import numpy as np
from numpy.random import Philox
from scipy.special import ndtri

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)

PURPOSE_STEP = 0
PURPOSE_INITIAL = 1
PURPOSE_AUX = 2

#: words reserved per particle in the initial-sampling stream
INITIAL_WORDS_PER_PARTICLE = 4


def raw_words(seed, purpose, context, start, count):
    """Return ``count`` raw 64-bit words of the (seed, purpose, context)
    stream beginning at word index ``start``."""
    key = np.array(
        [np.uint64(seed) & _MASK64,
         (np.uint64(purpose) << np.uint64(56)) | np.uint64(context)],
        dtype=np.uint64,
    )
    block, offset = divmod(int(start), 4)
    bg = Philox(key=key, counter=np.array([block, 0, 0, 0], dtype=np.uint64))
    words = bg.random_raw(offset + int(count))
    return words[offset:]


def uniforms(seed, purpose, context, start, count):
    """Uniform doubles on (0, 1), one per 64-bit word."""
    w = raw_words(seed, purpose, context, start, count)
    return (w >> np.uint64(11)) * 2.0 ** -53 + 2.0 ** -54


def step_normals(seed, step_index, n, dim):
    """All Brownian-increment normals for one step, shape (n, dim).

    Row i is exactly what :func:`normal_for` returns for particle i.
    """
    u = uniforms(seed, PURPOSE_STEP, step_index, 0, n * dim)
    return ndtri(u).reshape(n, dim)

def normal_for(seed, step_index, i, dim):
    """The increment of particle ``i`` at ``step_index``, shape (dim,)."""
    u = uniforms(seed, PURPOSE_STEP, step_index, i * dim, dim)
    return ndtri(u)


def initial_uniforms(seed, n):
    """Initial-sampling uniforms, shape (n, INITIAL_WORDS_PER_PARTICLE)."""
    u = uniforms(seed, PURPOSE_INITIAL, 0, 0, n * INITIAL_WORDS_PER_PARTICLE)
    return u.reshape(n, INITIAL_WORDS_PER_PARTICLE)


def aux_uniforms(seed, context, start, count):
    return uniforms(seed, PURPOSE_AUX, context, start, count)
