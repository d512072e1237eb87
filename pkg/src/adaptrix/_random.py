import zlib

import numpy as np


def substream(seed, name):
    """Return a generator for the named sub-stream of ``seed``.

    Every consumer of randomness (dataset, kmeans, umap, folds, ...) draws
    from its own stream so that adding draws in one stage never shifts
    another stage's numbers.
    """
    return np.random.default_rng(
        np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(name.encode())])
    )
