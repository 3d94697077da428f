"""
Seeded random streams.

One generator family everywhere: numpy's counter-based Philox bit generator.
Replication streams are derived from (master seed, index), so a replication's
draws do not depend on which worker runs it or in what order.
"""

from typing import Optional

import numpy as np


def make_rng(seed: Optional[int] = None) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def derive_seed(master_seed: int, index: int) -> int:
    """Integer seed of stream `index` under `master_seed`."""
    state = np.random.SeedSequence([int(master_seed), int(index)]).generate_state(2, np.uint32)
    return int(state[0]) << 32 | int(state[1])
