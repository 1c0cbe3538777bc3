from typing import List

import numpy as np


def left_padding_mask(lengths: List[int], size: int) -> np.ndarray:
    """

    Returns a boolean mask of size [len(lengths) x size] for windows that are
    left padded to size, such that for each row i the first
    size - lengths[i] entries are marked as padding.

    :param lengths: number of real values per window
    :param size: window size
    :return: mask array, True marks padding

    >>> left_padding_mask([2, 4, 1, 3], 4).tolist() # doctest: +NORMALIZE_WHITESPACE
    [[True, True, False, False],
    [False, False, False, False],
    [True, True, True, False],
    [True, False, False, False]]

    """
    lengths = np.minimum(np.asarray(lengths, dtype=np.int64), size)
    if np.any(lengths < 0):
        raise ValueError(f"lengths must be non-negative, but got {lengths.tolist()}")
    positions = np.arange(size)[None, :]
    return positions < (size - lengths)[:, None]
