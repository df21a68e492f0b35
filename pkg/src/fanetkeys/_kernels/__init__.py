"""Hot numeric kernels with a compiled core and a numpy fallback.

The Cython extension ``_fast`` is picked at import time when available;
otherwise (or when ``FANETKEYS_PURE=1`` is set) the numpy implementation in
``pure`` is used. Both expose the same functions and are kept
result-identical; see tests/test_kernels.py and benchmarks/bench_kernels.py.

Graph kernels take CSR adjacency (``indptr``, ``indices`` as int32, neighbor
lists sorted ascending) as produced by :func:`graph_csr`.
"""

import os

import numpy as np

from . import pure

if os.environ.get("FANETKEYS_PURE", "") not in ("", "0"):
    _impl = pure
else:
    try:
        from . import _fast as _impl
    except ImportError:
        _impl = pure

using_compiled = _impl is not pure

contact_pairs_idx = _impl.contact_pairs_idx
component_labels = _impl.component_labels
all_pairs_hops = _impl.all_pairs_hops
bfs_tree = _impl.bfs_tree
path_expand_sums = _impl.path_expand_sums


def graph_csr(adj: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """CSR (indptr, indices) of a dense boolean adjacency matrix.

    ``np.nonzero`` walks row-major, so each neighbor list comes out sorted,
    which the BFS tie-breaking relies on.
    """
    n = adj.shape[0]
    rows, cols = np.nonzero(adj)
    indptr = np.zeros(n + 1, dtype=np.int32)
    indptr[1:] = np.cumsum(np.bincount(rows, minlength=n))
    return indptr, cols.astype(np.int32)
