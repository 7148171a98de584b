"""Matrix Market and headerless CSV readers/writers for dense matrices.

Values are written with 17 significant digits so a write/read round trip
reproduces every float64 bit for bit.
"""

import os

import numpy as np
import scipy.io
import scipy.sparse

from .numcore import as_matrix

PRECISION = 17


def read_matrix_market(path):
    M = scipy.io.mmread(path)
    if scipy.sparse.issparse(M):
        M = M.toarray()
    return as_matrix(M)


def write_matrix_market(path, A, layout="array"):
    """Write ``A`` as a Matrix Market file in ``array`` or ``coordinate`` layout."""
    A = as_matrix(A)
    if layout == "coordinate":
        target = scipy.sparse.coo_matrix(A)
    elif layout == "array":
        target = np.asarray(A)
    else:
        raise ValueError(f"unknown Matrix Market layout {layout!r}")
    # a file handle stops mmwrite from appending ".mtx" to other extensions
    with open(path, "wb") as fh:
        scipy.io.mmwrite(fh, target, precision=PRECISION, symmetry="general")


def read_csv(path):
    return as_matrix(np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64))


def write_csv(path, A):
    A = np.asarray(A, dtype=np.float64)
    if A.ndim == 1:
        A = A.reshape(-1, 1)
    np.savetxt(path, A, delimiter=",", fmt=f"%.{PRECISION}g")


def read_matrix(path):
    """Dispatch on extension: ``.mtx``/``.mm`` are Matrix Market, anything else CSV."""
    ext = os.path.splitext(str(path))[1].lower()
    if ext in (".mtx", ".mm"):
        return read_matrix_market(path)
    return read_csv(path)


def write_matrix(path, A):
    ext = os.path.splitext(str(path))[1].lower()
    if ext in (".mtx", ".mm"):
        write_matrix_market(path, A)
    else:
        write_csv(path, A)
