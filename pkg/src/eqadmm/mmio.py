"""MatrixMarket and plain-text vector I/O."""

import os

import numpy as np
import scipy.io
import scipy.sparse


def read_matrix(path) -> np.ndarray:
    """Read a real MatrixMarket file (coordinate or array) into a dense array."""
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii", errors="replace")
    if not header.lower().startswith("%%matrixmarket matrix"):
        raise ValueError(f"{path}: not a MatrixMarket matrix file")
    M = scipy.io.mmread(path)
    if scipy.sparse.issparse(M):
        M = M.toarray()
    M = np.asarray(M)
    if np.iscomplexobj(M):
        raise ValueError(f"{path}: complex matrices are not supported")
    return M.astype(float)


def write_matrix(path, A, fmt="array") -> None:
    """Write ``A`` as MatrixMarket; ``fmt`` is ``"array"`` or ``"coordinate"``."""
    A = np.asarray(A, dtype=float)
    if fmt == "coordinate":
        A = scipy.sparse.coo_matrix(A)
    elif fmt != "array":
        raise ValueError(f"unknown MatrixMarket format {fmt!r}")
    path = os.fspath(path)
    # mmwrite appends .mtx to bare names
    scipy.io.mmwrite(path, A, precision=17)
    if not path.endswith(".mtx") and os.path.exists(path + ".mtx"):
        os.replace(path + ".mtx", path)


def read_vector(path) -> np.ndarray:
    return np.atleast_1d(np.loadtxt(path, dtype=float))


def write_vector(path, v) -> None:
    np.savetxt(path, np.asarray(v, dtype=float).ravel(), fmt="%.17g")
