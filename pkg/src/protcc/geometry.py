"""Small vectorized geometry kernels shared by features, frames and fixtures."""

import numpy as np

EPS = 1e-8


def unit(v, eps=EPS):
    """Normalize along the last axis; vectors shorter than ``eps`` map to zero."""
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    safe = np.where(n < eps, 1.0, n)
    return np.where(n < eps, 0.0, v / safe)


def dihedral(p0, p1, p2, p3):
    """Signed torsion angle (radians) of the chain p0-p1-p2-p3, broadcast over leading axes."""
    p0, p1, p2, p3 = (np.asarray(p, dtype=float) for p in (p0, p1, p2, p3))
    b0 = p0 - p1
    b1 = p2 - p1
    b2 = p3 - p2
    b1n = unit(b1)
    v = b0 - np.sum(b0 * b1n, axis=-1, keepdims=True) * b1n
    w = b2 - np.sum(b2 * b1n, axis=-1, keepdims=True) * b1n
    x = np.sum(v * w, axis=-1)
    y = np.sum(np.cross(b1n, v) * w, axis=-1)
    return np.arctan2(y, x)


def bond_angle(a, b, c):
    """Angle at vertex ``b`` (radians) between rays b->a and b->c."""
    u = unit(np.asarray(a, dtype=float) - b)
    w = unit(np.asarray(c, dtype=float) - b)
    cos = np.clip(np.sum(u * w, axis=-1), -1.0, 1.0)
    sin = np.linalg.norm(np.cross(u, w), axis=-1)
    return np.arctan2(sin, cos)


def place_atom(a, b, c, length, angle, torsion):
    """Position d such that |cd| = length, angle(b, c, d) = angle, dihedral(a, b, c, d) = torsion."""
    bc = unit(c - b)
    n = unit(np.cross(b - a, bc))
    m = np.cross(n, bc)
    d2 = np.array([-length * np.cos(angle),
                   length * np.sin(angle) * np.cos(torsion),
                   length * np.sin(angle) * np.sin(torsion)])
    return c + d2[0] * bc + d2[1] * m + d2[2] * n


def random_rotation(rng):
    """Haar-uniform rotation matrix (det +1)."""
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def sorted_eigh(cov):
    """Eigen-decomposition of a symmetric 3x3 matrix, eigenvalues descending.

    Returns ``(values, vectors)`` with eigenvectors as rows.
    """
    w, v = np.linalg.eigh(cov)
    order = np.argsort(-w, kind="stable")
    w = np.clip(w[order], 0.0, None)
    return w, v[:, order].T
