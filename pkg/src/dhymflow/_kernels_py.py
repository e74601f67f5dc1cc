"""Pure NumPy pointwise kernels (fallback twin of the Cython extension).

Both kernel backends work on a packed real layout for per-point Hermitian
matrices.  For a grid with P points and complex dimension n, the pack is a
C-contiguous float64 array of shape (n*n, P) holding, per point,

    n=1: [w11]
    n=2: [w11, w22, Re w12, Im w12]
    n=3: [w11, w22, w33, Re w12, Im w12, Re w13, Im w13, Re w23, Im w23]

``linv`` is the inverse Cholesky factor of the metric (g = L L^H), so the
eigenvalue problem det(w - lam*g) = 0 becomes the ordinary Hermitian
problem for B = linv @ W @ linv^H.  Pass None for the identity metric.

All phase quantities derive from det(B + iI) = prod_j (lam_j + i): its
argument is theta = sum_j arccot(lam_j) whenever theta < pi, its real to
imaginary ratio is cot(theta) on the full admissible range, and
Im/|det| = sin(theta).

Flow kinds are encoded as integers: 0 velocity cot(theta)-cot(theta_0),
1 velocity theta_0-theta, 2 velocity tan(theta_0-theta).
"""

import numpy as np

__all__ = [
    "pack_to_matrices",
    "matrices_to_pack",
    "det_plus_i",
    "velocity_from_entries",
    "spectrum_from_entries",
]


def _split(pack, n):
    """Return (diag_rows, offdiag_complex_rows) views of a pack."""
    diag = [pack[j] for j in range(n)]
    off = []
    for j in range(n * (n - 1) // 2):
        off.append(pack[n + 2 * j] + 1j * pack[n + 2 * j + 1])
    return diag, off


def pack_to_matrices(pack, n):
    """Expand a (n*n, P) pack into a stacked complex (P, n, n) array."""
    P = pack.shape[1]
    W = np.zeros((P, n, n), dtype=np.complex128)
    diag, off = _split(pack, n)
    for j in range(n):
        W[:, j, j] = diag[j]
    k = 0
    for i in range(n):
        for j in range(i + 1, n):
            W[:, i, j] = off[k]
            W[:, j, i] = np.conj(off[k])
            k += 1
    return W


def matrices_to_pack(W):
    """Inverse of pack_to_matrices; W is (..., n, n) Hermitian."""
    n = W.shape[-1]
    W = W.reshape(-1, n, n)
    pack = np.empty((n * n, W.shape[0]), dtype=np.float64)
    for j in range(n):
        pack[j] = W[:, j, j].real
    k = 0
    for i in range(n):
        for j in range(i + 1, n):
            pack[n + 2 * k] = W[:, i, j].real
            pack[n + 2 * k + 1] = W[:, i, j].imag
            k += 1
    return np.ascontiguousarray(pack)


def _to_b_pack(pack, n, linv):
    """Apply the metric transform B = linv W linv^H, staying packed."""
    if linv is None:
        return pack
    W = pack_to_matrices(pack, n)
    B = np.einsum("ab,pbc,dc->pad", linv, W, np.conj(linv), optimize=True)
    return matrices_to_pack(B)


def det_plus_i(pack, n, linv=None):
    """Pointwise (Re, Im) of det(g^{-1} w + i I) for a packed field."""
    b = _to_b_pack(pack, n, linv)
    if n == 1:
        return b[0].copy(), np.ones_like(b[0])
    if n == 2:
        b11, b22 = b[0], b[1]
        off2 = b[2] * b[2] + b[3] * b[3]
        return b11 * b22 - 1.0 - off2, b11 + b22
    b11, b22, b33 = b[0], b[1], b[2]
    b12 = b[3] + 1j * b[4]
    b13 = b[5] + 1j * b[6]
    b23 = b[7] + 1j * b[8]
    a12, a13, a23 = np.abs(b12) ** 2, np.abs(b13) ** 2, np.abs(b23) ** 2
    c1 = b11 + b22 + b33
    c2 = b11 * b22 - a12 + b11 * b33 - a13 + b22 * b33 - a23
    c3 = (
        b11 * b22 * b33
        + 2.0 * (b12 * b23 * np.conj(b13)).real
        - b11 * a23
        - b22 * a13
        - b33 * a12
    )
    return c3 - c1, c2 - 1.0


def velocity_from_entries(pack, n, linv, kind, cot_theta0, theta0,
                          want_fmax=False, out=None):
    """Pointwise flow velocity plus the guard/stability aggregates.

    Returns (vel, min_sin, max_dev, finite, fmax, sup_abs): min_sin is
    the grid minimum of sin(theta) computed as Im/|det| (negative exactly
    when the phase left (0, pi)); max_dev is max|theta_0 - theta| (zero
    for kind 0, where it is not needed); fmax is the grid maximum of the
    largest linearization eigenvalue csc^2(theta)/(1 + min_i lam_i^2),
    computed only when requested (NaN otherwise) since it needs the
    eigenvalues; sup_abs is max|vel|.  ``out`` receives the velocity
    when provided.
    """
    b = _to_b_pack(pack, n, linv)
    re, im = det_plus_i(b, n, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        sin_theta = im / np.hypot(re, im)
    min_sin = float(np.nan_to_num(sin_theta, nan=-1.0).min())
    max_dev = 0.0
    if kind == 0:
        with np.errstate(divide="ignore", invalid="ignore"):
            vel = re / im - cot_theta0
    else:
        dev = theta0 - np.arctan2(im, re)
        max_dev = float(np.abs(dev).max())
        vel = dev if kind == 1 else np.tan(dev)
    finite = bool(np.isfinite(vel).all())
    sup_abs = float(np.abs(vel).max()) if finite else float("nan")
    fmax = float("nan")
    if want_fmax:
        if n == 1:
            fmax = 1.0  # csc^2(arccot lam) = 1 + lam^2 cancels exactly
        else:
            if n == 2:
                lam = _eig_desc_2x2(b)
            else:
                lam = np.linalg.eigvalsh(pack_to_matrices(b, n))[:, ::-1]
            with np.errstate(divide="ignore", invalid="ignore"):
                csc2 = 1.0 + (re / im) ** 2
            closest = (lam**2).min(axis=1)
            fmax = float((csc2 / (1.0 + closest)).max())
    if out is not None:
        np.copyto(out, vel)
        vel = out
    return vel, min_sin, max_dev, finite, fmax, sup_abs


def _eig_desc_2x2(b):
    mean = 0.5 * (b[0] + b[1])
    disc = np.hypot(0.5 * (b[0] - b[1]), np.hypot(b[2], b[3]))
    return np.stack([mean + disc, mean - disc], axis=1)


def spectrum_from_entries(pack, n, linv):
    """Per-point sorted eigenvalues and phase data.

    Returns (lam, theta, cot_theta, csc2_theta, min_sin) with lam of shape
    (P, n) sorted descending and theta = sum_j arccot(lam_j) in (0, n*pi).
    The fallback uses LAPACK's batched Hermitian solver for n=3; the
    compiled twin carries its own closed-form/Jacobi hybrid.
    """
    b = _to_b_pack(pack, n, linv)
    if n == 1:
        lam = b[0].reshape(-1, 1).copy()
    elif n == 2:
        lam = _eig_desc_2x2(b)
    else:
        lam = np.linalg.eigvalsh(pack_to_matrices(b, n))[:, ::-1]
    theta = (0.5 * np.pi - np.arctan(lam)).sum(axis=1)
    re, im = det_plus_i(pack, n, linv)
    hyp = np.hypot(re, im)
    with np.errstate(divide="ignore", invalid="ignore"):
        sin_theta = np.where(hyp > 0, im / hyp, 0.0)
        cot = np.where(im != 0, re / im, np.inf)
    csc2 = 1.0 + cot * cot
    return np.ascontiguousarray(lam), theta, cot, csc2, float(sin_theta.min())
