"""Blind source separation of real signals by joint cumulant diagonalization.

Whitens the channels, estimates the full set of fourth-order cumulant
matrices, and finds the rotation that best jointly diagonalizes them with
Givens sweeps. Entirely deterministic: eigendecomposition ordering, sweep
order, and sign fixing are all fixed conventions.
"""
from __future__ import annotations

import numpy as np


def jade(x: np.ndarray, n_sources: int | None = None, sweep_tol: float = 1e-8,
         max_sweeps: int = 100) -> np.ndarray:
    """Estimate an unmixing matrix B so that ``B @ x`` separates sources.

    Args:
        x: (n_channels, n_samples) real observations.
        n_sources: number of sources to extract (defaults to n_channels).
        sweep_tol: Givens rotation angle threshold for convergence.
        max_sweeps: Givens sweep budget.
    Returns:
        (n_sources, n_channels) unmixing matrix, rows ordered by source
        energy (most energetic first) with a fixed sign convention.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"observations must be 2-D, got rank {x.ndim}")
    n, t = x.shape
    if t < n:
        raise ValueError(f"need at least as many samples as channels, got {x.shape}")
    m = n if n_sources is None else int(n_sources)
    if not 1 <= m <= n:
        raise ValueError(f"cannot extract {m} sources from {n} channels")

    x = x - x.mean(axis=1, keepdims=True)

    # Whitening onto the m most energetic principal directions.
    cov = (x @ x.T) / t
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:m]
    scales = np.sqrt(np.maximum(eigvals[order], np.finfo(np.float64).tiny))
    whitener = eigvecs[:, order].T / scales[:, None]
    z = whitener @ x  # (m, t), unit variance, uncorrelated

    # Fourth-order cumulant matrices, m(m+1)/2 of them, stacked.
    zt = z.T  # (t, m)
    nbcm = m * (m + 1) // 2
    cm = np.empty((nbcm, m, m))
    eye = np.eye(m)
    idx = 0
    for i in range(m):
        zi = zt[:, i]
        cm[idx] = ((zi * zi)[:, None] * zt).T @ zt / t - eye \
            - 2.0 * np.outer(eye[i], eye[i])
        idx += 1
        for j in range(i):
            zj = zt[:, j]
            cm[idx] = np.sqrt(2.0) * (((zi * zj)[:, None] * zt).T @ zt / t
                                      - np.outer(eye[i], eye[j])
                                      - np.outer(eye[j], eye[i]))
            idx += 1

    # Joint diagonalization by Givens sweeps.
    v = np.eye(m)
    for _ in range(max_sweeps):
        rotated = False
        for p in range(m - 1):
            for q in range(p + 1, m):
                g0 = cm[:, p, p] - cm[:, q, q]
                g1 = cm[:, p, q] + cm[:, q, p]
                ton = g0 @ g0 - g1 @ g1
                toff = 2.0 * (g0 @ g1)
                theta = 0.5 * np.arctan2(toff, ton + np.hypot(ton, toff))
                if abs(theta) <= sweep_tol:
                    continue
                rotated = True
                c, s = np.cos(theta), np.sin(theta)
                rp, rq = cm[:, p, :].copy(), cm[:, q, :].copy()
                cm[:, p, :] = c * rp + s * rq
                cm[:, q, :] = -s * rp + c * rq
                cp, cq = cm[:, :, p].copy(), cm[:, :, q].copy()
                cm[:, :, p] = c * cp + s * cq
                cm[:, :, q] = -s * cp + c * cq
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp + s * vq
                v[:, q] = -s * vp + c * vq
        if not rotated:
            break

    b = v.T @ whitener

    # Order rows by the energy of the corresponding mixing columns and fix
    # signs so each row's first entry is non-negative.
    mixing = np.linalg.pinv(b)
    keys = np.argsort((mixing * mixing).sum(axis=0))[::-1]
    b = b[keys]
    signs = np.sign(np.sign(b[:, 0]) + 0.1)
    return signs[:, None] * b
