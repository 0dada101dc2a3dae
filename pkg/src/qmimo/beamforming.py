"""Transmit/receive beamforming under quantization: SE, WF baseline, WMMSE.

The achievable-rate lower bound treats the quantization distortion as
Gaussian effective noise. For fixed per-chain resolutions, the precoder
and combiner are obtained by alternating minimization of a weighted MSE
objective whose fixed points coincide with the rate maximizer; the
eigen-mode water-filling solution serves as both the unquantized baseline
and the initializer.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .bussgang import effective_noise_cov, gain_diagonal
from .quantizer import DistortionTable

__all__ = [
    "Beamformers",
    "AltMinReport",
    "spectral_efficiency",
    "waterfilling_power",
    "waterfilling_baseline",
    "update_combiner",
    "update_weight",
    "update_precoder",
    "mse_matrix",
    "altmin_beamforming",
]

_RIDGE = 1e-12


@dataclass(frozen=True)
class Beamformers:
    """Precoder F (Nt x Ns), combiner U (Nr x Ns), WMMSE weight W (Ns x Ns)."""

    F: np.ndarray
    U: np.ndarray
    W: np.ndarray


@dataclass(frozen=True)
class AltMinReport:
    iterations: int
    objective_trace: np.ndarray  # natural-log det W per iteration
    final_se: float              # bits/s/Hz
    converged: bool


def _logdet_hermitian(A: np.ndarray) -> float:
    sign, ld = np.linalg.slogdet(A)
    if sign.real <= 0 or not np.isfinite(ld):
        raise np.linalg.LinAlgError("matrix is not positive definite")
    return float(ld)


def spectral_efficiency(H: np.ndarray, F: np.ndarray, U: np.ndarray,
                        G: np.ndarray, C_e: np.ndarray) -> float:
    """Achievable rate (bits/s/Hz) of the linearized quantized link.

    ``R = log2 det(I + (U^H C_e U)^{-1} U^H G H F F^H H^H G U)``, computed
    as a difference of log-determinants. A singular post-combining noise
    covariance is ridged with 1e-12 I and flagged with a warning.
    """
    T = U.conj().T @ (G @ H @ F)
    A = U.conj().T @ C_e @ U
    A = 0.5 * (A + A.conj().T)
    M = T @ T.conj().T
    try:
        ld_noise = _logdet_hermitian(A)
    except np.linalg.LinAlgError:
        warnings.warn(
            "singular post-combining noise covariance; regularizing with 1e-12 I",
            RuntimeWarning,
            stacklevel=2,
        )
        A = A + _RIDGE * np.eye(A.shape[0])
        ld_noise = _logdet_hermitian(A)
    ld_total = _logdet_hermitian(A + M)
    return max((ld_total - ld_noise) / np.log(2.0), 0.0)


def waterfilling_power(gains: np.ndarray, pt: float) -> np.ndarray:
    """Water-filling power allocation over parallel channels.

    ``gains`` are channel-to-noise power ratios; returns per-channel
    powers summing to ``pt`` whenever at least one channel is active.
    Channels with zero (or numerically negligible) gain get zero power.
    """
    gains = np.asarray(gains, dtype=float)
    p = np.zeros_like(gains)
    active = gains > gains.max() * 1e-14 if gains.size and gains.max() > 0 else np.zeros_like(gains, bool)
    if not np.any(active):
        return p
    idx = np.where(active)[0]
    order = idx[np.argsort(-gains[idx])]
    inv = 1.0 / gains[order]
    for k in range(order.size, 0, -1):
        level = (pt + np.sum(inv[:k])) / k
        if level > inv[k - 1]:
            p[order[:k]] = level - inv[:k]
            break
    return p


def waterfilling_baseline(H: np.ndarray, pt: float, sigma_n2: float,
                          ns: int) -> Beamformers:
    """Eigen-mode transmission with water-filling power allocation.

    The combiner takes the ``ns`` leading left singular vectors, the
    precoder the leading right singular vectors scaled by the water-filled
    powers on the singular-value SNRs. Streams beyond the channel rank
    receive zero power.
    """
    if ns > min(H.shape):
        raise ValueError(f"ns={ns} exceeds min(Nt, Nr)={min(H.shape)}")
    Z, sv, Vh = np.linalg.svd(H, full_matrices=False)
    U = Z[:, :ns]
    V = Vh.conj().T[:, :ns]
    p = waterfilling_power(sv[:ns] ** 2 / sigma_n2, pt)
    F = V * np.sqrt(p)[None, :]
    return Beamformers(F=F, U=U, W=np.eye(ns, dtype=complex))


def _solve_flagged(A: np.ndarray, B: np.ndarray, what: str) -> np.ndarray:
    try:
        X = np.linalg.solve(A, B)
        if np.all(np.isfinite(X)):
            return X
    except np.linalg.LinAlgError:
        pass
    warnings.warn(f"singular {what}; regularizing with 1e-12 I",
                  RuntimeWarning, stacklevel=3)
    return np.linalg.solve(A + _RIDGE * np.eye(A.shape[0]), B)


def update_combiner(H: np.ndarray, F: np.ndarray, G: np.ndarray,
                    C_e: np.ndarray) -> np.ndarray:
    """MMSE combiner U = (G H F F^H H^H G + C_e)^{-1} G H F."""
    GHF = G @ H @ F
    A = GHF @ GHF.conj().T + C_e
    return _solve_flagged(0.5 * (A + A.conj().T), GHF, "combiner system matrix")


def update_weight(H: np.ndarray, F: np.ndarray, G: np.ndarray,
                  C_e: np.ndarray) -> np.ndarray:
    """WMMSE weight W = I + F^H H^H G C_e^{-1} G H F."""
    GHF = G @ H @ F
    W = np.eye(F.shape[1]) + GHF.conj().T @ _solve_flagged(C_e, GHF, "noise covariance")
    return 0.5 * (W + W.conj().T)


def mse_matrix(H: np.ndarray, F: np.ndarray, U: np.ndarray, G: np.ndarray,
               C_e: np.ndarray) -> np.ndarray:
    """MSE matrix of the post-combined streams (Hermitian by construction)."""
    GHF = G @ H @ F
    A = GHF @ GHF.conj().T + C_e
    E = (U.conj().T @ A @ U + np.eye(F.shape[1])
         - U.conj().T @ GHF - GHF.conj().T @ U)
    return 0.5 * (E + E.conj().T)


def update_precoder(H: np.ndarray, G: np.ndarray, U: np.ndarray,
                    W: np.ndarray, pt: float) -> np.ndarray:
    """Power-constrained precoder update of the weighted-MSE objective.

    ``F(mu) = (J + mu I)^{-1} H^H G U W`` with
    ``J = H^H (G U W U^H + diag(U W U^H)(I - G)) G H``; the diagonal term
    accounts for the precoder dependence of the distortion covariance.
    ``mu = 0`` when the unconstrained solution (minimum-norm if J is
    singular) is feasible, otherwise bisection on
    ``[0, ||H^H G U W||_F / sqrt(pt)]`` enforces ||F||_F^2 = pt.
    """
    if not pt > 0:
        raise ValueError(f"pt must be positive, got {pt}")
    nr = H.shape[0]
    UWU = U @ W @ U.conj().T
    J = H.conj().T @ (G @ UWU + np.diag(np.real(np.diag(UWU))) @ (np.eye(nr) - G)) @ G @ H
    J = 0.5 * (J + J.conj().T)
    rhs = H.conj().T @ G @ U @ W
    # minimum-norm solution handles rank-deficient J (e.g. Nt > Nr)
    F0 = np.linalg.lstsq(J, rhs, rcond=None)[0]
    if np.linalg.norm(F0) ** 2 <= pt * (1.0 + 1e-9):
        return F0
    eye = np.eye(J.shape[0])
    lo, hi = 0.0, float(np.linalg.norm(rhs)) / np.sqrt(pt)
    F = F0
    for _ in range(200):
        mu = 0.5 * (lo + hi)
        F = np.linalg.solve(J + mu * eye, rhs)
        power = np.linalg.norm(F) ** 2
        if abs(power - pt) <= 1e-8 * pt:
            break
        if power > pt:
            lo = mu
        else:
            hi = mu
    return F


def altmin_beamforming(H: np.ndarray, bits: Optional[Sequence[int]], pt: float,
                       sigma_n2: float, ns: int, eps: float = 1e-4,
                       max_iter: int = 500,
                       table: Optional[DistortionTable] = None,
                       ) -> tuple[Beamformers, AltMinReport]:
    """Alternating WMMSE beamforming for fixed per-chain ADC resolutions.

    Starts from the water-filling precoder with unit weight, then cycles
    combiner, weight and precoder updates (the effective-noise covariance
    is recomputed from the current precoder each cycle) until the change
    of the natural-log objective log det W drops below ``eps`` or
    ``max_iter`` is hit. ``bits=None`` runs the full-resolution model.

    Returns the final beamformers (combiner re-derived at the final
    precoder) and a report with the objective trace and the SE in
    bits/s/Hz.
    """
    nr = H.shape[0]
    g = gain_diagonal(bits, nr, table)
    G = np.diag(g)
    F = waterfilling_baseline(H, pt, sigma_n2, ns).F
    W = np.eye(ns, dtype=complex)
    trace: list[float] = []
    converged = False
    for _ in range(max_iter):
        C_e = effective_noise_cov(G, H, F, sigma_n2)
        U = update_combiner(H, F, G, C_e)
        W = update_weight(H, F, G, C_e)
        trace.append(_logdet_hermitian(W))
        F = update_precoder(H, G, U, W, pt)
        if len(trace) >= 2 and abs(trace[-1] - trace[-2]) <= eps:
            converged = True
            break
    C_e = effective_noise_cov(G, H, F, sigma_n2)
    U = update_combiner(H, F, G, C_e)
    se = spectral_efficiency(H, F, U, G, C_e)
    report = AltMinReport(
        iterations=len(trace),
        objective_trace=np.asarray(trace),
        final_se=se,
        converged=converged,
    )
    return Beamformers(F=F, U=U, W=W), report
