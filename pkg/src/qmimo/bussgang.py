"""Bussgang linearization of per-chain quantization: z = G y + eta.

The quantized receive vector is decomposed into a diagonal gain applied to
the unquantized signal plus a distortion term uncorrelated with it. This
module provides the gain matrix from the distortion-factor table, the
closed-form (diagonal) approximation of the distortion covariance, a
Monte-Carlo estimate of the full distortion covariance, and the arcsine-law
closed forms for sign quantization as an independent one-bit cross-check.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .quantizer import DistortionTable, _unit_quantizer, distortion_table

__all__ = [
    "BussgangModel",
    "bussgang_gain",
    "gain_diagonal",
    "qd_cov_approx",
    "effective_noise_cov",
    "qd_cov_simulated",
    "onebit_arcsine",
    "optimal_onebit_beta",
    "build_model",
]


def gain_diagonal(bits: Optional[Sequence[int]], nr: int,
                  table: Optional[DistortionTable] = None) -> np.ndarray:
    """Per-chain Bussgang gains 1 - gamma(b_i) as a real vector.

    ``bits=None`` means full resolution (all gains 1). Resolutions above
    the table limit fall back to the high-resolution gamma approximation.
    """
    if bits is None:
        return np.ones(nr)
    bits = np.asarray(bits, dtype=int)
    if bits.shape != (nr,):
        raise ValueError(f"bits must have length {nr}, got shape {bits.shape}")
    if np.any(bits < 1):
        raise ValueError("every per-chain resolution must be >= 1")
    if table is None:
        table = distortion_table()
    return np.array([1.0 - table.gamma(int(b)) for b in bits])


def bussgang_gain(bits: Sequence[int], table: Optional[DistortionTable] = None) -> np.ndarray:
    """Diagonal gain matrix G = I - Gamma with Gamma_ii = gamma(b_i)."""
    bits = np.asarray(bits, dtype=int)
    return np.diag(gain_diagonal(bits, bits.size, table))


class QdCovApprox(NamedTuple):
    C_q: np.ndarray
    C_eta: np.ndarray
    C_z: np.ndarray


def qd_cov_approx(G: np.ndarray, C_y: np.ndarray) -> QdCovApprox:
    """Closed-form covariance approximations of the quantization model.

    With ``Gamma = I - G``:

    * ``C_q   = Gamma C_y Gamma + (I - Gamma) diag(C_y) Gamma``
    * ``C_eta = Gamma diag(C_y) (I - Gamma)`` (diagonal; its diagonal
      entries are exact, the approximation drops off-diagonal terms)
    * ``C_z   = [diag(C_y) Gamma + (I - Gamma) C_y] (I - Gamma)``
    """
    C_y = np.asarray(C_y)
    if not np.allclose(C_y, C_y.conj().T, atol=1e-10 * max(1.0, np.abs(C_y).max())):
        raise ValueError("C_y must be Hermitian")
    g = np.real(np.diag(G))
    gamma = 1.0 - g
    d = np.real(np.diag(C_y))
    D = np.diag(d)
    Gm = np.diag(gamma)
    I_Gm = np.diag(g)
    C_q = Gm @ C_y @ Gm + I_Gm @ D @ Gm
    C_eta = np.diag(gamma * d * g)
    C_z = (D @ Gm + I_Gm @ C_y) @ I_Gm
    return QdCovApprox(C_q=C_q, C_eta=C_eta, C_z=C_z)


def effective_noise_cov(G: np.ndarray, H: np.ndarray, F: np.ndarray,
                        sigma_n2: float) -> np.ndarray:
    """Approximate covariance of the effective noise G n + eta.

    ``C_e = G (I - G) diag(H F F^H H^H) + sigma_n^2 G``; diagonal, and
    increasingly accurate with higher ADC resolution.
    """
    g = np.real(np.diag(G))
    hf = H @ F
    d = np.real(np.einsum("ij,ij->i", hf, hf.conj()))
    return np.diag(g * (1.0 - g) * d + sigma_n2 * g)


def _clip_psd(C: np.ndarray) -> np.ndarray:
    """Hermitize and zero out (tiny, sampling-noise) negative eigenvalues."""
    C = 0.5 * (C + C.conj().T)
    w, V = np.linalg.eigh(C)
    if w.min() >= 0:
        return C
    w = np.clip(w, 0.0, None)
    return (V * w) @ V.conj().T


def _simulate_quantized(H: np.ndarray, F: np.ndarray, sigma_n2: float,
                        bits: Optional[Sequence[int]], num_samples: int,
                        seed, table: Optional[DistortionTable] = None):
    """Draw y = H F s + n, quantize per chain, return (y, z, eta).

    Each chain uses the Lloyd-Max quantizer for its resolution, scaled to
    the analytic per-component std sqrt(C_y[i,i]/2). Used by the covariance
    estimators and by statistical tests on the distortion term.
    """
    nr = H.shape[0]
    ns = F.shape[1]
    g = gain_diagonal(bits, nr, table)
    rng = np.random.default_rng(seed)
    s = (rng.standard_normal((ns, num_samples))
         + 1j * rng.standard_normal((ns, num_samples))) / np.sqrt(2.0)
    n = (rng.standard_normal((nr, num_samples))
         + 1j * rng.standard_normal((nr, num_samples))) * np.sqrt(sigma_n2 / 2.0)
    y = H @ F @ s + n
    if bits is None:
        return y, y.copy(), np.zeros_like(y)
    hf = H @ F
    cy_diag = np.real(np.einsum("ij,ij->i", hf, hf.conj())) + sigma_n2
    std = np.sqrt(cy_diag / 2.0)
    z = np.empty_like(y)
    for i in range(nr):
        q = _unit_quantizer(int(bits[i]), "lloyd_max")
        z[i] = std[i] * (q.quantize_real(y[i].real / std[i])
                         + 1j * q.quantize_real(y[i].imag / std[i]))
    eta = z - g[:, None] * y
    return y, z, eta


def qd_cov_simulated(H: np.ndarray, F: np.ndarray, sigma_n2: float,
                     bits: Optional[Sequence[int]], num_samples: int = 10**5,
                     seed=0, num_workers: int = 1,
                     table: Optional[DistortionTable] = None) -> np.ndarray:
    """Monte-Carlo estimate of the full distortion covariance E[eta eta^H].

    Gaussian symbol and noise vectors are drawn, the received vector is
    quantized per chain by the matched Lloyd-Max quantizer, and the sample
    covariance of ``eta = z - G y`` is returned (Hermitian, eigenvalues
    clipped at zero against sampling noise).

    Samples are partitioned into ``num_workers`` chunks with per-chunk
    seed substreams; the result is bit-identical for a fixed
    ``(seed, num_workers)`` pair and the chunks are independent, so they
    can be fanned out across processes.
    """
    if num_samples < 10**4:
        rel_se = 1.0 / np.sqrt(max(num_samples, 1))
        warnings.warn(
            f"num_samples={num_samples} is small; per-entry relative "
            f"standard error on the order of {rel_se:.2%}",
            RuntimeWarning,
            stacklevel=2,
        )
    nr = H.shape[0]
    counts = [num_samples // num_workers] * num_workers
    counts[-1] += num_samples - sum(counts)
    acc = np.zeros((nr, nr), dtype=complex)
    for w, n_w in enumerate(counts):
        if n_w == 0:
            continue
        sub_seed = np.random.SeedSequence([_as_seed_int(seed), w])
        _, _, eta = _simulate_quantized(H, F, sigma_n2, bits, n_w, sub_seed, table)
        acc += eta @ eta.conj().T
    return _clip_psd(acc / num_samples)


def _as_seed_int(seed) -> int:
    if isinstance(seed, (int, np.integer)):
        return int(seed)
    raise TypeError(f"seed must be an integer, got {type(seed)!r}")


def optimal_onebit_beta(sigma_y2: float) -> float:
    """Output power beta of the MSE-optimal one-bit quantizer for variance sigma_y2."""
    return float(2.0 / np.pi * sigma_y2)


class OneBitArcsine(NamedTuple):
    C_zy: np.ndarray
    C_z: np.ndarray
    G: np.ndarray
    C_eta: np.ndarray


def onebit_arcsine(C_y: np.ndarray, beta: float) -> OneBitArcsine:
    """Closed-form second-order statistics of sign quantization.

    For ``z = sqrt(beta/2) (sgn Re y + j sgn Im y)`` with Gaussian ``y``:
    ``C_zy = sqrt(2 beta/pi) K^(-1/2) C_y``,
    ``C_z = (2 beta/pi) arcsin(K^(-1/2) C_y K^(-1/2))``, and
    ``G = sqrt(2 beta/pi) K^(-1/2)`` with ``K = diag(C_y)``. The arcsine
    acts elementwise on the real and imaginary parts of the normalized
    covariance separately (circularly symmetric input).
    """
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    C_y = np.asarray(C_y)
    k = np.real(np.diag(C_y))
    if np.any(k <= 0):
        raise ValueError("C_y must have strictly positive diagonal entries")
    k_inv_sqrt = 1.0 / np.sqrt(k)
    scale = np.sqrt(2.0 * beta / np.pi)
    C_zy = scale * (k_inv_sqrt[:, None] * C_y)
    R = k_inv_sqrt[:, None] * C_y * k_inv_sqrt[None, :]
    asin_R = (np.arcsin(np.clip(R.real, -1.0, 1.0))
              + 1j * np.arcsin(np.clip(R.imag, -1.0, 1.0)))
    C_z = (2.0 * beta / np.pi) * asin_R
    G = np.diag(scale * k_inv_sqrt)
    C_eta = C_z - (2.0 * beta / np.pi) * R
    return OneBitArcsine(C_zy=C_zy, C_z=C_z, G=G, C_eta=C_eta)


@dataclass(frozen=True)
class BussgangModel:
    """Linearized quantization model for one (H, F, bits) operating point.

    Holds the per-chain distortion factors, the received-signal covariance
    and the distortion / effective-noise covariances under the diagonal
    approximation. All arrays are fixed after construction and safe to
    share across Monte-Carlo workers.
    """

    gamma_diag: np.ndarray
    C_y: np.ndarray
    C_eta: np.ndarray
    C_e: np.ndarray

    @property
    def G(self) -> np.ndarray:
        return np.diag(1.0 - self.gamma_diag)


def build_model(H: np.ndarray, F: np.ndarray, sigma_n2: float,
                bits: Optional[Sequence[int]],
                table: Optional[DistortionTable] = None) -> BussgangModel:
    """Assemble the approximate Bussgang model for a channel/precoder pair."""
    nr = H.shape[0]
    g = gain_diagonal(bits, nr, table)
    G = np.diag(g)
    hf = H @ F
    C_y = hf @ hf.conj().T + sigma_n2 * np.eye(nr)
    C_eta = qd_cov_approx(G, C_y).C_eta
    C_e = effective_noise_cov(G, H, F, sigma_n2)
    return BussgangModel(gamma_diag=1.0 - g, C_y=C_y, C_eta=C_eta, C_e=C_e)
