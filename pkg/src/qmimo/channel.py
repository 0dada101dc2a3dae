"""Clustered mmWave channel realizations and transmit-symbol sampling.

Narrowband Saleh-Valenzuela model: a sum of rank-one cluster/ray
contributions between half-wavelength ULAs at both ends, normalized so
that the ensemble-average squared Frobenius norm equals Nt*Nr. All
generation is a pure function of (parameters, seed).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

__all__ = [
    "SVParams",
    "ChannelRealization",
    "saleh_valenzuela",
    "ula_steering",
    "received_cov",
    "sample_symbols",
    "dump_channel",
    "load_channel",
]


@dataclass(frozen=True)
class SVParams:
    """Saleh-Valenzuela parameters (azimuth-only, ULAs at both ends).

    ``angle_spread_deg`` is the standard deviation of the Laplacian ray
    offsets around each cluster center, in degrees.
    """

    num_clusters: int = 5
    rays_per_cluster: int = 10
    angle_spread_deg: float = 10.0
    array_geometry: str = "ula-half-wavelength"

    def __post_init__(self):
        if self.num_clusters < 1 or self.rays_per_cluster < 1:
            raise ValueError("cluster/ray counts must be positive")
        if not self.angle_spread_deg > 0:
            raise ValueError("angle spread must be positive")


@dataclass(frozen=True)
class ChannelRealization:
    H: np.ndarray
    seed: int
    params: SVParams


def ula_steering(num_antennas: int, phi) -> np.ndarray:
    """Half-wavelength ULA steering vector(s), unit-modulus entries.

    Returns shape ``(num_antennas,)`` for scalar ``phi`` or
    ``(num_antennas, len(phi))`` for a vector of azimuth angles; the
    squared norm per vector equals ``num_antennas``.
    """
    phi = np.asarray(phi, dtype=float)
    n = np.arange(num_antennas)
    if phi.ndim == 0:
        return np.exp(1j * np.pi * n * np.sin(phi))
    return np.exp(1j * np.pi * np.outer(n, np.sin(phi)))


def saleh_valenzuela(nt: int, nr: int, params: SVParams | None = None,
                     seed: int = 0) -> ChannelRealization:
    """Draw one channel realization H (nr x nt).

    Cluster centers are uniform on [0, 2pi) independently at both ends;
    per-ray offsets are Laplacian with the configured spread; ray gains
    are CN(0, 1). The prefactor makes E||H||_F^2 = nt*nr.
    """
    if nt < 1 or nr < 1:
        raise ValueError("antenna counts must be >= 1")
    params = params or SVParams()
    rng = np.random.default_rng(seed)
    ncl, nray = params.num_clusters, params.rays_per_cluster
    num_paths = ncl * nray
    spread = np.deg2rad(params.angle_spread_deg)
    # Laplace scale = std / sqrt(2)
    lap_scale = spread / np.sqrt(2.0)
    centers_rx = rng.uniform(0.0, 2.0 * np.pi, ncl)
    centers_tx = rng.uniform(0.0, 2.0 * np.pi, ncl)
    phi_rx = (centers_rx[:, None] + rng.laplace(0.0, lap_scale, (ncl, nray))).ravel()
    phi_tx = (centers_tx[:, None] + rng.laplace(0.0, lap_scale, (ncl, nray))).ravel()
    alpha = (rng.standard_normal(num_paths)
             + 1j * rng.standard_normal(num_paths)) / np.sqrt(2.0)
    a_rx = ula_steering(nr, phi_rx)                       # nr x L
    a_tx = ula_steering(nt, phi_tx)                       # nt x L
    H = np.sqrt(1.0 / num_paths) * ((a_rx * alpha[None, :]) @ a_tx.conj().T)
    return ChannelRealization(H=H, seed=seed, params=params)


def received_cov(H: np.ndarray, F: np.ndarray, sigma_n2: float) -> np.ndarray:
    """Covariance of the unquantized received signal: H F F^H H^H + sigma_n^2 I."""
    hf = H @ F
    return hf @ hf.conj().T + sigma_n2 * np.eye(H.shape[0])


def sample_symbols(kind: str, ns: int, count: int, seed: int = 0) -> np.ndarray:
    """Draw an (ns x count) symbol matrix with unit per-entry average power.

    ``gaussian`` draws i.i.d. CN(0, 1); ``qam16`` draws from the
    {+-1, +-3} square grid scaled by 1/sqrt(10).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    if kind == "gaussian":
        return (rng.standard_normal((ns, count))
                + 1j * rng.standard_normal((ns, count))) / np.sqrt(2.0)
    if kind == "qam16":
        levels = np.array([-3.0, -1.0, 1.0, 3.0])
        re = levels[rng.integers(0, 4, (ns, count))]
        im = levels[rng.integers(0, 4, (ns, count))]
        return (re + 1j * im) / np.sqrt(10.0)
    raise ValueError(f"unknown symbol kind {kind!r}; expected 'gaussian' or 'qam16'")


def dump_channel(realization: ChannelRealization, path) -> None:
    """Write one realization as JSON with row-major interleaved re/im doubles."""
    H = realization.H
    interleaved = np.empty(2 * H.size)
    flat = H.ravel()  # row-major
    interleaved[0::2] = flat.real
    interleaved[1::2] = flat.imag
    record = {
        "nr": H.shape[0],
        "nt": H.shape[1],
        "seed": realization.seed,
        "params": asdict(realization.params),
        "h_re_im": interleaved.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(record, fh)


def load_channel(path) -> ChannelRealization:
    """Read a realization written by :func:`dump_channel`."""
    with open(path) as fh:
        record = json.load(fh)
    data = np.asarray(record["h_re_im"])
    H = (data[0::2] + 1j * data[1::2]).reshape(record["nr"], record["nt"])
    return ChannelRealization(H=H, seed=record["seed"], params=SVParams(**record["params"]))
