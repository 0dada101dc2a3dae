"""Spectral/energy-efficiency toolkit for MIMO links with low-resolution ADCs.

Submodules
----------
quantizer
    Lloyd-Max and optimal uniform scalar quantizers, distortion factors.
bussgang
    Linearized quantization model: gains and distortion covariances.
channel
    Saleh-Valenzuela mmWave channel realizations and symbol sampling.
beamforming
    Rate bound, water-filling baseline, alternating WMMSE design.
bitalloc
    Greedy/pair-swap/exhaustive per-chain bit allocation.
evaluation
    Power/EE model and the seeded Monte-Carlo experiment harness.
cli
    JSON-config batch front end (``qmimo run``).
"""

from .beamforming import (
    AltMinReport,
    Beamformers,
    altmin_beamforming,
    spectral_efficiency,
    waterfilling_baseline,
)
from .bitalloc import BitAllocation, exhaustive_search, gpos_bfba, greedy_init
from .bussgang import (
    BussgangModel,
    bussgang_gain,
    effective_noise_cov,
    onebit_arcsine,
    qd_cov_approx,
    qd_cov_simulated,
)
from .channel import ChannelRealization, SVParams, received_cov, saleh_valenzuela, sample_symbols
from .evaluation import (
    ExperimentResult,
    PointConfig,
    PowerModel,
    energy_efficiency,
    run_experiment,
    se_simulated,
    total_power,
)
from .quantizer import (
    DistortionTable,
    ScalarQuantizer,
    distortion_table,
    estimate_distortion_factor,
    gamma_approx,
    lloyd_max_design,
    optimal_uniform_design,
    quantize_complex,
    scale_to_variance,
)

__version__ = "0.1.0"
