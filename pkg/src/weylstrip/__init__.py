"""Weyl functions of Dirac and N-wave auxiliary systems, their time evolution,
boundary-jet recovery for defocusing NLS, and closed-form validation."""
from .dirac import DiracPotential, Propagation, SpectralPoint, build_F, build_G, classify, propagate_u
from .disks import PairParam, WeylDisk, WeylEstimate, disk_from_u, estimate_weyl, mobius_apply
from .dnls import (
    BoundaryData,
    CWSolution,
    DiracField,
    EvolutionOperator,
    dnls_residual,
    evolution_consistency,
    evolve_weyl,
    factorization_residual,
    propagate_R,
)
from .estimators import BoundaryJetRecovery, DiracWeylEstimator, NWaveWeylEstimator
from .exceptions import ConfigError, NumericalFailure, WeylStripError
from .jets import BoundaryJets, QuasiClass, Verdict, XJet, jet_adj, jet_d2, jet_mul, quasianalytic_check, t_derivatives, taylor_boundary
from .matkernel import BlockSplit, expm, herm_sqrt
from .nwave import (
    NWaveConfig,
    NWavePotential,
    build_zeta,
    estimate_gw,
    evolve_nwave,
    normalize_gw,
    propagate_Rhat,
    propagate_w_scaled,
    psi_from_phi,
    psi_k,
    weyl_columns,
)
from .pdelab import FieldHistory, StripGrid, integrate_dnls, integrate_nwave, zero_curvature_residual

__version__ = "0.1.0"

__all__ = [
    "BlockSplit",
    "BoundaryData",
    "BoundaryJetRecovery",
    "BoundaryJets",
    "CWSolution",
    "ConfigError",
    "DiracField",
    "DiracPotential",
    "DiracWeylEstimator",
    "EvolutionOperator",
    "FieldHistory",
    "NWaveConfig",
    "NWavePotential",
    "NWaveWeylEstimator",
    "NumericalFailure",
    "PairParam",
    "Propagation",
    "QuasiClass",
    "SpectralPoint",
    "StripGrid",
    "Verdict",
    "WeylDisk",
    "WeylEstimate",
    "WeylStripError",
    "XJet",
    "build_F",
    "build_G",
    "build_zeta",
    "classify",
    "disk_from_u",
    "dnls_residual",
    "estimate_gw",
    "estimate_weyl",
    "evolution_consistency",
    "evolve_nwave",
    "evolve_weyl",
    "expm",
    "factorization_residual",
    "herm_sqrt",
    "integrate_dnls",
    "integrate_nwave",
    "jet_adj",
    "jet_d2",
    "jet_mul",
    "mobius_apply",
    "normalize_gw",
    "propagate_R",
    "propagate_Rhat",
    "propagate_u",
    "propagate_w_scaled",
    "psi_from_phi",
    "psi_k",
    "quasianalytic_check",
    "t_derivatives",
    "taylor_boundary",
    "weyl_columns",
    "zero_curvature_residual",
]
