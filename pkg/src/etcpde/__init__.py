"""Event-triggered output-feedback control workbench for 1-D parabolic PDEs.

Pipeline: modal reduction of the plant (galerkin) -> nonlinearity
identification with a Levenberg–Marquardt-trained three-layer network (mnn)
-> switching event-triggered gain synthesis by matrix-inequality
feasibility/optimization (lmi) -> closed-loop validation on the reduced
model and the full PDE (etc_sim, pde_sim), orchestrated by a config-driven
CLI (cli).
"""
from __future__ import annotations

__version__ = "0.1.0"

from . import errors  # noqa: F401
from .galerkin import (  # noqa: F401
    ModalBasis,
    SlowSystem,
    SturmLiouvilleSpec,
    analytic_dirichlet_basis,
    assemble_slow_system,
    eigensolve_sturm_liouville,
    project,
    reconstruct_slow_state,
    spectral_gap,
)
