"""Matrix-inequality synthesis of switching output-feedback gains."""
from .blocks import (
    assemble_bmi_phi,
    assemble_corollary1,
    assemble_hinf,
    assemble_hinf_lmi,
    assemble_lmi_phi_tilde,
    assemble_xi_tilde,
    solver_corner,
    v3_matrix,
)
from .io import load_certificate, save_certificate
from .sdp import ConstraintSpec, SdpResult, VariableLayout, sdp_solve
from .synthesis import (
    ControllerCertificate,
    SynthesisParams,
    VerificationEntry,
    VerificationReport,
    certify_gain,
    optimize_gamma,
    synthesize_gain,
    ultimate_bound,
    verify_certificate,
)
from .types import BlockLayout, SymBlockMatrix

__all__ = [
    "assemble_bmi_phi",
    "assemble_corollary1",
    "assemble_hinf",
    "assemble_hinf_lmi",
    "assemble_lmi_phi_tilde",
    "assemble_xi_tilde",
    "solver_corner",
    "v3_matrix",
    "load_certificate",
    "save_certificate",
    "ConstraintSpec",
    "SdpResult",
    "VariableLayout",
    "sdp_solve",
    "ControllerCertificate",
    "SynthesisParams",
    "VerificationEntry",
    "VerificationReport",
    "certify_gain",
    "optimize_gamma",
    "synthesize_gain",
    "ultimate_bound",
    "verify_certificate",
    "BlockLayout",
    "SymBlockMatrix",
]
