"""quorumvault: a five-institution threshold vault.

User data lives as threshold secret shares spread across independent
institution nodes; explicit access structures govern every reveal, and
aggregate statistics on private survey data are computed with
honest-majority secure multiparty computation so individual answers are
never reconstructed.
"""

from .fields import CommitmentGroup, Field, FieldParams, DEFAULT_PRIME, default_params, small_test_params
from .rng import SeedStream
from .shamir import Share, lagrange_coeffs, reconstruct, recover_share, reshare, share

__all__ = [
    "CommitmentGroup",
    "DEFAULT_PRIME",
    "Field",
    "FieldParams",
    "SeedStream",
    "Share",
    "default_params",
    "lagrange_coeffs",
    "reconstruct",
    "recover_share",
    "reshare",
    "share",
    "small_test_params",
]

__version__ = "0.1.0"
