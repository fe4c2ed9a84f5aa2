"""Winternitz stack signatures and the BWS, MAWS and RWS non-repudiation protocols."""

from .analysis import capacity, exact_security_bits, min_kappa_for_security, security_report
from .fabric import Edge, Fabric, FabricParams, load_edge, load_fabric, save_edge, save_fabric, storage_bytes
from .hashing import beta, chain_iterate, chain_step
from .oracle import IndexMultiset, OracleParams, hors, omega
from .stack import (CapacityExhausted, SignatureStack, apply_extension, depth_from_tops, empty_stack, push,
                    validate_extension, verify_full)

__version__ = "0.1.0"
