"""Deterministic desk-scale simulation of a blockchain-backed lab-test platform.

The package hosts a simulated ledger and the state machines deployed on it
(token, test-request marketplace, storage oracle), the off-chain actors
(oracle nodes, lab simulator), the cryptographic plumbing (report sealing,
Fortuna CSPRNG, challenge-response auth) and an SP 800-22 randomness test
suite with a campaign runner.
"""

__version__ = "0.1.0"
