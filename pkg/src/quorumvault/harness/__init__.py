"""Deterministic in-process deployment, fault injection, and privacy checkers."""
