"""User-facing functionality shared between clients and nodes."""
