"""Shipped scenario configurations (JSON)."""
