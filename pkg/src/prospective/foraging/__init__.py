"""Patch-foraging environment, optimal-policy oracle and actor-critic agents."""
