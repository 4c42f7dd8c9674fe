"""Core package: numerics, mask geometry, attention methods and the toy DiT."""
