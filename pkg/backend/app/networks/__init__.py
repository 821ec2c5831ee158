"""Tensor autodiff, layers and Q-network assembly."""
