"""Configuration package for the Rainbow ablation lab."""
