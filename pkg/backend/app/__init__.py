"""Rainbow ablation lab application package."""
