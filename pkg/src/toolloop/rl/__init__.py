"""Reward functions and the masked policy-gradient kernel."""
