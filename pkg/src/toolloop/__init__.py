"""Runtime pieces for multi-turn tool use: trajectories, a tool server, rollout schedulers, and a masked policy-gradient kernel."""

__version__ = "0.1.0"
