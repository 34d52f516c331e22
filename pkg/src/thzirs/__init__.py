"""Two-user THz uplink through two cascaded IRSs: channels, link budget,
phase-configuration solvers and a from-scratch DDPG agent."""

__version__ = "0.1.0"
