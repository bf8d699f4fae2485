"""Hybrid D2D resource allocation: MR power control, throughput analysis,
Hungarian channel/mode selection and a slot-level simulator."""

__version__ = "0.1.0"
