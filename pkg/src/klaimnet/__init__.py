"""Modeling and verification workbench for service-oriented sensor-actuator
networks written in the KLAIM coordination calculus."""

__version__ = "0.1.0"
