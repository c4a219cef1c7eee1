"""Networked multi-virus SIS epidemics with a shared resource."""

__version__ = "0.1.0"
