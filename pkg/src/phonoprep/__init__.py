"""Phonon-assisted exciton preparation: process-tensor dynamics and spectroscopy fitting."""

__version__ = "0.1.0"
