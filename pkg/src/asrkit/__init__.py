"""Toolkit for building and verifying the algorithmic core of a long-form ASR system."""

__version__ = "0.1.0"
