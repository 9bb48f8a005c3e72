"""Packaged example problem files."""
