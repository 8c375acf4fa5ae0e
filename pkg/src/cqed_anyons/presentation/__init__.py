"""Presentation layer for the command-line interface."""
