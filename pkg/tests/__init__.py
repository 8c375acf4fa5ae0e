"""Test package for cqed-anyons."""
