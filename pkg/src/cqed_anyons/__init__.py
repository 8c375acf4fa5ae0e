"""cqed-anyons - Circuit-QED simulator for minimal toric-code anyonic interferometry."""

__version__ = "0.1.0"
