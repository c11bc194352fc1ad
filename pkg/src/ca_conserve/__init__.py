"""Exact detection and construction of conservation laws in cellular automata."""
