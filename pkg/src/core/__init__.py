"""Numerical Heisenberg calculus: symbols, projections and noncommutative residues."""
