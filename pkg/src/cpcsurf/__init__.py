"""Discrete surfaces on trivalent graphs: curvature, principal directions, CPC examples."""
