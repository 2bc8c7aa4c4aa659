"""Curvature flow of doubly symmetric networks with two triple junctions."""
