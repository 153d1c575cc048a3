"""
Class-Fourier GNN - Source Package
"""
