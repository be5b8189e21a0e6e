"""Hierarchical stochastic block models fitted by variational Bayes.

The public entry points are :func:`hsbm.inference.fit` with a
:class:`hsbm.inference.FitConfig`, the graph helpers in :mod:`hsbm.graph`
and the benchmark tools in :mod:`hsbm.evalgen`.
"""
from .graph import Graph, load_edge_list, read_graph, save_edge_list, write_graph
from .inference import FitConfig, FitResult, Membership, fit
from .initprune import PrunedModel, bisect_init, prune
from .kernels import BernoulliBeta, PoissonGamma, Prior, get_kernel
from .tree import Tree

__version__ = "0.1.0"

__all__ = [
    "BernoulliBeta", "FitConfig", "FitResult", "Graph", "Membership", "PoissonGamma",
    "Prior", "PrunedModel", "Tree", "bisect_init", "fit", "get_kernel", "load_edge_list",
    "prune", "read_graph", "save_edge_list", "write_graph",
]
