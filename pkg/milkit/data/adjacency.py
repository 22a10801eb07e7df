"""
Instance graph construction and normalization
"""

from typing import Union

import numpy as np
import scipy.sparse as sp
import torch
from scipy.spatial import cKDTree

from milkit.exceptions import BagDataError

# Minkowski p for each supported metric
METRICS = {"L1": 1.0, "L2": 2.0, "Linf": np.inf}
NORMALIZATION_MODES = ("row", "symmetric", "symmetric_with_self_loops")

Adjacency = Union[sp.spmatrix, torch.Tensor]


def build_adjacency(coords: np.ndarray, threshold: float = 1.0, metric: str = "L1") -> sp.csr_matrix:
    """
    Connect every pair of distinct instances whose coordinates lie within ``threshold``.

    The defaults (L1, threshold 1) give the 4-neighbourhood on an integer patch grid.

    Args:
        coords: N×k integer coordinate matrix
        threshold: Maximum distance for an edge, inclusive
        metric: One of "L1", "L2", "Linf"

    Returns:
        Symmetric N×N float32 CSR matrix of unit weights with zero diagonal
    """
    coords = np.asarray(coords)
    if coords.ndim != 2 or coords.shape[0] < 1 or coords.shape[1] < 1:
        raise BagDataError(f"coords must be an N×k matrix with N >= 1, got shape {coords.shape}")
    if threshold < 0:
        raise BagDataError(f"threshold must be nonnegative, got {threshold}")
    if metric not in METRICS:
        raise BagDataError(f"unknown metric {metric!r}, expected one of {sorted(METRICS)}")

    n = coords.shape[0]
    tree = cKDTree(coords.astype(np.float64))
    pairs = tree.query_pairs(r=float(threshold), p=METRICS[metric], output_type="ndarray")
    rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
    cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
    data = np.ones(rows.shape[0], dtype=np.float32)
    adjacency = sp.csr_matrix((data, (rows, cols)), shape=(n, n), dtype=np.float32)
    adjacency.sort_indices()
    return adjacency


def _normalize_sparse(adj: sp.spmatrix, mode: str) -> sp.csr_matrix:
    adj = sp.csr_matrix(adj, dtype=np.float64, copy=True)
    if adj.nnz and adj.data.min() < 0:
        raise BagDataError("adjacency has negative entries")
    if mode == "symmetric_with_self_loops":
        adj = adj + sp.identity(adj.shape[0], dtype=np.float64, format="csr")

    degree = np.asarray(adj.sum(axis=1)).ravel()
    if mode == "row":
        inv = np.divide(1.0, degree, out=np.zeros_like(degree), where=degree > 0)
        return sp.csr_matrix(sp.diags(inv) @ adj)

    inv_sqrt = np.divide(1.0, np.sqrt(degree), out=np.zeros_like(degree), where=degree > 0)
    scale = sp.diags(inv_sqrt)
    return sp.csr_matrix(scale @ adj @ scale)


def _normalize_dense(adj: torch.Tensor, mode: str) -> torch.Tensor:
    if (adj < 0).any():
        raise BagDataError("adjacency has negative entries")
    if mode == "symmetric_with_self_loops":
        adj = adj + torch.eye(adj.shape[-1], dtype=adj.dtype, device=adj.device)

    degree = adj.sum(dim=-1)
    has_edges = degree > 0
    safe = torch.where(has_edges, degree, torch.ones_like(degree))
    if mode == "row":
        inv = torch.where(has_edges, safe.reciprocal(), torch.zeros_like(degree))
        return inv.unsqueeze(-1) * adj

    inv_sqrt = torch.where(has_edges, safe.rsqrt(), torch.zeros_like(degree))
    return inv_sqrt.unsqueeze(-1) * adj * inv_sqrt.unsqueeze(-2)


def normalize_adjacency(adj: Adjacency, mode: str = "row") -> Adjacency:
    """
    Normalize a nonnegative symmetric adjacency.

    Modes:
        row: D⁻¹A, rows of isolated nodes stay zero
        symmetric: D^(-1/2) A D^(-1/2)
        symmetric_with_self_loops: D̂^(-1/2) (A + I) D̂^(-1/2)

    Args:
        adj: scipy sparse N×N matrix, or a dense torch tensor of shape (..., N, N)
        mode: Normalization mode

    Returns:
        Same kind as the input: float64 CSR for sparse input, a tensor of the input
        dtype for tensor input
    """
    if mode not in NORMALIZATION_MODES:
        raise BagDataError(f"unknown normalization mode {mode!r}, expected one of {list(NORMALIZATION_MODES)}")
    if torch.is_tensor(adj):
        return _normalize_dense(adj, mode)
    return _normalize_sparse(adj, mode)
