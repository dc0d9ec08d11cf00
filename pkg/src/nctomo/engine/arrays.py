"""Flat array views of topologies consumed by the simulation kernels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class TreeArrays:
    """Undirected tree as directional channels; slot s is the channel node->adj_nbr[s]."""

    node_ids: list
    is_leaf: np.ndarray     # uint8[n]
    adj_ptr: np.ndarray     # int64[n+1]
    adj_nbr: np.ndarray     # int64[S]
    rev: np.ndarray         # int64[S], slot of the reverse channel
    fixed: np.ndarray       # float64[S]
    qmax: np.ndarray
    loss: np.ndarray

    @property
    def n(self) -> int:
        return len(self.node_ids)


@dataclass
class DagArrays:
    """Routed links of a DAG experiment (only links used by some route)."""

    node_ids: list
    link_src: np.ndarray    # int64[L]
    link_dst: np.ndarray
    fixed: np.ndarray       # float64[L]
    qmax: np.ndarray
    loss: np.ndarray
    out_ptr: np.ndarray     # int64[n+1]
    out_link: np.ndarray    # int64[L]
    in_ptr: np.ndarray
    in_link: np.ndarray
    mask: np.ndarray        # uint8[L, k]: link lies on some route of source k
    in_coef: np.ndarray     # int64[L]: coefficient applied at the head of the link
    sources: np.ndarray     # int64[k]
    receivers: np.ndarray   # int64[R]
    recv_of_node: np.ndarray  # int64[n], -1 if not a receiver

    @property
    def n(self) -> int:
        return len(self.node_ids)

    @property
    def n_links(self) -> int:
        return len(self.link_src)
