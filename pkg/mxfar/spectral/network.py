"""
Network summaries of edge significance across analysis windows
"""
import logging
from dataclasses import dataclass
from typing import List, Sequence

import networkx as nx
import numpy as np
import pandas as pd

from mxfar.core.types import Panel
from mxfar.exceptions import SpecError

logger = logging.getLogger(__name__)


def split_windows(panel: Panel, window_len: int) -> List[Panel]:
    """
    Non-overlapping windows of ``window_len`` time points; a short tail is dropped.

    Raises:
        SpecError: if the window length is not in 1..T
    """
    if not 1 <= window_len <= panel.n_time:
        raise SpecError(f"Window length {window_len} outside 1..{panel.n_time}")
    n_windows = panel.n_time // window_len
    dropped = panel.n_time - n_windows * window_len
    if dropped:
        logger.info(f"Dropping the last {dropped} time point(s) that do not fill a window")
    return [panel.window(w * window_len, (w + 1) * window_len) for w in range(n_windows)]


@dataclass(frozen=True)
class NetworkSummary:
    """Share of windows in which each edge source -> target is significant, indexed (group, regime, target, source)"""
    proportions: np.ndarray
    regimes: Sequence[str]
    n_windows: int

    def to_frame(self) -> pd.DataFrame:
        """``group,regime,source,target,proportion`` with 1-based channels; self-edges included"""
        n_groups, n_regimes, k, _ = self.proportions.shape
        records = [(group, self.regimes[r], source + 1, target + 1, float(self.proportions[group, r, target, source]))
                   for group in range(n_groups) for r in range(n_regimes)
                   for source in range(k) for target in range(k)]
        return pd.DataFrame.from_records(records, columns=["group", "regime", "source", "target", "proportion"])

    def to_graph(self, group: int, regime: str) -> nx.DiGraph:
        """Directed graph of the nonzero edges of one (group, regime); self-edges left out"""
        r = list(self.regimes).index(regime)
        k = self.proportions.shape[-1]
        graph = nx.DiGraph(group=group, regime=regime, windows=self.n_windows)
        graph.add_nodes_from(f"ch_{j + 1}" for j in range(k))
        for target in range(k):
            for source in range(k):
                proportion = float(self.proportions[group, r, target, source])
                if source != target and proportion > 0:
                    graph.add_edge(f"ch_{source + 1}", f"ch_{target + 1}", proportion=proportion)
        return graph

    def to_dot(self) -> str:
        """DOT text with one cluster per (group, regime), edges weighted by proportion"""
        lines = ["digraph fpdc_network {", "  compound=true;"]
        for group in range(self.proportions.shape[0]):
            for regime in self.regimes:
                graph = self.to_graph(group, regime)
                prefix = f"g{group}_{regime}"
                lines.append(f'  subgraph "cluster_{prefix}" {{')
                lines.append(f'    label="group {group}, {regime} amplitude";')
                for node in graph.nodes:
                    lines.append(f'    "{prefix}_{node}" [label="{node}"];')
                for source, target, data in graph.edges(data=True):
                    proportion = data["proportion"]
                    lines.append(f'    "{prefix}_{source}" -> "{prefix}_{target}" '
                                 f'[label="{proportion:.2f}", penwidth={1 + 4 * proportion:.2f}];')
                lines.append("  }")
        lines.append("}")
        return "\n".join(lines) + "\n"


def network_summary(window_flags: Sequence[np.ndarray], regimes: Sequence[str]) -> NetworkSummary:
    """
    Proportion of windows in which every edge is significant.

    Args:
        window_flags: One boolean array (group, regime, target, source) per window
        regimes: Names of the regime axis

    Raises:
        SpecError: if there are no windows
    """
    if len(window_flags) == 0:
        raise SpecError("Network summary needs at least one window")
    stacked = np.stack([np.asarray(flags, dtype=bool) for flags in window_flags])
    return NetworkSummary(proportions=stacked.mean(axis=0), regimes=list(regimes), n_windows=stacked.shape[0])
