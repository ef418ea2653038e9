"""How far greedy minimization sits from the best height-2 tree.

Enumerates every connected graph on up to six nodes and compares the
greedy K=2 entropy with an exhaustive search over set partitions.
"""
import sys
from collections import defaultdict
from pathlib import Path

import networkx as nx

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
import oracles  # noqa: E402

from llata.graph import Graph  # noqa: E402
from llata.tree import minimize  # noqa: E402


def main():
    by_n = defaultdict(list)
    for G in nx.graph_atlas_g():
        n = G.number_of_nodes()
        if not 2 <= n <= 6 or not nx.is_connected(G):
            continue
        g = Graph.from_edges(n, G.edges())
        best = oracles.brute_force_min_height2(oracles.adjacency(n, g.edges()))
        by_n[n].append(minimize(g, 2).entropy - best)

    print(f"{'n':>2} {'graphs':>6} {'optimal':>7} {'mean gap':>9} {'max gap':>8}")
    for n in sorted(by_n):
        gaps = by_n[n]
        opt = sum(abs(x) < 1e-12 for x in gaps)
        print(f"{n:>2} {len(gaps):>6} {opt:>7} {sum(gaps) / len(gaps):9.4f} {max(gaps):8.4f}")


if __name__ == "__main__":
    main()
