"""Restructure a heterophilic synthetic graph and compare homophily of A, M and G."""

import numpy as np

from pfgc import homophily_ratio, restructure
from pfgc.synthetic import attributed_sbm


def main():
    g = attributed_sbm(n_nodes=150, n_clusters=3, p_in=0.02, p_out=0.06, n_features=100, seed=1)
    print(f"input graph: {g.n_nodes} nodes, {g.n_edges} edges, homophily {homophily_ratio(g):.3f}")
    for eps in (0.001, 0.01, 0.05):
        rg = restructure(g, eps)
        print(
            f"eps={eps:<6} M homophily {homophily_ratio(rg.homophilic, g.labels):.3f} ({np.count_nonzero(np.triu(rg.homophilic, 1))} edges)  "
            f"G homophily {homophily_ratio(rg.heterophilic, g.labels):.3f}"
        )


if __name__ == "__main__":
    main()
