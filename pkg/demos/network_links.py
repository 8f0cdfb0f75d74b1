"""
Topology and faded link matrices
================================

A seeded random geometric network, its uniform combination weights and one
draw of the per-iteration link matrix G.
"""

import numpy as np

from uvlc_diffusion import channel, network

topo = network.generate_topology(20, 8.0, 100.0, seed=0)
degrees = [topo.degree(k) - 1 for k in range(topo.n_nodes)]
print("nodes:", topo.n_nodes, " links:", len(topo.links()), " mean degree:", np.mean(degrees))

C = network.uniform_weights(topo)
print("row sums of C:", np.unique(np.round(C.weights.sum(axis=1), 12)))

# every link gets the distance-table variance at its own length
fading = network.fading_from_distances(topo)
lengths = np.array([topo.distances[kl] for kl in topo.links()])
print(f"link lengths {lengths.min():.1f} .. {lengths.max():.1f} m")

G = network.sample_link_matrix(C, fading, np.random.default_rng(1))
print("self weights untouched:", np.array_equal(np.diag(G), np.diag(C.weights)))
print("row sums of one draw of G:", np.round(G.sum(axis=1)[:5], 4), "...")

# E[G] = C for unit-mean links
EI, EI2 = network.link_gain_moments(C, fading)
print("max |E[G] - C|:", np.abs(C.weights * EI - C.weights).max())

network.save_topology(topo, "topology.txt")
print("wrote topology.txt; reload with network.load_topology")
