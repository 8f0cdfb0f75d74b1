"""
A single node is plain LMS
==========================

With one node there is nothing to combine, so both strategies collapse to LMS.
For Gaussian regressors with unit power the exact steady state is
mu s2 / (2 - 3 mu); the familiar mu s2 / (2 - mu) drops a fourth-moment term.
"""

from uvlc_diffusion import diffusion, network, steady_state

topo = network.Topology((frozenset(),), {})
C = network.uniform_weights(topo)
model = diffusion.DataModel([[[1.0]]], [1e-2], [0.0])

for mu in (0.01, 0.05, 0.2):
    cfg = diffusion.RunConfig("cta", mu, 2000, 1000, seed=3)
    pred = steady_state.predict_msd(steady_state.error_recursion_moments(topo, C, {}, model, cfg, [1.0]))
    trace = diffusion.run_monte_carlo(cfg, topo, C, {}, model, [1.0])
    sim = diffusion.steady_state_msd(trace, 1000).network
    print(
        f"mu={mu:<5} simulated {sim:.3e}  recursion {pred.network:.3e}  "
        f"mu s2/(2-3mu) {mu * 1e-2 / (2 - 3 * mu):.3e}  mu s2/(2-mu) {mu * 1e-2 / (2 - mu):.3e}"
    )
