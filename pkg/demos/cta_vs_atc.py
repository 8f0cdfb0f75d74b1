"""
Combine-then-adapt versus adapt-then-combine
============================================

Twenty nodes estimate a 4-tap vector over faded, noisy optical links in cold
ocean water (1 C, 35 PPT). Both strategies see the same random streams.
"""

from uvlc_diffusion.experiments import BUILTIN, run_experiment

spec = BUILTIN["fig5"].replace(ensemble=50)
res = run_experiment(spec)
point = res["points"][0]

for name, r in point["strategies"].items():
    curve = r["trace"].network_msd
    print(f"{name.upper()}: MSD at i=0 {curve[0]:.3f}, i=100 {curve[100]:.2e}, steady state {r['steady'].network_db:.2f} dB")

gap = point["strategies"]["atc"]["steady"].network_db - point["strategies"]["cta"]["steady"].network_db
print(f"CTA is {gap:.2f} dB lower")
