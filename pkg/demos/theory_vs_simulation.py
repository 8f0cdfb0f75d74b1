"""
Steady-state theory against Monte-Carlo
=======================================

The CTA moment recursion predicts the steady-state MSD without simulating.
Here it is compared with a simulated ensemble as the node spacing grows.
"""

from uvlc_diffusion.experiments import BUILTIN, sweep

spec = BUILTIN["fig9"].replace(ensemble=100)
print(f"{'distance':>8}  {'simulated':>10}  {'theory':>8}")
for row in sweep(spec):
    print(f"{row['value']:>6g} m  {row['network_db']:>8.2f} dB  {row['theory_db']:>6.2f} dB")
