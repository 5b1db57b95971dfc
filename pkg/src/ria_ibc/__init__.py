"""Retrospective interference alignment on the two-cell, two-user-per-cell MIMO
interference broadcast channel with delayed CSIT.

Modules
-------
frame      phase/round/slot schedule
channel    block-fading channels and the delayed-CSIT gate
precoding  phase-by-phase precoder construction for (M, N) = (4, 1)
receiver   staged decoder, null-space oracle decoder
simulator  seeded trials, Monte Carlo campaigns, CSIT audit
dofplan    DoF planner for general (M, N) and the comparison curves
cli        ``ria-ibc`` command-line front end
"""

__version__ = "0.1.0"
