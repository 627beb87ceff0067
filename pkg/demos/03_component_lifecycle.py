"""
Vigilant, active and dormant jammer components
==============================================

Scenario 3 has overlapping attacks, so the adaptive tracker runs with
dynamic component management. A vigilant component waits for an attack,
becomes active once its bias is pinned down, and is retired when its
uncertainty grows after the attack stops. The awake count is printed
every five steps.
"""
import numpy as np

from rgpo_rfs import RfsTracker, generate_scans, generate_trajectory, scenario, tracker_spec

cfg = scenario(3)
truth = generate_trajectory(cfg)
scans = generate_scans(truth, cfg, seed=1)
trk = RfsTracker(tracker_spec("adaptive", cfg).config)

for k, scan in enumerate(scans, start=1):
    rep = trk.step(scan)
    if k % 5 == 0:
        status = [r.status for r in trk.belief.registry]
        active = {i: round(b, 1) for i, b in truth.active_biases(k).items()}
        print(f"k={k:3d}  awake={rep.c_k}  p_jam={rep.p_jam:.2f}  registry={status}  true={active}")
