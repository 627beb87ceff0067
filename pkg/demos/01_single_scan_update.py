"""
One scan through the set likelihood
===================================

A single update of the adaptive tracker on a hand-made scan: one return
near the target, one return pushed out along the line of sight, and two
clutter points. The posterior mixture keeps one Gaussian per association
hypothesis, and the jamming probability summarises how much of the scan the
jammer component explains.
"""
import numpy as np

from rgpo_rfs.models import AdaptiveJammerModel, ClutterModel, MeasurementModel, los_unit_vector
from rgpo_rfs.tracker import detect_jamming, initial_belief, update

# target at (430, 380) with a bias state that starts wide open
belief = initial_belief([430.0, 380.0, 6.0, 4.5, 0.0], np.diag([25.0, 25.0, 4.0, 4.0, 500.0]), n_bias=1)
meas = MeasurementModel.position(np.sqrt(5.0)).widened(5)
builder = AdaptiveJammerModel(MeasurementModel.position(np.sqrt(5.0)))
clutter = ClutterModel(20.0, (3.0,))

u = los_unit_vector(np.array([430.0, 380.0]))
Z = np.array([[431.0, 379.5],
              [430.0, 380.0] + 25.0 * u,
              [120.0, 870.0],
              [655.0, 40.0]])

post = update(belief, Z, meas, clutter, builder, p_d=0.98)
print("components after pruning:", len(post.mixture))

# the heaviest hypotheses and what they say about each return
order = np.argsort(post.mixture.log_weights)[::-1][:5]
for i in order:
    h = post.mixture.lineage[i]
    print(f"w={post.mixture.weights[i]:.3f}  labels={h.labels}  bias={post.mixture.means[i, 4]:6.2f}")

print("jamming probability:", round(detect_jamming(post, Z, belief, clutter, builder), 3))
