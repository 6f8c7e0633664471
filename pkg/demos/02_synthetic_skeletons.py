"""
Synthetic skeletons under occlusion
===================================

A fixed 23-joint template (COCO body joints plus three points per foot) is
rotated about the vertical axis, projected orthographically and normalized to
the box around its visible joints.
"""

import numpy as np

from parthoe.skeleton import JOINT_NAMES, LOWER_ONLY, clean_joints, make_heatmaps, synthesize

ls, rs = JOINT_NAMES.index("left_shoulder"), JOINT_NAMES.index("right_shoulder")
lt, rt = JOINT_NAMES.index("left_big_toe"), JOINT_NAMES.index("right_big_toe")

# %%
# Facing the camera (0 deg) the shoulders are wide apart; side-on (90 deg)
# they collapse toward the same image column.
for theta in (0, 45, 90, 180):
    s = synthesize(theta).skeleton
    print(f"theta {theta:3d}: shoulder spread {abs(s[ls, 0] - s[rs, 0]):.3f}, "
          f"left shoulder x {s[ls, 0]:.3f}")

# %%
# With the upper body hidden the feet still carry the facing direction. Seen
# side-on, the toes point left or right of the heels; seen front or back, the
# left foot switches sides of the image.
lh = JOINT_NAMES.index("left_heel")
for theta in (0, 90, 180, 270):
    s = synthesize(theta, LOWER_ONLY).skeleton
    print(f"theta {theta:3d}, lower only: {int(s[:, 2].sum())} joints visible, "
          f"toe - heel x {s[lt, 0] - s[lh, 0]:+.3f}, left toe x {s[lt, 0]:.3f} vs right {s[rt, 0]:.3f}")

# %%
# Occluded joints are zeroed and flagged invisible.
s = synthesize(30, "drop:0.4", noise_sigma=0.02, seed=5).skeleton
print("visible:", [JOINT_NAMES[i] for i in np.flatnonzero(s[:, 2])])

# %%
# Heatmap targets always come from the full, noise-free skeleton, so the
# network is asked to place hidden joints too.
hm = make_heatmaps(clean_joints(np.array([30.0]))[0], 16, 16, 1.5)
peak = np.unravel_index(np.argmax(hm[ls]), hm[ls].shape)
print("heatmaps", hm.shape, "left shoulder peak at row/col", peak)
