"""Retargeting walkthrough: calibrate once from a neutral pose, then map
captured human link poses onto a smaller robot, frame by frame.

Run:  python3 demos/01_pose_mapping.py
"""

import numpy as np

from extremctl.mapping import LinkSet, RobotModel, calibrate, map_frame
from extremctl.se3 import Pose, Rotation

np.set_printoptions(precision=4, suppress=True)

# ===== 1. the robot, as shipped =====
robot = RobotModel(
    pelvis_height=0.75,
    pelvis_to_torso=(0.05, 0.0, 0.25),
    shoulder_offset={"left": (0.02, 0.18, 0.05), "right": (0.02, -0.18, 0.05)},
    arm_length={"left": 0.45, "right": 0.45},
    neutral_foot={"left": (0.0, 0.12, 0.03), "right": (0.0, -0.12, 0.03)},
)
print("robot pelvis height:", robot.pelvis_height, "m; arm:", robot.arm_length["right"], "m")

# ===== 2. the performer stands still for one frame =====
# A 1.0 m pelvis and 0.6 m reach: noticeably larger than the robot.
ident = Rotation.identity()
pelvis = Pose(ident, np.array([0.0, 0.0, 1.0]))
neutral = LinkSet(
    pelvis=pelvis,
    torso=pelvis,
    left_hand=Pose(ident, np.array([0.6, 0.2, 1.3])),
    right_hand=Pose(ident, np.array([0.6, -0.2, 1.3])),
    left_foot=Pose(ident, np.array([0.0, 0.1, 0.02])),
    right_foot=Pose(ident, np.array([0.0, -0.1, 0.02])),
)
profile = calibrate(neutral, robot)
print("\ncalibrated   scale:", profile.pelvis_height, "->", robot.pelvis_height,
      "(ratio", robot.pelvis_height / profile.pelvis_height, ")")
print("measured arm length:", profile.arm_length["right"], "m")

# ===== 3. the neutral pose must map to the robot's own neutral =====
mapped = map_frame(profile, neutral)
want = robot.neutral_links()
err = max(
    np.abs(mapped.pose(n).translation - want.pose(n).translation).max()
    for n in ("pelvis", "torso", "left_hand", "right_hand", "left_foot", "right_foot")
)
print("\nneutral reproduction error:", err, "m  (closed form, not fitted)")

# ===== 4. now move: reach forward and crouch a little =====
frame = neutral.with_pose(
    "right_hand", Pose(ident, np.array([0.85, -0.25, 1.15]))
).with_pose(
    "pelvis", Pose(Rotation.about_z(0.3), np.array([0.0, 0.0, 0.92]))
)
out = map_frame(profile, frame)
print("\nperformer hand moved to", frame.right_hand.translation)
print("robot hand target      ", out.right_hand.translation)
print("robot pelvis target    ", out.pelvis.translation,
      "(0.92 m crouch scaled to", out.pelvis.translation[2], "m)")

# ===== 5. a taller performer making the same relative motion =====
# Uniform body scale calibrates away: the robot does the same thing.
grow = lambda p: Pose(p.rotation, p.translation * 1.25)
tall_profile = calibrate(neutral.transform(grow), robot)
tall_out = map_frame(tall_profile, frame.transform(grow))
gap = max(
    np.abs(tall_out.pose(n).translation - out.pose(n).translation).max()
    for n in ("pelvis", "torso", "left_hand", "right_hand", "left_foot", "right_foot")
)
print("\nsame motion from a 25% taller performer: target gap", gap, "m")
