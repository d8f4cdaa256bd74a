"""Cartesian pose retargeting from a human performer to a humanoid robot.

A one-shot calibration against a prescribed standing pose (arms forward
along +x, feet on the ground) measures the performer's pelvis height,
arm lengths, shoulder anchors, and per-link rotation offsets. Per-frame
mapping then scales pelvis and feet by the height ratio, anchors the
torso on the mapped pelvis, and retargets hands relative to the torso
with arm-length scaling, so extremity targets stay reachable on a robot
with different proportions.

Frames:
    * world poses come from the capture system; calibration records an
      anchor (heading-aligned pelvis ground frame) and every incoming
      pose is re-expressed in it, so the capture origin is irrelevant;
    * arm length and shoulder anchor are measured in the torso frame,
      the frame the hand retarget operates in;
    * the robot's neutral stance is its model frame: standing at the
      origin facing +x, all link orientations identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ExtremControlError
from .se3 import Pose, Rotation, align_axis, relative

LINKS = ("pelvis", "torso", "left_hand", "right_hand", "left_foot", "right_foot")
SIDES = ("left", "right")

MIN_PELVIS_HEIGHT_M = 0.3
MIN_ARM_LENGTH_M = 0.1


class DegenerateNeutral(ExtremControlError):
    """Neutral-pose anthropometrics under the plausibility floor."""


class DegenerateHeadset(ExtremControlError):
    """Headset direction too short to define a torso axis."""


@dataclass(frozen=True, eq=False)
class LinkSet:
    """One pose per tracked link (see LINKS for the canonical order)."""

    pelvis: Pose
    torso: Pose
    left_hand: Pose
    right_hand: Pose
    left_foot: Pose
    right_foot: Pose

    def pose(self, link: str) -> Pose:
        if link not in LINKS:
            raise ValueError(f"unknown link {link!r}")
        return getattr(self, link)

    def with_pose(self, link: str, pose: Pose) -> "LinkSet":
        if link not in LINKS:
            raise ValueError(f"unknown link {link!r}")
        return replace(self, **{link: pose})

    def transform(self, fn) -> "LinkSet":
        """Apply a Pose -> Pose function to every link."""
        return LinkSet(*(fn(self.pose(name)) for name in LINKS))

    def to_dict(self) -> dict:
        return {name: self.pose(name).to_dict() for name in LINKS}

    @staticmethod
    def from_dict(d: dict) -> "LinkSet":
        return LinkSet(*(Pose.from_dict(d[name]) for name in LINKS))


@dataclass(frozen=True)
class RobotModel:
    """Fixed robot geometry. Lengths in meters, model frame as above."""

    pelvis_height: float
    pelvis_to_torso: tuple[float, float, float]
    shoulder_offset: dict[str, tuple[float, float, float]]  # torso frame, per side
    arm_length: dict[str, float]
    neutral_foot: dict[str, tuple[float, float, float]]

    def __post_init__(self) -> None:
        if self.pelvis_height <= 0:
            raise ValueError(f"pelvis_height {self.pelvis_height} must be positive")
        for side in SIDES:
            if self.arm_length[side] <= 0:
                raise ValueError(f"{side} arm_length must be positive")

    def neutral_links(self) -> LinkSet:
        """The robot's neutral stance as a LinkSet (identity orientations)."""
        ident = Rotation.identity()
        pelvis = Pose(ident, np.array([0.0, 0.0, self.pelvis_height]))
        torso = Pose(ident, pelvis.translation + np.asarray(self.pelvis_to_torso, dtype=float))
        hands = {}
        for side in SIDES:
            local = np.asarray(self.shoulder_offset[side], dtype=float) + np.array(
                [self.arm_length[side], 0.0, 0.0]
            )
            hands[side] = Pose(ident, torso.apply(local))
        feet = {
            side: Pose(ident, np.asarray(self.neutral_foot[side], dtype=float)) for side in SIDES
        }
        return LinkSet(pelvis, torso, hands["left"], hands["right"], feet["left"], feet["right"])

    def to_dict(self) -> dict:
        return {
            "pelvis_height_m": self.pelvis_height,
            "pelvis_to_torso_m": list(self.pelvis_to_torso),
            "shoulder_offset_m": {s: list(self.shoulder_offset[s]) for s in SIDES},
            "arm_length_m": dict(self.arm_length),
            "neutral_foot_m": {s: list(self.neutral_foot[s]) for s in SIDES},
        }

    @staticmethod
    def from_dict(d: dict) -> "RobotModel":
        return RobotModel(
            pelvis_height=float(d["pelvis_height_m"]),
            pelvis_to_torso=tuple(d["pelvis_to_torso_m"]),
            shoulder_offset={s: tuple(d["shoulder_offset_m"][s]) for s in SIDES},
            arm_length={s: float(d["arm_length_m"][s]) for s in SIDES},
            neutral_foot={s: tuple(d["neutral_foot_m"][s]) for s in SIDES},
        )


@dataclass(frozen=True, eq=False)
class CalibrationProfile:
    """Everything map_frame needs, measured once from the neutral pose."""

    robot: RobotModel
    anchor: Pose  # heading-aligned pelvis ground frame at calibration
    pelvis_height: float  # performer pelvis height z^h, meters
    arm_length: dict[str, float]  # performer arm length l^h per side, torso frame
    shoulder: dict[str, np.ndarray]  # performer shoulder anchor per side, torso frame
    rot_offset: dict[str, Rotation]  # per link; hands are torso-relative offsets
    foot_offset: dict[str, np.ndarray]  # additive foot correction, meters

    @property
    def scale(self) -> float:
        """Robot-to-performer pelvis height ratio z^r / z^h."""
        return self.robot.pelvis_height / self.pelvis_height

    def to_dict(self) -> dict:
        return {
            "robot": self.robot.to_dict(),
            "anchor": self.anchor.to_dict(),
            "pelvis_height_m": self.pelvis_height,
            "arm_length_m": dict(self.arm_length),
            "shoulder_m": {s: [float(c) for c in self.shoulder[s]] for s in SIDES},
            "rot_offset": {k: r.to_list() for k, r in self.rot_offset.items()},
            "foot_offset_m": {s: [float(c) for c in self.foot_offset[s]] for s in SIDES},
        }

    @staticmethod
    def from_dict(d: dict) -> "CalibrationProfile":
        return CalibrationProfile(
            robot=RobotModel.from_dict(d["robot"]),
            anchor=Pose.from_dict(d["anchor"]),
            pelvis_height=float(d["pelvis_height_m"]),
            arm_length={s: float(d["arm_length_m"][s]) for s in SIDES},
            shoulder={s: np.asarray(d["shoulder_m"][s], dtype=float) for s in SIDES},
            rot_offset={k: Rotation(np.asarray(q, dtype=float)) for k, q in d["rot_offset"].items()},
            foot_offset={s: np.asarray(d["foot_offset_m"][s], dtype=float) for s in SIDES},
        )


def heading_anchor(pelvis: Pose) -> Pose:
    """Yaw-only pelvis ground frame: position under the pelvis, x along heading."""
    h = pelvis.rotation.apply(np.array([1.0, 0.0, 0.0]))
    yaw = math.atan2(h[1], h[0]) if math.hypot(h[0], h[1]) > 1e-9 else 0.0
    ground = np.array([pelvis.translation[0], pelvis.translation[1], 0.0])
    return Pose(Rotation.about_z(yaw), ground)


def calibrate(neutral: LinkSet, robot: RobotModel) -> CalibrationProfile:
    """One-shot calibration from the performer's prescribed standing pose.

    Measures pelvis height, per-side arm length (torso-frame x reach) and
    shoulder anchor (same vector with x zeroed), per-link rotation offsets
    against the robot's neutral, and additive foot corrections.

    Raises DegenerateNeutral when pelvis height <= 0.3 m or an arm
    length <= 0.1 m, the floor for a plausible standing human.
    """
    anchor = heading_anchor(neutral.pelvis)
    to_anchor = anchor.inverse()
    local = neutral.transform(to_anchor.compose)

    z_h = float(local.pelvis.translation[2])
    if z_h <= MIN_PELVIS_HEIGHT_M:
        raise DegenerateNeutral(f"pelvis height {z_h:.3f} m <= {MIN_PELVIS_HEIGHT_M} m")

    robot_neutral = robot.neutral_links()
    scale = robot.pelvis_height / z_h

    arm_length: dict[str, float] = {}
    shoulder: dict[str, np.ndarray] = {}
    rot_offset: dict[str, Rotation] = {}
    foot_offset: dict[str, np.ndarray] = {}

    for side in SIDES:
        hand_in_torso = relative(local.torso, local.pose(f"{side}_hand"))
        reach = float(hand_in_torso.translation[0])
        if reach <= MIN_ARM_LENGTH_M:
            raise DegenerateNeutral(f"{side} arm length {reach:.3f} m <= {MIN_ARM_LENGTH_M} m")
        arm_length[side] = reach
        shoulder[side] = np.array([0.0, hand_in_torso.translation[1], hand_in_torso.translation[2]])
        # Hand offsets live in the torso-relative frame the retarget uses.
        robot_rel = relative(robot_neutral.torso, robot_neutral.pose(f"{side}_hand"))
        rot_offset[f"{side}_hand"] = hand_in_torso.rotation.inverse().compose(robot_rel.rotation)

        foot = local.pose(f"{side}_foot").translation
        robot_foot = robot_neutral.pose(f"{side}_foot").translation
        foot_offset[side] = robot_foot - scale * foot

    for link in ("pelvis", "torso", "left_foot", "right_foot"):
        rot_offset[link] = (
            local.pose(link).rotation.inverse().compose(robot_neutral.pose(link).rotation)
        )

    return CalibrationProfile(
        robot=robot,
        anchor=anchor,
        pelvis_height=z_h,
        arm_length=arm_length,
        shoulder=shoulder,
        rot_offset=rot_offset,
        foot_offset=foot_offset,
    )


def map_frame(profile: CalibrationProfile, human: LinkSet) -> LinkSet:
    """Retarget one captured frame to robot link targets.

    Pelvis and feet positions scale by the pelvis-height ratio (feet get
    their additive calibration correction); the torso rides on the mapped
    pelvis through the robot's fixed pelvis-to-torso offset; hands are
    retargeted torso-relative with shoulder re-anchoring and arm-length
    scaling. Orientations compose the performer's rotation with the
    calibrated offset. Stateless: same input frame, same output.
    """
    to_anchor = profile.anchor.inverse()
    local = human.transform(to_anchor.compose)
    robot = profile.robot
    s = profile.scale

    pelvis = Pose(
        local.pelvis.rotation.compose(profile.rot_offset["pelvis"]),
        s * local.pelvis.translation,
    )
    torso = Pose(
        local.torso.rotation.compose(profile.rot_offset["torso"]),
        pelvis.translation + pelvis.rotation.apply(np.asarray(robot.pelvis_to_torso, dtype=float)),
    )

    out = {"pelvis": pelvis, "torso": torso}
    for side in SIDES:
        foot_local = local.pose(f"{side}_foot")
        out[f"{side}_foot"] = Pose(
            foot_local.rotation.compose(profile.rot_offset[f"{side}_foot"]),
            s * foot_local.translation + profile.foot_offset[side],
        )
        rel = relative(local.torso, local.pose(f"{side}_hand"))
        ratio = robot.arm_length[side] / profile.arm_length[side]
        anchored = (rel.translation - profile.shoulder[side]) * ratio + np.asarray(
            robot.shoulder_offset[side], dtype=float
        )
        out[f"{side}_hand"] = torso.compose(
            Pose(rel.rotation.compose(profile.rot_offset[f"{side}_hand"]), anchored)
        )

    return LinkSet(*(out[name] for name in LINKS))


def torso_from_headset(pelvis: Pose, headset_position: np.ndarray) -> Rotation:
    """Torso orientation estimate from the headset position alone.

    Expresses the headset position in the pelvis frame and returns the
    minimal rotation aligning the vertical axis z with that direction
    (pelvis-frame result; compose with pelvis.rotation for world).
    Headset orientation is deliberately not an input: where the user
    looks should not steer the torso.

    Raises DegenerateHeadset when the pelvis-frame offset is <= 1e-6 m.
    """
    v = pelvis.rotation.inverse().apply(np.asarray(headset_position, dtype=float) - pelvis.translation)
    if float(np.linalg.norm(v)) <= 1e-6:
        raise DegenerateHeadset(f"headset offset norm {np.linalg.norm(v):.3e} m <= 1e-6 m")
    return align_axis(np.array([0.0, 0.0, 1.0]), v)
