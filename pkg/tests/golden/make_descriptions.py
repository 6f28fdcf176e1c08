"""Regenerate descriptions.json. Run only after an intended change to the describer output."""
import json
from pathlib import Path

import numpy as np

from shotkit.describer import Describer
from shotkit.kinematics import forward_kinematics, load_skeleton, rotate_yaw


def poses(skeleton):
    rng = np.random.default_rng(2024)
    yield "rest", skeleton.rest_pose()
    for i, yaw in enumerate(np.linspace(-180, 135, 8)):
        yield f"rest turned {yaw:.0f} deg", rotate_yaw(skeleton.rest_pose(), np.deg2rad(yaw))
    for i in range(11):
        rot = rng.normal(scale=0.7, size=(skeleton.num_joints, 3))
        rot[0] = [0.0, rng.uniform(-np.pi, np.pi), 0.0]
        yield f"random {i}", forward_kinematics(rot, skeleton)


def main():
    skeleton = load_skeleton()
    describer = Describer.default(skeleton=skeleton)
    out = []
    for name, pose in poses(skeleton):
        joints = np.round(pose, 6)
        out.append({"name": name, "joints": joints.tolist(), "sentences": list(describer(joints).sentences)})
    path = Path(__file__).with_name("descriptions.json")
    path.write_text(json.dumps({"poses": out}, indent=1) + "\n")


if __name__ == "__main__":
    main()
