import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_pose
from shotkit.errors import InputError
from shotkit.kinematics import (
    Skeleton,
    aligned_mpjpe,
    body_yaw,
    forward_kinematics,
    mirror,
    mpjpe,
    rotate_yaw,
    yaw_align,
    yaw_align_batch,
    yaw_align_flagged,
)


def chain(n):
    return Skeleton([f"j{i}" for i in range(n)], [-1] + list(range(n - 1)),
                    [[0.0, 0.0, 0.0]] + [[1.0, 0.0, 0.0]] * (n - 1))


def test_zero_rotations_give_cumulative_offsets(skeleton):
    pose = forward_kinematics(np.zeros((skeleton.num_joints, 3)), skeleton)
    expected = np.zeros_like(pose)
    for j, p in enumerate(skeleton.parents):
        expected[j] = skeleton.rest_offsets[j] + (expected[p] if p >= 0 else 0.0)
    np.testing.assert_allclose(pose, expected, atol=1e-12)


def test_root_yaw_quarter_turn_moves_child_to_minus_z():
    rot = np.array([[0.0, np.pi / 2, 0.0], [0.0, 0.0, 0.0]])
    pose = forward_kinematics(rot, chain(2))
    np.testing.assert_allclose(pose[1], [0.0, 0.0, -1.0], atol=1e-9)


def test_two_quarter_turns_about_z_compose():
    # root turns the first bone to +Y; the middle joint turns the second bone to -X
    rot = np.array([[0.0, 0.0, np.pi / 2], [0.0, 0.0, np.pi / 2], [0.0, 0.0, 0.0]])
    pose = forward_kinematics(rot, chain(3))
    np.testing.assert_allclose(pose[2], [-1.0, 1.0, 0.0], atol=1e-9)


def test_fk_rejects_wrong_length_and_large_angles(skeleton):
    with pytest.raises(InputError):
        forward_kinematics(np.zeros((5, 3)), skeleton)
    bad = np.zeros((skeleton.num_joints, 3))
    bad[3] = [7.0, 0.0, 0.0]
    with pytest.raises(InputError):
        forward_kinematics(bad, skeleton)


def test_bone_lengths_preserved(skeleton, rng):
    rot = rng.uniform(-1, 1, size=(200, skeleton.num_joints, 3)) * 1.8
    poses = forward_kinematics(rot, skeleton)
    rest = np.linalg.norm(skeleton.rest_offsets[1:], axis=1)
    bones = np.linalg.norm(poses[:, 1:] - poses[:, list(skeleton.parents[1:])], axis=2)
    assert np.max(np.abs(bones - rest)) < 1e-9


def test_skeleton_validation():
    with pytest.raises(InputError):
        Skeleton(["a", "b"], [-1, 1], np.zeros((2, 3)))
    with pytest.raises(InputError):
        Skeleton(["a", "l", "r"], [-1, 0, 0], [[0, 0, 0], [0.2, 0, 0], [-0.3, 0, 0]], [(1, 2)])
    with pytest.raises(InputError):
        Skeleton(["a", "l", "r"], [-1, 0, 0], [[0, 0, 0], [0.2, 0, 0], [-0.2, 0, 0]], [(1, 2), (2, 1)])


def test_yaw_align_identity_for_canonical_pose(skeleton):
    pose = skeleton.rest_pose()
    pose = pose - pose[0]
    assert abs(body_yaw(pose, skeleton)) < 1e-12
    np.testing.assert_allclose(yaw_align(pose, skeleton), pose, atol=1e-9)


def test_yaw_align_removes_quarter_turn(skeleton, rng):
    pose = random_pose(rng, skeleton)
    np.testing.assert_allclose(yaw_align(rotate_yaw(pose, np.pi / 2), skeleton), yaw_align(pose, skeleton), atol=1e-6)


def test_yaw_align_degenerate_pose_is_translation_only(skeleton):
    pose = np.zeros((skeleton.num_joints, 3))
    pose[:, 1] = np.linspace(0.0, 1.7, skeleton.num_joints)
    pose += [0.3, 0.0, -2.0]
    aligned, degenerate = yaw_align_flagged(pose, skeleton)
    assert degenerate
    np.testing.assert_allclose(aligned, pose - pose[0])


def test_yaw_align_is_idempotent_and_keeps_heights(skeleton, rng):
    for _ in range(50):
        pose = random_pose(rng, skeleton)
        once = yaw_align(pose, skeleton)
        np.testing.assert_allclose(yaw_align(once, skeleton), once, atol=1e-6)
        np.testing.assert_allclose(once[:, 1], pose[:, 1] - pose[0, 1], atol=1e-12)


def test_batch_alignment_matches_single(skeleton, rng):
    poses = np.stack([random_pose(rng, skeleton) for _ in range(20)])
    batch, flags = yaw_align_batch(poses, skeleton)
    assert not flags.any()
    for p, b in zip(poses, batch):
        np.testing.assert_allclose(b, yaw_align(p, skeleton), atol=1e-12)


def test_mpjpe_examples():
    a = np.zeros((3, 3))
    b = a.copy()
    b[1, 0] = 1.0
    assert mpjpe(a, a) == 0.0
    assert mpjpe(a, b) == pytest.approx(1 / 3)
    with pytest.raises(InputError):
        mpjpe(a, np.zeros((4, 3)))


def test_mpjpe_is_a_metric(rng):
    for _ in range(1000):
        a, b, c = rng.normal(size=(3, 6, 3))
        ab, ba, bc, ac = mpjpe(a, b), mpjpe(b, a), mpjpe(b, c), mpjpe(a, c)
        assert ab >= 0.0 and ab == ba
        assert ac <= ab + bc + 1e-12
    assert mpjpe(a, a) == 0.0


def test_aligned_mpjpe_of_turned_copy_is_zero(skeleton, rng):
    pose = random_pose(rng, skeleton)
    assert aligned_mpjpe(pose, rotate_yaw(pose, np.deg2rad(37)), skeleton) < 1e-6


def test_mirror_examples(skeleton, rng):
    rest = skeleton.rest_pose()
    np.testing.assert_allclose(mirror(rest, skeleton), rest, atol=1e-9)
    pose = random_pose(rng, skeleton)
    pose[skeleton.index("left_wrist")] = [0.5, 1.0, 0.2]
    np.testing.assert_array_equal(mirror(mirror(pose, skeleton), skeleton), pose)
    np.testing.assert_allclose(mirror(pose, skeleton)[skeleton.index("right_wrist")], [-0.5, 1.0, 0.2])


def test_mirror_preserves_mpjpe(skeleton, rng):
    for _ in range(20):
        a, b = random_pose(rng, skeleton), random_pose(rng, skeleton)
        assert abs(mpjpe(mirror(a, skeleton), mirror(b, skeleton)) - mpjpe(a, b)) < 1e-9


def test_mirror_negates_body_yaw(skeleton, rng):
    for _ in range(20):
        pose = random_pose(rng, skeleton)
        yaw, myaw = body_yaw(pose, skeleton), body_yaw(mirror(pose, skeleton), skeleton)
        assert abs(np.angle(np.exp(1j * (yaw + myaw)))) < 1e-6


@settings(max_examples=60, deadline=None)
@given(st.floats(-np.pi, np.pi), st.integers(0, 2**31 - 1))
def test_alignment_cancels_any_yaw(angle, seed):
    from shotkit.kinematics import load_skeleton

    skel = load_skeleton()
    pose = random_pose(np.random.default_rng(seed), skel)
    assert aligned_mpjpe(pose, rotate_yaw(pose, angle) + [1.0, 0.0, -3.0], skel) < 1e-6
