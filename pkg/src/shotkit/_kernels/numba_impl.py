import numpy as np
from numba import njit


@njit(cache=True)
def fps_greedy(poses, start, n, rank):
    num = poses.shape[0]
    num_joints = poses.shape[1]
    selected = np.empty(n, dtype=np.int64)
    selected[0] = start
    mind = np.full(num, np.inf)
    taken = np.zeros(num, dtype=np.bool_)
    taken[start] = True
    last = start
    for k in range(1, n):
        best = -1.0
        best_i = -1
        for i in range(num):
            if taken[i]:
                continue
            acc = 0.0
            for j in range(num_joints):
                dx = poses[i, j, 0] - poses[last, j, 0]
                dy = poses[i, j, 1] - poses[last, j, 1]
                dz = poses[i, j, 2] - poses[last, j, 2]
                acc += np.sqrt(dx * dx + dy * dy + dz * dz)
            d = acc / num_joints
            if d < mind[i]:
                mind[i] = d
            m = mind[i]
            if m > best or (m == best and rank[i] < rank[best_i]):
                best = m
                best_i = i
        last = best_i
        selected[k] = last
        taken[last] = True
    return selected


@njit(cache=True)
def nms_1d(scores, radius, k):
    num = scores.shape[0]
    alive = np.ones(num, dtype=np.bool_)
    picks = np.empty(min(k, num), dtype=np.int64)
    # mergesort is stable, so equal scores keep lower indices first
    order = np.argsort(-scores, kind="mergesort")
    count = 0
    for idx in order:
        if count >= k:
            break
        if not alive[idx]:
            continue
        picks[count] = idx
        count += 1
        for i in range(max(0, idx - radius), min(num, idx + radius + 1)):
            alive[i] = False
    return picks[:count]


@njit(cache=True)
def greedy_match(iou, threshold):
    num_pred, num_gt = iou.shape
    tp = np.zeros(num_pred, dtype=np.bool_)
    used = np.zeros(num_gt, dtype=np.bool_)
    for i in range(num_pred):
        best = -1.0
        best_j = -1
        for j in range(num_gt):
            if not used[j] and iou[i, j] > best:
                best = iou[i, j]
                best_j = j
        if best_j >= 0 and best >= threshold:
            tp[i] = True
            used[best_j] = True
    return tp
