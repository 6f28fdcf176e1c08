"""Pure-numpy reference versions of the hot loops."""
import numpy as np


def fps_greedy(poses, start, n, rank):
    """Greedy furthest-point selection under mean per-joint distance.

    poses: (N, J, 3) float64, already aligned.
    start: position of the first pick.
    rank: (N,) int64 tie-break order; lower rank wins among equal distances.
    """
    num = poses.shape[0]
    selected = np.empty(n, dtype=np.int64)
    selected[0] = start
    mind = np.full(num, np.inf)
    taken = np.zeros(num, dtype=bool)
    taken[start] = True
    last = start
    for k in range(1, n):
        diff = poses - poses[last]
        d = np.sqrt((diff * diff).sum(axis=2)).mean(axis=1)
        np.minimum(mind, d, out=mind)
        masked = np.where(taken, -1.0, mind)
        best = masked.max()
        ties = np.flatnonzero(masked == best)
        last = int(ties[np.argmin(rank[ties])])
        selected[k] = last
        taken[last] = True
    return selected


def nms_1d(scores, radius, k):
    """Greedy 1-D non-maximum suppression; ties go to the lower index."""
    num = scores.shape[0]
    alive = np.ones(num, dtype=bool)
    # stable sort on -score keeps lower indices first among equal scores
    order = np.argsort(-scores, kind="stable")
    picks = []
    for idx in order:
        if len(picks) >= k:
            break
        if not alive[idx]:
            continue
        picks.append(int(idx))
        alive[max(0, idx - radius):idx + radius + 1] = False
    return np.asarray(picks, dtype=np.int64)


def greedy_match(iou, threshold):
    """One-to-one matching of score-sorted predictions (rows) to ground truths.

    Each prediction takes the unmatched ground truth with the highest IoU
    (lowest column on ties) when that IoU reaches ``threshold``.
    Returns a boolean true-positive flag per row.
    """
    num_pred, num_gt = iou.shape
    tp = np.zeros(num_pred, dtype=bool)
    used = np.zeros(num_gt, dtype=bool)
    for i in range(num_pred):
        if num_gt == 0:
            break
        row = np.where(used, -1.0, iou[i])
        j = int(np.argmax(row))
        if row[j] >= threshold:
            tp[i] = True
            used[j] = True
    return tp
