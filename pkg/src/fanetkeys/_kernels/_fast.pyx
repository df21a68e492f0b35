# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot kernels (see pure.py for the spec)."""

import numpy as np


def contact_pairs_idx(double[:, ::1] pos, double r):
    cdef int n = pos.shape[0]
    cdef int m_max = n * (n - 1) // 2
    ii_arr = np.empty(m_max, dtype=np.int32)
    jj_arr = np.empty(m_max, dtype=np.int32)
    cdef int[::1] ii = ii_arr
    cdef int[::1] jj = jj_arr
    cdef double r2 = r * r
    cdef double dx, dy, dz
    cdef int i, j, m = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = pos[i, 0] - pos[j, 0]
            dy = pos[i, 1] - pos[j, 1]
            dz = pos[i, 2] - pos[j, 2]
            if dx * dx + dy * dy + dz * dz <= r2:
                ii[m] = i
                jj[m] = j
                m += 1
    return ii_arr[:m].copy(), jj_arr[:m].copy()


def component_labels(int[::1] indptr, int[::1] indices, int n):
    labels_arr = np.full(n, -1, dtype=np.int32)
    cdef int[::1] labels = labels_arr
    q_arr = np.empty(n, dtype=np.int32)
    cdef int[::1] q = q_arr
    cdef int label = 0
    cdef int seed, head, tail, u, v, k
    for seed in range(n):
        if labels[seed] >= 0:
            continue
        labels[seed] = label
        q[0] = seed
        head = 0
        tail = 1
        while head < tail:
            u = q[head]
            head += 1
            for k in range(indptr[u], indptr[u + 1]):
                v = indices[k]
                if labels[v] < 0:
                    labels[v] = label
                    q[tail] = v
                    tail += 1
        label += 1
    return labels_arr


def all_pairs_hops(int[::1] indptr, int[::1] indices, int n):
    dist_arr = np.full((n, n), -1, dtype=np.int32)
    cdef int[:, ::1] dist = dist_arr
    q_arr = np.empty(n, dtype=np.int32)
    cdef int[::1] q = q_arr
    cdef int s, head, tail, u, v, k
    for s in range(n):
        dist[s, s] = 0
        q[0] = s
        head = 0
        tail = 1
        while head < tail:
            u = q[head]
            head += 1
            for k in range(indptr[u], indptr[u + 1]):
                v = indices[k]
                if dist[s, v] < 0:
                    dist[s, v] = dist[s, u] + 1
                    q[tail] = v
                    tail += 1
    return dist_arr


def bfs_tree(int[::1] indptr, int[::1] indices, int n):
    # Level-synchronous BFS, each level processed in ascending node order so
    # parent[s, v] lands on the lowest-index predecessor.
    dist_arr = np.full((n, n), -1, dtype=np.int32)
    parent_arr = np.full((n, n), -1, dtype=np.int32)
    cdef int[:, ::1] dist = dist_arr
    cdef int[:, ::1] parent = parent_arr
    cur_arr = np.empty(n, dtype=np.int32)
    cdef int[::1] cur = cur_arr
    mask_arr = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] mask = mask_arr
    cdef int s, u, v, k, i, d, cur_len
    for s in range(n):
        dist[s, s] = 0
        cur[0] = s
        cur_len = 1
        d = 0
        while cur_len > 0:
            d += 1
            for i in range(cur_len):
                u = cur[i]
                for k in range(indptr[u], indptr[u + 1]):
                    v = indices[k]
                    if dist[s, v] < 0 and mask[v] == 0:
                        mask[v] = 1
                        parent[s, v] = u
            cur_len = 0
            for v in range(n):
                if mask[v]:
                    dist[s, v] = d
                    cur[cur_len] = v
                    cur_len += 1
                    mask[v] = 0
    return dist_arr, parent_arr


def path_expand_sums(int[:, ::1] key_dist, int[:, ::1] key_parent, int[:, ::1] phys_dist):
    cdef int n = key_dist.shape[0]
    out_arr = np.full((n, n), -1, dtype=np.int64)
    cdef long long[:, ::1] out = out_arr
    cdef int s, t, u, v, seg, ok
    cdef long long total
    for s in range(n):
        out[s, s] = 0
    for s in range(n - 1):
        for t in range(s + 1, n):
            if key_dist[s, t] <= 0:
                continue
            total = 0
            v = t
            ok = 1
            while v != s:
                u = key_parent[s, v]
                seg = phys_dist[u, v]
                if seg < 0:
                    ok = 0
                    break
                total += seg
                v = u
            if ok:
                out[s, t] = total
    return out_arr
