"""Smith normal form of small integer matrices with transforms."""

from __future__ import annotations


def _copy(A):
    return [list(r) for r in A]


def _identity(n):
    return [[int(i == j) for j in range(n)] for i in range(n)]


def smith_normal_form(A: list[list[int]]):
    """Return ``(U, D, V)`` with ``U @ A @ V == D`` and unimodular U, V.

    ``D`` is diagonal with non-negative entries, each dividing the next.
    Plain Python integers, so intermediate growth is harmless.
    """
    D = _copy(A)
    n = len(D)
    m = len(D[0]) if n else 0
    U = _identity(n)
    V = _identity(m)

    def swap_rows(i, j):
        D[i], D[j] = D[j], D[i]
        U[i], U[j] = U[j], U[i]

    def swap_cols(i, j):
        for R in D:
            R[i], R[j] = R[j], R[i]
        for R in V:
            R[i], R[j] = R[j], R[i]

    def add_row(src, dst, k):  # row_dst += k * row_src
        if k:
            D[dst] = [a + k * b for a, b in zip(D[dst], D[src])]
            U[dst] = [a + k * b for a, b in zip(U[dst], U[src])]

    def add_col(src, dst, k):
        if k:
            for R in D:
                R[dst] += k * R[src]
            for R in V:
                R[dst] += k * R[src]

    t = 0
    while t < min(n, m):
        # pivot: smallest nonzero absolute value in the remaining block
        best = None
        for i in range(t, n):
            for j in range(t, m):
                if D[i][j] and (best is None or abs(D[i][j]) < abs(D[best[0]][best[1]])):
                    best = (i, j)
        if best is None:
            break
        swap_rows(t, best[0])
        swap_cols(t, best[1])
        done = False
        while not done:
            done = True
            piv = D[t][t]
            for i in range(t + 1, n):
                if D[i][t]:
                    add_row(t, i, -(D[i][t] // piv))
                    if D[i][t]:
                        done = False
            for j in range(t + 1, m):
                if D[t][j]:
                    add_col(t, j, -(D[t][j] // piv))
                    if D[t][j]:
                        done = False
            if not done:
                # move the smallest leftover entry of row/column t to the pivot
                cand = [(abs(D[i][t]), i, t) for i in range(t + 1, n) if D[i][t]]
                cand += [(abs(D[t][j]), t, j) for j in range(t + 1, m) if D[t][j]]
                _, i, j = min(cand)
                if j == t:
                    swap_rows(t, i)
                else:
                    swap_cols(t, j)
                continue
            # divisibility of the rest of the block by the pivot
            bad = None
            for i in range(t + 1, n):
                for j in range(t + 1, m):
                    if D[i][j] % piv:
                        bad = i
                        break
                if bad is not None:
                    break
            if bad is not None:
                add_row(bad, t, 1)
                done = False
        if D[t][t] < 0:
            D[t] = [-x for x in D[t]]
            U[t] = [-x for x in U[t]]
        t += 1
    return U, D, V
