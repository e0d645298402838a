# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled SCHED core: non-preemptive EDF on the most-loaded logical core.

Jobs live in two binary min-heaps of packed ``key * n + vehicle`` integers,
so ties on the key resolve to the lowest vehicle index.
"""

from libc.stdlib cimport malloc, free

ctypedef long long i64


cdef inline void _push(i64 *heap, i64 *size, i64 item) noexcept nogil:
    cdef i64 pos = size[0]
    cdef i64 parent
    size[0] += 1
    while pos > 0:
        parent = (pos - 1) >> 1
        if heap[parent] <= item:
            break
        heap[pos] = heap[parent]
        pos = parent
    heap[pos] = item


cdef inline i64 _pop(i64 *heap, i64 *size) noexcept nogil:
    cdef i64 top = heap[0]
    cdef i64 n = size[0] - 1
    cdef i64 last = heap[n]
    cdef i64 pos = 0, child
    size[0] = n
    while True:
        child = 2 * pos + 1
        if child >= n:
            break
        if child + 1 < n and heap[child + 1] < heap[child]:
            child += 1
        if heap[child] >= last:
            break
        heap[pos] = heap[child]
        pos = child
    if n > 0:
        heap[pos] = last
    return top


def sched_core(i64 vehicles, i64 transfer, i64 exec_time, i64 deadline,
               i64 period):
    """Return ``(misses, max_response, completed)``."""
    cdef i64 *offload = <i64 *>malloc(vehicles * sizeof(i64))
    cdef i64 *pending = <i64 *>malloc(vehicles * sizeof(i64))
    cdef i64 *ready = <i64 *>malloc(vehicles * sizeof(i64))
    if offload == NULL or pending == NULL or ready == NULL:
        free(offload)
        free(pending)
        free(ready)
        raise MemoryError()
    cdef i64 n_pending = 0, n_ready = 0
    cdef i64 i, j, item, due, finish, response
    cdef i64 k = 0, misses = 0, rmax = 0, done = 0
    with nogil:
        for i in range(vehicles):
            offload[i] = 0
            _push(pending, &n_pending, transfer * vehicles + i)
        while k < period:
            while n_pending > 0 and pending[0] // vehicles <= k:
                item = _pop(pending, &n_pending)
                i = item % vehicles
                _push(ready, &n_ready, (offload[i] + deadline) * vehicles + i)
            if n_ready == 0:
                # idle until the next arrival
                k = pending[0] // vehicles
                continue
            if k > period - exec_time:
                break
            item = _pop(ready, &n_ready)
            j = item % vehicles
            due = item // vehicles
            finish = k + exec_time
            k = finish
            if finish > due:
                misses += 1
            response = finish - offload[j]
            if response > rmax:
                rmax = response
            done += 1
            offload[j] = finish
            _push(pending, &n_pending, (finish + transfer) * vehicles + j)
    free(offload)
    free(pending)
    free(ready)
    return misses, rmax, done
