# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: backtracking walk counter and flatPERM tour batch.

Mirrors ``_pykernels`` exactly; see that module for the contracts.
"""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t
from libc.stdlib cimport calloc, free

from pulledsaw._pykernels import KernelOverflow, NodeLimitExceeded

cnp.import_array()

IMPLEMENTATION = "cython"

cdef enum:
    MAXD = 8
    BIG = 1073741824
cdef uint64_t UMAX = <uint64_t>0xFFFFFFFFFFFFFFFF
cdef uint64_t GOLDEN = <uint64_t>0x9E3779B97F4A7C15ULL
cdef double TWO_M53 = 1.0 / 9007199254740992.0
cdef int MAX_COPIES = 4
cdef double MIN_SURVIVAL = 0.25


cdef struct Counter:
    int d
    int n_max
    int cls
    int symmetric
    int zax
    uint64_t mult
    unsigned char* occ
    long delta[2 * MAXD]
    int dx[2 * MAXD]
    int dz[2 * MAXD]
    int axis[2 * MAXD]
    uint64_t* counts
    int nv
    int nh
    int64_t budget
    int limited
    int status       # 0 ok, 1 overflow, 2 node limit
    int of_n
    int of_v
    int of_h


cdef long _setup_lattice(int d, int n_max, long* delta, int* dx, int* dz, int* axis, long* centre) except -1:
    cdef long L = 2 * n_max + 3
    cdef long size = 1
    cdef long stride = 1
    cdef int a
    for a in range(d):
        size *= L
        if size > 400000000:
            raise MemoryError("occupancy lattice too large for this dimension and length")
    centre[0] = 0
    for a in range(d):
        delta[2 * a] = stride
        delta[2 * a + 1] = -stride
        axis[2 * a] = a
        axis[2 * a + 1] = a
        dx[2 * a] = 1 if a == 0 else 0
        dx[2 * a + 1] = -1 if a == 0 else 0
        dz[2 * a] = 1 if a == d - 1 else 0
        dz[2 * a + 1] = -1 if a == d - 1 else 0
        centre[0] += (n_max + 1) * stride
        stride *= L
    return size


cdef void _visit(Counter* c, int n, long pos, int x, int z, int v,
                 int minint, int maxint, int has_lat) noexcept nogil:
    cdef int k, nz, nmin, nmax, nvis
    cdef long npos, idx
    cdef uint64_t m
    cdef bint ok = True
    if c.limited:
        c.budget -= 1
        if c.budget < 0:
            c.status = 2
            return
    if c.cls == 1:
        if minint < 0:
            return
        ok = n < 2 or maxint < x
    if ok:
        if c.cls == 2:
            idx = (<long>n * c.nv) * c.nh + (z + c.n_max)
        else:
            idx = (<long>n * c.nv + v) * c.nh + (z + c.n_max)
        m = c.mult if has_lat else 1
        if c.counts[idx] > UMAX - m:
            c.status = 1
            c.of_n = n
            c.of_v = v if c.cls != 2 else 0
            c.of_h = z
            return
        c.counts[idx] += m
    if n == c.n_max:
        return
    for k in range(2 * c.d):
        if c.status:
            return
        if c.symmetric and not has_lat and c.axis[k] != c.zax and k != 0:
            continue
        nz = z + c.dz[k]
        if c.cls != 2 and nz < 0:
            continue
        npos = pos + c.delta[k]
        if c.occ[npos]:
            continue
        c.occ[npos] = 1
        if n >= 1:
            nmin = minint if minint < x else x
            nmax = maxint if maxint > x else x
        else:
            nmin = minint
            nmax = maxint
        nvis = v + 1 if (c.cls != 2 and nz == 0) else v
        _visit(c, n + 1, npos, x + c.dx[k], nz, nvis, nmin, nmax,
               has_lat or c.axis[k] != c.zax)
        c.occ[npos] = 0


def count_walks(int d, int n_max, int cls, prefix=(), bint symmetric=False,
                long long node_limit=0):
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if d > MAXD:
        raise ValueError(f"dimension must be <= {MAXD}")
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    if cls not in (0, 1, 2):
        raise ValueError(f"unknown class code {cls}")
    cdef Counter c
    cdef long centre
    cdef long size = _setup_lattice(d, n_max, c.delta, c.dx, c.dz, c.axis, &centre)
    cdef cnp.ndarray[cnp.uint64_t, ndim=3] out = np.zeros(
        (n_max + 1, n_max + 1, 2 * n_max + 1), dtype=np.uint64)
    c.d = d
    c.n_max = n_max
    c.cls = cls
    c.symmetric = symmetric
    c.zax = d - 1
    c.mult = <uint64_t>(2 * (d - 1)) if (symmetric and d >= 2) else 1
    c.nv = n_max + 1
    c.nh = 2 * n_max + 1
    c.counts = <uint64_t*>out.data
    c.budget = node_limit
    c.limited = node_limit > 0
    c.status = 0
    c.occ = <unsigned char*>calloc(size, 1)
    if c.occ == NULL:
        raise MemoryError()
    cdef long pos = centre
    cdef int x = 0, z = 0, v = 0, n = 0, k, nz
    cdef int minint = BIG, maxint = -BIG
    cdef int has_lat = 0
    try:
        c.occ[pos] = 1
        for k in prefix:
            if k < 0 or k >= 2 * d:
                raise ValueError(f"bad direction {k}")
            if symmetric and not has_lat and c.axis[k] != c.zax and k != 0:
                return out
            nz = z + c.dz[k]
            if cls != 2 and nz < 0:
                return out
            if c.occ[pos + c.delta[k]]:
                return out
            if n >= 1:
                minint = min(minint, x)
                maxint = max(maxint, x)
            pos += c.delta[k]
            c.occ[pos] = 1
            x += c.dx[k]
            z = nz
            if cls != 2 and nz == 0:
                v += 1
            has_lat = has_lat or c.axis[k] != c.zax
            n += 1
        if n > n_max:
            return out
        with nogil:
            _visit(&c, n, pos, x, z, v, minint, maxint, has_lat)
    finally:
        free(c.occ)
    if c.status == 1:
        raise KernelOverflow(c.of_n, c.of_v, c.of_h)
    if c.status == 2:
        raise NodeLimitExceeded(f"node limit {node_limit} exceeded")
    return out


cdef struct Perm:
    int d
    int n_max
    int nstep
    unsigned char* occ
    long delta[2 * MAXD]
    int dx[2 * MAXD]
    int dz[2 * MAXD]
    int axis[2 * MAXD]
    double* wsum
    double* wcomp
    int64_t* samples
    int* atm
    long stride
    double S
    uint64_t rng


cdef inline uint64_t _draw(Perm* p) noexcept nogil:
    cdef uint64_t z
    p.rng += GOLDEN
    z = p.rng
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline long _record(Perm* p, int n, int v, int z, double W) noexcept nogil:
    cdef long idx = (n * p.stride + v) * p.stride + z
    cdef double y = W - p.wcomp[idx]
    cdef double t = p.wsum[idx] + y
    p.wcomp[idx] = (t - p.wsum[idx]) - y
    p.wsum[idx] = t
    p.samples[idx] += 1
    return idx


cdef void _grow(Perm* p, int n, long pos, int z, int v, double W) noexcept nogil:
    cdef long idx = _record(p, n, v, z, W)
    cdef int* atm
    cdef int m = 0, k, i, j, tmp, nz, dirn
    cdef double est, r, prob, u, Wn
    cdef long npos
    if n == p.n_max:
        return
    atm = p.atm + n * p.nstep
    for k in range(p.nstep):
        nz = z + p.dz[k]
        if nz < 0:
            continue
        if p.occ[pos + p.delta[k]]:
            continue
        atm[m] = k
        m += 1
    if m == 0:
        return
    est = p.wsum[idx] / p.S
    r = W / est
    if r > 1.0:
        if r >= MAX_COPIES:
            k = MAX_COPIES
        else:
            k = <int>r
        if k > m:
            k = m
        Wn = W * <double>m / <double>k
    else:
        prob = r if r > MIN_SURVIVAL else MIN_SURVIVAL
        u = <double>(_draw(p) >> 11) * TWO_M53
        if u >= prob:
            return
        k = 1
        Wn = (W / prob) * <double>m
    for i in range(k):
        j = i + <int>(_draw(p) % <uint64_t>(m - i))
        tmp = atm[i]
        atm[i] = atm[j]
        atm[j] = tmp
    for i in range(k):
        dirn = atm[i]
        npos = pos + p.delta[dirn]
        nz = z + p.dz[dirn]
        p.occ[npos] = 1
        _grow(p, n + 1, npos, nz, v + (1 if nz == 0 else 0), Wn)
        p.occ[npos] = 0


def flatperm_batch(int d, int n_max, long long tours, key):
    if d < 2:
        raise ValueError("flatPERM needs d >= 2")
    if d > MAXD:
        raise ValueError(f"dimension must be <= {MAXD}")
    if n_max < 1 or tours < 1:
        raise ValueError("n_max and tours must be >= 1")
    cdef Perm p
    cdef long centre
    cdef long size = _setup_lattice(d, n_max, p.delta, p.dx, p.dz, p.axis, &centre)
    shape = (n_max + 1, n_max + 1, n_max + 1)
    cdef cnp.ndarray[cnp.float64_t, ndim=3] wsum = np.zeros(shape)
    cdef cnp.ndarray[cnp.float64_t, ndim=3] wcomp = np.zeros(shape)
    cdef cnp.ndarray[cnp.int64_t, ndim=3] samples = np.zeros(shape, dtype=np.int64)
    p.d = d
    p.n_max = n_max
    p.nstep = 2 * d
    p.wsum = <double*>wsum.data
    p.wcomp = <double*>wcomp.data
    p.samples = <int64_t*>samples.data
    p.stride = n_max + 1
    p.S = 0.0
    p.rng = <uint64_t>(int(key) & 0xFFFFFFFFFFFFFFFF)
    p.occ = <unsigned char*>calloc(size, 1)
    p.atm = <int*>calloc((n_max + 1) * 2 * d, sizeof(int))
    if p.occ == NULL or p.atm == NULL:
        free(p.occ)
        free(p.atm)
        raise MemoryError()
    cdef long long t
    cdef int k, nz
    cdef long npos
    try:
        with nogil:
            p.occ[centre] = 1
            for t in range(tours):
                p.S += 1.0
                _record(&p, 0, 0, 0, 1.0)
                for k in range(p.nstep):
                    nz = p.dz[k]
                    if nz < 0:
                        continue
                    npos = centre + p.delta[k]
                    p.occ[npos] = 1
                    _grow(&p, 1, npos, nz, 1 if nz == 0 else 0, 1.0)
                    p.occ[npos] = 0
    finally:
        free(p.occ)
        free(p.atm)
    return wsum, wcomp, samples
