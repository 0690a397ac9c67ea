"""Pure-Python kernels.

Same signatures as the compiled ``_ckernels`` module and, for the Monte
Carlo kernel, the same floating-point operation order, so both produce
bit-identical output for a given key.
"""
import numpy as np

POSITIVE, UNFOLDED, FULL = 0, 1, 2

MASK64 = (1 << 64) - 1
UINT64_MAX = MASK64
GOLDEN = 0x9E3779B97F4A7C15
TWO_M53 = 1.0 / 9007199254740992.0
MAX_COPIES = 4
MIN_SURVIVAL = 0.25

IMPLEMENTATION = "python"


class KernelOverflow(OverflowError):
    def __init__(self, n, v, h):
        super().__init__(f"count overflow at n={n}, v={v}, h={h}")
        self.cell = (n, v, h)


class NodeLimitExceeded(RuntimeError):
    pass


def directions(d):
    """Unit steps in the fixed order used by both kernels: +e0, -e0, +e1, ..."""
    out = []
    for axis in range(d):
        for sign in (1, -1):
            step = [0] * d
            step[axis] = sign
            out.append(tuple(step))
    return out


def _check_args(d, n_max, cls):
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    if cls not in (POSITIVE, UNFOLDED, FULL):
        raise ValueError(f"unknown class code {cls}")


def count_walks(d, n_max, cls, prefix=(), symmetric=False, node_limit=0):
    """Count walks extending ``prefix`` (inclusive) up to length ``n_max``.

    Returns a uint64 array indexed ``[n, v, h + n_max]``.  Walks shorter
    than ``len(prefix)`` are not counted.  An invalid prefix yields zeros.
    With ``symmetric`` the first lateral (non-z) step is forced to +x and
    walks that took one are counted with multiplicity ``2(d-1)``.
    """
    _check_args(d, n_max, cls)
    counts = {}
    steps = directions(d)
    zax = d - 1
    mult = 2 * (d - 1) if (symmetric and d >= 2) else 1
    BIG = 1 << 30

    # replay the prefix
    pos = (0,) * d
    occupied = {pos}
    x = z = v = 0
    minint, maxint = BIG, -BIG
    has_lat = False
    for n, k in enumerate(prefix):
        step = steps[k]
        axis = k // 2
        if symmetric and not has_lat and axis != zax and k != 0:
            return _to_array(counts, n_max)
        nz = z + step[zax]
        if cls != FULL and nz < 0:
            return _to_array(counts, n_max)
        npos = tuple(p + s for p, s in zip(pos, step))
        if npos in occupied:
            return _to_array(counts, n_max)
        if n >= 1:
            minint = min(minint, x)
            maxint = max(maxint, x)
        occupied.add(npos)
        pos, x, z = npos, x + step[0], nz
        if cls != FULL and nz == 0:
            v += 1
        has_lat = has_lat or axis != zax
    budget = [node_limit]

    def visit(n, pos, x, z, v, minint, maxint, has_lat):
        if node_limit:
            budget[0] -= 1
            if budget[0] < 0:
                raise NodeLimitExceeded(f"node limit {node_limit} exceeded")
        if cls == UNFOLDED:
            if minint < 0:
                return
            ok = n < 2 or maxint < x
        else:
            ok = True
        if ok:
            key = (n, v, z + n_max) if cls != FULL else (n, 0, z + n_max)
            counts[key] = counts.get(key, 0) + (mult if has_lat else 1)
            if counts[key] > UINT64_MAX:
                raise KernelOverflow(n, key[1], z)
        if n == n_max:
            return
        for k, step in enumerate(steps):
            axis = k // 2
            if symmetric and not has_lat and axis != zax and k != 0:
                continue
            nz = z + step[zax]
            if cls != FULL and nz < 0:
                continue
            npos = tuple(p + s for p, s in zip(pos, step))
            if npos in occupied:
                continue
            occupied.add(npos)
            if n >= 1:
                nmin, nmax = min(minint, x), max(maxint, x)
            else:
                nmin, nmax = minint, maxint
            nv = v + 1 if (cls != FULL and nz == 0) else v
            visit(n + 1, npos, x + step[0], nz, nv, nmin, nmax,
                  has_lat or axis != zax)
            occupied.discard(npos)

    visit(len(prefix), pos, x, z, v, minint, maxint, has_lat)
    return _to_array(counts, n_max)


def _to_array(counts, n_max):
    arr = np.zeros((n_max + 1, n_max + 1, 2 * n_max + 1), dtype=np.uint64)
    for (n, v, hi), c in counts.items():
        arr[n, v, hi] = c
    return arr


def _splitmix(state):
    state = (state + GOLDEN) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


def flatperm_batch(d, n_max, tours, key):
    """Run ``tours`` flatPERM tours of positive walks from one RNG stream.

    Returns ``(wsum, wcomp, samples)`` arrays indexed ``[n, v, h]``; the
    compensated weight total of a cell is ``wsum - wcomp``.
    """
    if d < 2:
        raise ValueError("flatPERM needs d >= 2")
    if n_max < 1 or tours < 1:
        raise ValueError("n_max and tours must be >= 1")
    shape = (n_max + 1, n_max + 1, n_max + 1)
    size = shape[0] * shape[1] * shape[2]
    wsum = [0.0] * size
    wcomp = [0.0] * size
    samples = [0] * size
    steps = directions(d)
    zax = d - 1
    nstep = len(steps)
    stride = (n_max + 1)
    state = [key & MASK64]
    S = [0]
    occupied = set()

    def draw():
        state[0], out = _splitmix(state[0])
        return out

    def record(n, v, z, W):
        idx = (n * stride + v) * stride + z
        y = W - wcomp[idx]
        t = wsum[idx] + y
        wcomp[idx] = (t - wsum[idx]) - y
        wsum[idx] = t
        samples[idx] += 1
        return idx

    def grow(n, pos, z, v, W):
        idx = record(n, v, z, W)
        if n == n_max:
            return
        atm = []
        for k in range(nstep):
            step = steps[k]
            nz = z + step[zax]
            if nz < 0:
                continue
            if tuple(p + s for p, s in zip(pos, step)) in occupied:
                continue
            atm.append(k)
        m = len(atm)
        if m == 0:
            return
        est = wsum[idx] / S[0]
        r = W / est
        if r > 1.0:
            k = MAX_COPIES if r >= MAX_COPIES else int(r)
            if k > m:
                k = m
            Wn = W * m / k
        else:
            p = r if r > MIN_SURVIVAL else MIN_SURVIVAL
            u = (draw() >> 11) * TWO_M53
            if u >= p:
                return
            k = 1
            Wn = (W / p) * m
        for i in range(k):
            j = i + draw() % (m - i)
            atm[i], atm[j] = atm[j], atm[i]
        for i in range(k):
            step = steps[atm[i]]
            npos = tuple(p + s for p, s in zip(pos, step))
            nz = z + step[zax]
            occupied.add(npos)
            grow(n + 1, npos, nz, v + (1 if nz == 0 else 0), Wn)
            occupied.discard(npos)

    origin = (0,) * d
    for _ in range(tours):
        S[0] += 1
        occupied.clear()
        occupied.add(origin)
        record(0, 0, 0, 1.0)
        for k in range(nstep):
            step = steps[k]
            nz = step[zax]
            if nz < 0:
                continue
            occupied.add(step)
            grow(1, step, nz, 1 if nz == 0 else 0, 1.0)
            occupied.discard(step)

    return (np.array(wsum).reshape(shape), np.array(wcomp).reshape(shape),
            np.array(samples, dtype=np.int64).reshape(shape))
