"""Gauss-Legendre quadrature over planar regions cut out by level functions.

A region of a parameter rectangle ``(s, q) in [s0, s1] x [q0, q1]`` is given
by a set of level functions (region boundaries are their zero sets) and a
membership predicate.  For each fixed outer coordinate ``s`` the inner
integral over ``q`` is split at the roots of the level functions, intervals
are classified by their midpoints and integrated with composite GL16.  The
outer integral is adaptive GL16 on intervals free of kinks, where a kink is
a value of ``s`` at which the number of roots along the line changes.

Both directions use the smoothstep substitution
``x = a + (b - a)(3 tau^2 - 2 tau^3)`` so square-root endpoint behaviour
(tangencies, fractional-power vertices) is integrated at full order.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

ORDER = 16
_X, _W = leggauss(ORDER)
_X = 0.5 * (_X + 1.0)  # on [0, 1]
_W = 0.5 * _W


class QuadratureError(RuntimeError):
    """Raised when refinement stalls above the error target."""


def smoothstep(tau):
    return tau * tau * (3.0 - 2.0 * tau), 6.0 * tau * (1.0 - tau)


def _panel_nodes(a, b, panels):
    """Graded nodes and weights for ``panels`` equal panels in tau on each
    interval ``[a_i, b_i]``; shapes ``(I, panels * ORDER)``."""
    a = np.asarray(a, float)[:, None]
    b = np.asarray(b, float)[:, None]
    t = (np.arange(panels)[:, None] + _X[None, :]).ravel() / panels
    w = np.tile(_W, panels) / panels
    s, ds = smoothstep(t)
    return a + (b - a) * s, (b - a) * (ds * w)


MAX_NODES = 1 << 18  # quadrature nodes per integrand call


def integrate_intervals(f, a, b, tol, owner=None, max_panels=512):
    """Integrate ``f`` over intervals ``[a_i, b_i]``, summed per ``owner``.

    ``f(nodes, idx)`` receives nodes of shape ``(I', M)`` for the interval
    indices ``idx`` and returns values of the same shape.  Panel counts
    double, for the intervals of unconverged owners only, until successive
    sums per owner agree to ``tol`` or to their rounding noise.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    if owner is None:
        owner = np.zeros(len(a), dtype=int)
    n_own = int(owner.max()) + 1 if len(owner) else 0
    if len(a) == 0:
        return np.zeros(n_own)
    eps = np.finfo(float).eps

    def sums(idx, panels):
        per = np.empty(len(idx))
        mag = np.empty(len(idx))
        step = max(1, MAX_NODES // (panels * ORDER))
        for i in range(0, len(idx), step):
            j = idx[i : i + step]
            x, w = _panel_nodes(a[j], b[j], panels)
            vals = f(x, j)
            per[i : i + step] = np.sum(vals * w, axis=-1)
            mag[i : i + step] = np.sum(np.abs(vals) * w, axis=-1)
        return per, mag

    out = np.zeros(n_own)
    idx = np.arange(len(a))
    panels = 1
    prev = sums(idx, panels)[0]
    while True:
        panels *= 2
        cur, mag = sums(idx, panels)
        own = owner[idx]
        diff = np.zeros(n_own)
        noise = np.zeros(n_own)
        np.add.at(diff, own, cur - prev)
        np.add.at(noise, own, mag)
        done_own = np.abs(diff) <= np.maximum(tol, 64 * eps * noise)
        fin = done_own[own]
        np.add.at(out, own[fin], cur[fin])
        if fin.all():
            return out
        if panels >= max_panels:
            bad = ~done_own & np.isin(np.arange(n_own), own)
            raise QuadratureError(
                f"inner refinement stalled: error {np.max(np.abs(diff[bad])):.3g} > {tol:.3g}"
            )
        idx, prev = idx[~fin], cur[~fin]


def adaptive_gl(f, a, b, tol, max_level=12, max_active=4096, batch=1024, rel_floor=None):
    """Adaptive GL16 of a vectorized scalar function over ``[a, b]`` with
    the smoothstep substitution.  Panels are bisected until the two-half
    estimate agrees with the whole-panel estimate, or differs from it by no
    more than ``rel_floor`` times the panel's absolute mass (default: the
    rounding noise of the panel sum).

    At most ``max_active`` panels are refined at once and ``f`` sees at most
    ``batch`` panels per call, which bounds memory.
    """
    if b <= a:
        return 0.0
    W = b - a
    if rel_floor is None:
        rel_floor = 64 * np.finfo(float).eps

    def g(tau):
        s, ds = smoothstep(tau)
        return f(a + W * s) * W * ds

    def panel(lo, hi):
        out = np.empty(len(lo))
        mag = np.empty(len(lo))
        for i in range(0, len(lo), batch):
            l, h = lo[i : i + batch], hi[i : i + batch]
            x = l[:, None] + (h - l)[:, None] * _X[None, :]
            vals = g(x.ravel()).reshape(x.shape)
            out[i : i + batch] = np.sum(vals * _W, axis=-1) * (h - l)
            mag[i : i + batch] = np.sum(np.abs(vals) * _W, axis=-1) * (h - l)
        return out, mag

    lo = np.array([0.0])
    hi = np.array([1.0])
    coarse = panel(lo, hi)[0]
    level = np.array([0])
    total = 0.0
    while len(lo):
        mid = 0.5 * (lo + hi)
        both, mag = panel(np.concatenate([lo, mid]), np.concatenate([mid, hi]))
        left, right = both[: len(lo)], both[len(lo) :]
        fine = left + right
        err = np.abs(fine - coarse)
        w = hi - lo  # fraction of [a, b] in tau
        noise = rel_floor * (mag[: len(lo)] + mag[len(lo) :])
        ok = err <= np.maximum(tol * w, noise)
        total += float(np.sum(fine[ok]))
        bad = ~ok
        if np.any(bad & (level >= max_level)) or 2 * np.count_nonzero(bad) > max_active:
            j = np.argmax(np.where(bad, err, -1.0))
            where = a + W * smoothstep(np.array([lo[j], hi[j]]))[0]
            why = f"after {max_level} levels" if level.max() >= max_level else f"with {2 * np.count_nonzero(bad)} active panels"
            raise QuadratureError(
                f"adaptive refinement stalled {why} "
                f"(error {err[j]:.3g} on [{where[0]:.12g}, {where[1]:.12g}])"
            )
        lo, mid, hi = lo[bad], mid[bad], hi[bad]
        level = level[bad] + 1
        coarse = np.concatenate([left[bad], right[bad]])
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
        level = np.concatenate([level, level])
    return total


# ---------------------------------------------------------------------------
# Root location along lines


def _sign(v):
    return np.where(v >= 0, 1, -1)


_GOLD = 0.5 * (np.sqrt(5.0) - 1.0)


def _brackets(levels, s, q_grid, golden_iters=30):
    """Root brackets of every level function along every line.

    Sign changes between grid nodes give one bracket each.  A node where
    the discrete slope changes sign, with no sign change next to it, may
    hide two roots inside a tangency; the extremum is located by golden
    section and, if it crosses zero, split into two brackets.

    Returns ``(p, l, lo, hi, sign_lo)`` arrays and root counts ``(P, L)``.
    """
    s = np.asarray(s, float)
    with np.errstate(invalid="ignore"):
        V = levels(s[:, None], q_grid[None, :])  # (P, K, L)
        sg = _sign(V)
        change = sg[:, 1:, :] != sg[:, :-1, :]
        dV = np.diff(V, axis=1)
        turn = (np.sign(dV[:, 1:, :]) * np.sign(dV[:, :-1, :])) < 0
    quiet = ~(change[:, 1:, :] | change[:, :-1, :])
    # a locally parabolic extremum lies within a few adjacent differences of
    # the node value; turns far from zero cannot hide a root pair
    with np.errstate(invalid="ignore"):
        reach = 4.0 * np.maximum(np.abs(dV[:, 1:, :]), np.abs(dV[:, :-1, :]))
        near = np.abs(V[:, 1:-1, :]) <= reach
    cand = turn & quiet & near & np.isfinite(V[:, 1:-1, :])
    p_idx, j_idx, l_idx = np.nonzero(change)
    lo = q_grid[j_idx]
    hi = q_grid[j_idx + 1]
    s_lo = sg[p_idx, j_idx, l_idx]
    counts = change.sum(axis=1)

    cp, cj, cl = np.nonzero(cand)
    if len(cp):
        cj = cj + 1  # node index of the turn
        sgn = sg[cp, cj, cl]
        a = q_grid[cj - 1].astype(float)
        b = q_grid[cj + 1].astype(float)
        sp = s[cp]
        rows = np.arange(len(cp))

        def g(x):
            with np.errstate(invalid="ignore"):
                return sgn * levels(sp, x)[rows, cl]

        def g_at(idx, x):
            with np.errstate(invalid="ignore"):
                return sgn[idx] * levels(sp[idx], x)[np.arange(len(idx)), cl[idx]]

        # golden section on the active set; a candidate retires as soon as
        # a sampled value crosses zero
        x1 = b - _GOLD * (b - a)
        x2 = a + _GOLD * (b - a)
        g1, g2 = g(x1), g(x2)
        xm = np.where(g1 < g2, x1, x2)
        gm = np.minimum(g1, g2)
        act = np.nonzero(gm >= 0)[0]
        for _ in range(golden_iters):
            if len(act) == 0:
                break
            A, B, X1, X2, G1, G2 = a[act], b[act], x1[act], x2[act], g1[act], g2[act]
            left = G1 < G2
            B = np.where(left, X2, B)
            A = np.where(left, A, X1)
            xn = np.where(left, B - _GOLD * (B - A), A + _GOLD * (B - A))
            gn = g_at(act, xn)
            X1, X2, G1, G2 = (
                np.where(left, xn, X2),
                np.where(left, X1, xn),
                np.where(left, gn, G2),
                np.where(left, G1, gn),
            )
            a[act], b[act], x1[act], x2[act], g1[act], g2[act] = A, B, X1, X2, G1, G2
            better = gn < gm[act]
            xm[act] = np.where(better, xn, xm[act])
            gm[act] = np.where(better, gn, gm[act])
            act = act[gm[act] >= 0]
        hit = gm < 0
        if np.any(hit):
            h = np.nonzero(hit)[0]
            q_l = q_grid[cj[h] - 1]
            q_r = q_grid[cj[h] + 1]
            p_idx = np.concatenate([p_idx, cp[h], cp[h]])
            l_idx = np.concatenate([l_idx, cl[h], cl[h]])
            lo = np.concatenate([lo, q_l, xm[h]])
            hi = np.concatenate([hi, xm[h], q_r])
            s_lo = np.concatenate([s_lo, sgn[h], -sgn[h]])
            np.add.at(counts, (cp[h], cl[h]), 2)
    return p_idx, l_idx, lo.astype(float), hi.astype(float), s_lo, counts


def _refined_roots(levels, s, q_grid, iters=100):
    """Brackets from :func:`_brackets` refined by the Illinois variant of
    false position, vectorized over brackets; a bisection step replaces any
    secant step that is non-finite or leaves the bracket."""
    s = np.asarray(s, float)
    p_idx, l_idx, lo, hi, s_lo, counts = _brackets(levels, s, q_grid)
    if len(p_idx) == 0:
        return p_idx, l_idx, np.zeros(0), counts
    sp = s[p_idx]

    def ev(idx, x):
        with np.errstate(invalid="ignore"):
            return levels(sp[idx], x)[np.arange(len(idx)), l_idx[idx]]

    allidx = np.arange(len(p_idx))
    a, b = lo.copy(), hi.copy()
    fa, fb = ev(allidx, a), ev(allidx, b)
    side = np.zeros(len(a), int)
    root = 0.5 * (a + b)
    act = allidx
    for it in range(iters):
        A, B, FA, FB = a[act], b[act], fa[act], fb[act]
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            c = B - FB * (B - A) / (FB - FA)
        mid = 0.5 * (A + B)
        bad = ~np.isfinite(c) | (c < A) | (c > B) | (it % 5 == 4)
        # at least a few ulps inside the bracket: an endpoint already at the
        # root then closes the bracket on the next step
        u = 8e-16 * np.maximum(1.0, np.maximum(np.abs(A), np.abs(B)))
        c = np.clip(c, A + u, B - u)
        c = np.where(bad | (B - A <= 2 * u), mid, c)
        fc = ev(act, c)
        exact = fc == 0
        with_a = (_sign(fc) == s_lo[act]) & ~exact
        with_b = ~with_a & ~exact
        sd = side[act]
        # Illinois: halve the stale endpoint's value when it is kept twice
        FB = np.where(with_a & (sd == 1) & np.isfinite(FB), 0.5 * FB, FB)
        FA = np.where(with_b & (sd == -1) & np.isfinite(FA), 0.5 * FA, FA)
        A = np.where(with_a, c, A)
        FA = np.where(with_a, fc, FA)
        B = np.where(with_b, c, B)
        FB = np.where(with_b, fc, FB)
        side[act] = np.where(with_a, 1, np.where(with_b, -1, sd))
        A = np.where(exact, c, A)
        B = np.where(exact, c, B)
        a[act], b[act], fa[act], fb[act] = A, B, FA, FB
        done = (B - A) <= 4e-16 * np.maximum(1.0, np.abs(B))
        root[act] = 0.5 * (A + B)
        act = act[~done]
        if len(act) == 0:
            break
    return p_idx, l_idx, root, counts


def line_roots(levels: Callable, s, q_grid):
    """Roots in ``q`` of every level function along the lines ``s_p``.

    ``levels(S, Q)`` maps broadcast arrays to values of shape
    ``S.shape + (L,)``.  Returns ``(p_idx, roots)`` flat arrays and the
    per-line, per-level root counts.
    """
    p_idx, _, roots, counts = _refined_roots(levels, s, q_grid)
    return p_idx, roots, counts


def root_counts(levels, s, q_grid):
    return _brackets(levels, s, q_grid)[-1]


def root_patterns(levels, s, q_grid):
    """Per line, the level indices of its roots listed in increasing ``q``.

    The pattern changes where a root appears or vanishes and where roots
    of two different levels swap order; both make the inner integral
    non-smooth in ``s``.
    """
    s = np.asarray(s, float)
    p_idx, l_idx, roots, _ = _refined_roots(levels, s, q_grid)
    order = np.lexsort((roots, p_idx))
    p_idx, l_idx = p_idx[order], l_idx[order]
    out = [()] * len(s)
    if len(p_idx):
        cuts = np.nonzero(np.diff(p_idx))[0] + 1
        for grp_p, grp_l in zip(np.split(p_idx, cuts), np.split(l_idx, cuts)):
            out[grp_p[0]] = tuple(int(v) for v in grp_l)
    return out


def _piece_samples(lo, hi, n_lin, n_geo, edge_frac):
    w = hi - lo
    lin = np.linspace(lo, hi, n_lin)[1:-1]
    geo = np.geomspace(edge_frac, 1.0 / (n_lin - 1), n_geo) * w
    pts = np.concatenate([lin, lo + geo, hi - geo])
    return np.unique(pts[(pts > lo) & (pts < hi)])


def locate_kinks(
    levels, s0, s1, q_grid, n_scan=257, iters=50, edge_frac=1e-9, n_sub=33, rounds=4, sections=16
):
    """Values of ``s`` in ``(s0, s1)`` where the root pattern changes.

    A first scan of ``n_scan`` points is followed by rounds that rescan each
    kink-free piece, since short-lived patterns (a root pair born and lost
    inside one scan cell) are otherwise missed.
    """
    found = []
    n_lin, n_geo, frac = n_scan, 24, edge_frac
    for _ in range(rounds):
        cuts = np.unique(np.concatenate([[s0, s1], found]))
        los, his = [], []
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            pts = _piece_samples(lo, hi, n_lin, n_geo, frac)
            if len(pts) < 2:
                continue
            pat = root_patterns(levels, pts, q_grid)
            for i in range(len(pts) - 1):
                if pat[i] != pat[i + 1]:
                    los.append(pts[i])
                    his.append(pts[i + 1])
        if not los:
            break
        lo = np.array(los)
        hi = np.array(his)
        p_lo = root_patterns(levels, lo, q_grid)
        # multisection: each pass samples ``sections - 1`` interior points
        # per interval and keeps the cell where the pattern first changes
        width = 1e-13 * (s1 - s0)
        frac = np.arange(1, sections) / sections
        for _ in range(iters):
            act = np.nonzero(hi - lo > width)[0]
            if len(act) == 0:
                break
            x = lo[act, None] + (hi - lo)[act, None] * frac[None, :]
            pm = root_patterns(levels, x.ravel(), q_grid)
            m = len(frac)
            for r, j in enumerate(act):
                row = pm[r * m : (r + 1) * m]
                first = next((i for i, pt in enumerate(row) if pt != p_lo[j]), m)
                new_lo = lo[j] if first == 0 else x[r, first - 1]
                new_hi = hi[j] if first == m else x[r, first]
                lo[j], hi[j] = new_lo, new_hi
        found.extend((0.5 * (lo + hi)).tolist())
        # later rounds stay clear of known kinks, where patterns are ambiguous
        n_lin, n_geo, frac = n_sub, 8, 1e-6
    found = np.unique(np.asarray(found, float))
    if len(found) > 1:
        found = found[np.concatenate([[True], np.diff(found) > 1e-12 * (s1 - s0)])]
    return found


def split_points(s0, s1, extra: Sequence[float] = (), min_gap=1e-13):
    pts = [s0, s1] + [float(e) for e in extra if s0 < e < s1]
    pts = np.unique(np.asarray(pts))
    keep = np.concatenate([[True], np.diff(pts) > min_gap * max(1.0, abs(s1 - s0))])
    pts = pts[keep]
    pts[-1] = s1
    return pts


def line_integrals(
    integrand: Callable,
    levels: Optional[Callable],
    member: Callable,
    s,
    q0: float,
    q1: float,
    q_grid,
    tol: Optional[float],
):
    """Inner integrals ``int_{q0}^{q1} [member] integrand dq`` along lines;
    ``tol=None`` applies a fixed four-panel rule instead of refining.

    ``integrand(S, Q)`` and ``member(S, Q)`` act on broadcast arrays.
    """
    s = np.asarray(s, float)
    P = len(s)
    if levels is not None:
        p_idx, roots, _ = line_roots(levels, s, q_grid)
    else:
        p_idx, roots = np.zeros(0, int), np.zeros(0)
    # assemble breakpoints per line
    bp_p = np.concatenate([np.arange(P), np.arange(P), p_idx])
    bp_q = np.concatenate([np.full(P, q0), np.full(P, q1), np.clip(roots, q0, q1)])
    order = np.lexsort((bp_q, bp_p))
    bp_p, bp_q = bp_p[order], bp_q[order]
    same_line = bp_p[1:] == bp_p[:-1]
    a = bp_q[:-1][same_line]
    b = bp_q[1:][same_line]
    own = bp_p[:-1][same_line]
    pos = b > a
    a, b, own = a[pos], b[pos], own[pos]
    if len(a) == 0:
        return np.zeros(P)
    inside = member(s[own], 0.5 * (a + b))
    a, b, own = a[inside], b[inside], own[inside]
    if len(a) == 0:
        return np.zeros(P)

    def f(x, idx):
        return integrand(np.broadcast_to(s[own[idx]][:, None], x.shape), x)

    if tol is None:
        # fixed four-panel rule, for magnitude estimates
        x, w = _panel_nodes(a, b, 4)
        out = np.zeros(P)
        np.add.at(out, own, np.sum(f(x, np.arange(len(a))) * w, axis=-1))
        return out
    out = integrate_intervals(f, a, b, tol, owner=own)
    full = np.zeros(P)
    full[: len(out)] = out
    return full


def region_integral(
    integrand,
    levels,
    member,
    s0,
    s1,
    q0,
    q1,
    tol=1e-9,
    outer_breaks: Sequence[float] = (),
    q_grid=None,
    max_level=12,
    rtol=0.0,
):
    """Double integral over ``{(s, q) : member}`` in the parameter rectangle.

    The absolute tolerance is ``max(tol, rtol * |I0|)`` with ``I0`` a
    one-panel estimate per kink-free piece.  With ``rtol`` set, outer panels
    are also accepted once their error is below ``rtol / 100`` of their
    absolute mass: inner integrals carry relative noise from root locations,
    which a narrow piece holding much of the mass cannot beat.
    """
    if q_grid is None:
        q_grid = default_q_grid(q0, q1)
    kinks = locate_kinks(levels, s0, s1, q_grid) if levels is not None else ()
    cuts = split_points(s0, s1, list(outer_breaks) + list(kinks))
    W = s1 - s0
    pieces = list(zip(cuts[:-1], cuts[1:]))
    if rtol > 0:
        est = 0.0
        for lo, hi in pieces:
            x, w = _panel_nodes(np.array([lo]), np.array([hi]), 1)
            v = line_integrals(integrand, levels, member, x[0], q0, q1, q_grid, None)
            est += float(np.sum(v * w[0]))
        tol = max(tol, rtol * abs(est))
    total = 0.0
    inner_tol = 0.1 * tol / max(W, 1e-300)
    floor = max(64 * np.finfo(float).eps, 0.01 * rtol) if rtol > 0 else None
    for lo, hi in pieces:
        def outer(sv):
            return line_integrals(integrand, levels, member, sv, q0, q1, q_grid, inner_tol)

        total += adaptive_gl(
            outer, lo, hi, 0.5 * tol * (hi - lo) / W, max_level=max_level, rel_floor=floor
        )
    return total


def default_q_grid(q0, q1, n_lin=257, n_geo=80):
    L = q1 - q0
    geo = q0 + np.geomspace(1e-10, 1.0, n_geo) * L
    return np.unique(np.concatenate([np.linspace(q0, q1, n_lin), geo]))


def line_integral_1d(integrand, levels, member, q0, q1, tol=1e-10, q_grid=None):
    """``int_{q0}^{q1} [member] integrand dq`` for functions of one variable."""
    if q_grid is None:
        q_grid = default_q_grid(q0, q1)
    lv = None if levels is None else (lambda S, Q: levels(np.broadcast_to(Q, np.broadcast_shapes(np.shape(S), np.shape(Q)))))
    mb = lambda S, Q: member(Q)
    ig = lambda S, Q: integrand(Q)
    return float(line_integrals(ig, lv, mb, np.zeros(1), q0, q1, q_grid, tol)[0])
