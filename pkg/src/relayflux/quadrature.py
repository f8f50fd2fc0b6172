"""Batched adaptive Gauss-Kronrod (7/15) quadrature for vector-valued integrands.

Many independent integrals ("groups") are refined together so that every
integrand call is one large numpy evaluation. Each group has its own set of
panels; refinement stops per group once the summed Kronrod-Gauss error drops
below ``max(rtol * |I|, atol)`` for every component.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Kronrod 15-point abscissae on [-1, 1]; the odd-indexed ones carry the 7-point Gauss rule.
_XK = np.array([
    -0.991455371120812639206854697526329,
    -0.949107912342758524526189684047851,
    -0.864864423359769072789712788640926,
    -0.741531185599394439863864773280788,
    -0.586087235467691130294144845693013,
    -0.405845151377397166906606412076961,
    -0.207784955007898467600689403773245,
    0.0,
    0.207784955007898467600689403773245,
    0.405845151377397166906606412076961,
    0.586087235467691130294144845693013,
    0.741531185599394439863864773280788,
    0.864864423359769072789712788640926,
    0.949107912342758524526189684047851,
    0.991455371120812639206854697526329,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
    0.204432940075298892414161999234649,
    0.190350578064785409913256402421014,
    0.169004726639267902826583426598550,
    0.140653259715525918745189590510238,
    0.104790010322250183839876322541518,
    0.063092092629978553290700663189204,
    0.022935322010529224963732008058970,
])
_WG = np.zeros(15)
_WG[1::2] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
    0.381830050505118944950369775488975,
    0.279705391489276667901467771423780,
    0.129484966168869693270611432679082,
]
NODES_PER_PANEL = 15


class NonConvergenceError(ArithmeticError):
    """Adaptive refinement hit its budget before meeting the tolerance."""

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


@dataclass
class BatchResult:
    value: np.ndarray  # (groups, components)
    error: np.ndarray  # (groups, components)
    converged: np.ndarray  # (groups,)
    neval: int
    panels: list  # per group: (a, b) edge arrays of the final partition


def _apply_rule(f, owner, a, b):
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    x = mid[:, None] + half[:, None] * _XK[None, :]
    own = np.broadcast_to(owner[:, None], x.shape)
    vals = f(own.ravel(), x.ravel())
    vals = np.asarray(vals, dtype=float).reshape(x.shape + (-1,))
    kr = np.einsum("pnc,n->pc", vals, _WK)
    gr = np.einsum("pnc,n->pc", vals, _WG)
    h = np.abs(half)[:, None]
    # QUADPACK qk15 error scaling
    mean = 0.5 * kr
    resasc = np.einsum("pnc,n->pc", np.abs(vals - mean[:, None, :]), _WK) * h
    raw = np.abs(kr - gr) * h
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = resasc * np.minimum(1.0, (200.0 * raw / resasc) ** 1.5)
    err = np.where((resasc > 0) & (raw > 0), scaled, raw)
    return kr * half[:, None], err, np.abs(vals).max(axis=1)


def _group_sum(owner, x, n_groups):
    """Per-group column sums, accumulated in panel order."""
    return np.stack([np.bincount(owner, weights=x[:, c], minlength=n_groups)
                     for c in range(x.shape[1])], axis=1)


def integrate_batch(f, owner, a, b, n_groups, *, rtol, atol=0.0, max_iter=40, max_panels=4000):
    """Integrate ``f`` over the panels ``(owner[i], a[i], b[i])``.

    ``f(owner, x)`` receives flat arrays and returns ``(len(x), C)`` values
    (or ``(len(x),)`` for scalar integrands). ``atol`` may be a scalar or a
    per-component array. Panels of a group that has not converged are bisected
    when their error exceeds the group tolerance divided by the panel count.
    """
    owner = np.asarray(owner, dtype=np.intp)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    k, e, _ = _apply_rule(f, owner, a, b)
    neval = a.size * NODES_PER_PANEL
    n_comp = k.shape[1]
    atol = np.broadcast_to(np.asarray(atol, dtype=float), (n_comp,))
    converged = np.zeros(n_groups, dtype=bool)

    for _ in range(max_iter):
        value = _group_sum(owner, k, n_groups)
        error = _group_sum(owner, e, n_groups)
        tol = np.maximum(rtol * np.abs(value), atol[None, :])
        converged = np.all(error <= tol, axis=1)
        if converged.all():
            break
        counts = np.bincount(owner, minlength=n_groups)
        share = tol[owner] / counts[owner, None]
        split = (~converged[owner]) & np.any(e > share, axis=1)
        if not split.any():
            # errors spread evenly: bisect the worst panel of each open group
            ratio = np.max(e / np.maximum(tol[owner], 1e-300), axis=1)
            ratio[converged[owner]] = -1.0
            split = np.zeros_like(split)
            for g in np.nonzero(~converged)[0]:
                idx = np.nonzero(owner == g)[0]
                split[idx[np.argmax(ratio[idx])]] = True
        # groups at their panel budget stop refining
        full = counts + np.bincount(owner[split], minlength=n_groups) > max_panels
        split &= ~full[owner]
        if not split.any():
            break
        keep = ~split
        sa, sb, so = a[split], b[split], owner[split]
        mid = 0.5 * (sa + sb)
        na = np.concatenate([sa, mid])
        nb = np.concatenate([mid, sb])
        no = np.concatenate([so, so])
        nk, ne, _ = _apply_rule(f, no, na, nb)
        neval += na.size * NODES_PER_PANEL
        a = np.concatenate([a[keep], na])
        b = np.concatenate([b[keep], nb])
        owner = np.concatenate([owner[keep], no])
        k = np.concatenate([k[keep], nk])
        e = np.concatenate([e[keep], ne])
        # canonical panel order keeps the summation order independent of history
        order = np.lexsort((a, owner))
        a, b, owner, k, e = a[order], b[order], owner[order], k[order], e[order]
    else:
        value = _group_sum(owner, k, n_groups)
        error = _group_sum(owner, e, n_groups)
        tol = np.maximum(rtol * np.abs(value), atol[None, :])
        converged = np.all(error <= tol, axis=1)

    order = np.argsort(owner, kind="stable")
    cuts = np.searchsorted(owner[order], np.arange(n_groups + 1))
    panels = [(a[order[i:j]], b[order[i:j]]) for i, j in zip(cuts[:-1], cuts[1:])]
    return BatchResult(value, error, converged, neval, panels)


def integrate(f, edges, *, rtol=1e-8, atol=0.0, max_iter=60, max_panels=4000):
    """Adaptive integral of a vectorised scalar/vector function over consecutive ``edges``."""
    edges = np.asarray(edges, dtype=float)
    a, b = edges[:-1], edges[1:]
    owner = np.zeros(a.size, dtype=np.intp)
    res = integrate_batch(lambda _o, x: f(x), owner, a, b, 1, rtol=rtol, atol=atol,
                          max_iter=max_iter, max_panels=max_panels)
    value = res.value[0]
    if not res.converged[0]:
        raise NonConvergenceError("adaptive quadrature did not converge", value, res.error[0])
    return (value[0] if value.size == 1 else value), res.error[0]
