"""Boundary refinement: color-model energy minimization on the 4-connected grid.

The coarse mask seeds foreground/background color mixture models; each pixel
then pays the negative log-likelihood of its assigned model (unary term) and
each 4-neighbor disagreement pays a contrast-weighted penalty (pairwise
term). The pairwise term penalizes disagreement only, so the binary energy is
submodular and a single s/t min-cut finds its exact global minimum. A
brute-force enumerator over tiny grids serves as the optimality oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BinaryMask, Frame, PipelineConfig, check_same_shape

try:
    from numba import njit
except ImportError:  # pragma: no cover
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn

__all__ = [
    "ColorGMM",
    "fit_gmm",
    "UnaryCosts",
    "unary_costs",
    "PairwiseWeights",
    "pairwise_weights",
    "energy",
    "min_cut_labeling",
    "brute_force_labeling",
    "crf_refine",
]

COST_CLAMP = 50.0
COV_REG = 1e-3
EM_TOL = 1e-4
EM_MAX_ITERS = 50
BRUTE_FORCE_LIMIT = 20


@dataclass(frozen=True)
class ColorGMM:
    """Gaussian mixture over RGB in [0, 1]^3; surplus components carry weight 0."""

    weights: np.ndarray      # (k,)
    means: np.ndarray        # (k, 3)
    covariances: np.ndarray  # (k, 3, 3)
    log_likelihoods: tuple[float, ...] = ()

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        m = np.ascontiguousarray(self.means, dtype=np.float64)
        c = np.ascontiguousarray(self.covariances, dtype=np.float64)
        k = w.shape[0]
        if m.shape != (k, 3) or c.shape != (k, 3, 3):
            raise ValueError("inconsistent mixture component shapes")
        if not np.isclose(w.sum(), 1.0):
            raise ValueError(f"component weights must sum to 1, got {w.sum()}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "covariances", c)

    def log_density(self, colors: np.ndarray) -> np.ndarray:
        """log p(x) for an (N, 3) color array; weight-0 components are excluded."""
        active = self.weights > 0
        comp_logs = []
        for w, mean, cov in zip(self.weights[active], self.means[active], self.covariances[active]):
            diff = colors - mean
            chol = np.linalg.cholesky(cov)
            solved = np.linalg.solve(chol, diff.T)
            maha = (solved * solved).sum(axis=0)
            log_det = 2.0 * np.log(np.diag(chol)).sum()
            comp_logs.append(np.log(w) - 0.5 * (maha + log_det + 3.0 * np.log(2.0 * np.pi)))
        stacked = np.stack(comp_logs, axis=0)
        peak = stacked.max(axis=0)
        return peak + np.log(np.exp(stacked - peak).sum(axis=0))


def _kmeanspp_centers(pixels: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = pixels.shape[0]
    centers = np.empty((k, 3))
    centers[0] = pixels[rng.integers(n)]
    d2 = ((pixels - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[i] = pixels[idx]
        d2 = np.minimum(d2, ((pixels - centers[i]) ** 2).sum(axis=1))
    return centers


def fit_gmm(pixels: np.ndarray, k_c: int, seed: int) -> ColorGMM:
    """Fit a k_c-component full-covariance mixture to (N, 3) colors in [0, 1].

    k-means++ seeding (deterministic from `seed`), then EM until the relative
    log-likelihood change drops below 1e-4 or 50 iterations. Covariances are
    regularized with +1e-3*I throughout, which also makes single-color input
    well defined. With fewer pixels than components, the surplus components
    get weight 0.
    """
    pixels = np.asarray(pixels, dtype=np.float64).reshape(-1, 3)
    n = pixels.shape[0]
    if n == 0:
        raise ValueError("cannot fit a color model to an empty pixel list")
    if k_c < 1:
        raise ValueError(f"component count must be >= 1: {k_c}")
    k = min(k_c, n)
    rng = np.random.default_rng(seed)
    centers = _kmeanspp_centers(pixels, k, rng)

    d2 = ((pixels[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1)
    weights = np.zeros(k)
    means = centers.copy()
    covs = np.tile(COV_REG * np.eye(3), (k, 1, 1))
    for c in range(k):
        members = pixels[labels == c]
        weights[c] = members.shape[0] / n
        if members.shape[0] > 0:
            means[c] = members.mean(axis=0)
            diff = members - means[c]
            covs[c] = diff.T @ diff / members.shape[0] + COV_REG * np.eye(3)

    lls: list[float] = []
    prev_ll = -np.inf
    snapshot = (weights.copy(), means.copy(), covs.copy())
    for _ in range(EM_MAX_ITERS):
        # E step on active components
        active = weights > 0
        log_resp = np.full((n, k), -np.inf)
        for c in np.flatnonzero(active):
            diff = pixels - means[c]
            chol = np.linalg.cholesky(covs[c])
            solved = np.linalg.solve(chol, diff.T)
            maha = (solved * solved).sum(axis=0)
            log_det = 2.0 * np.log(np.diag(chol)).sum()
            log_resp[:, c] = np.log(weights[c]) - 0.5 * (maha + log_det + 3.0 * np.log(2.0 * np.pi))
        peak = log_resp.max(axis=1)
        log_norm = peak + np.log(np.exp(log_resp - peak[:, None]).sum(axis=1))
        ll = float(log_norm.sum())
        if ll < prev_ll:
            # The +1e-3*I covariance floor is not the exact M-step maximizer,
            # so the likelihood can dip once it fights the data; keep the best
            # parameters seen and stop.
            weights, means, covs = snapshot
            break
        lls.append(ll)
        assert all(b >= a for a, b in zip(lls, lls[1:])), "EM log-likelihood decreased"
        if np.isfinite(prev_ll) and abs(ll - prev_ll) < EM_TOL * max(1.0, abs(prev_ll)):
            break
        prev_ll = ll
        snapshot = (weights.copy(), means.copy(), covs.copy())
        resp = np.exp(log_resp - log_norm[:, None])
        # M step
        mass = resp.sum(axis=0)
        for c in range(k):
            if mass[c] <= 0.0:
                weights[c] = 0.0
                continue
            weights[c] = mass[c] / n
            means[c] = resp[:, c] @ pixels / mass[c]
            diff = pixels - means[c]
            covs[c] = (resp[:, c, None] * diff).T @ diff / mass[c] + COV_REG * np.eye(3)
        weights /= weights.sum()

    if k < k_c:
        weights = np.concatenate([weights, np.zeros(k_c - k)])
        means = np.concatenate([means, np.zeros((k_c - k, 3))])
        covs = np.concatenate([covs, np.tile(COV_REG * np.eye(3), (k_c - k, 1, 1))])
    return ColorGMM(weights=weights, means=means, covariances=covs, log_likelihoods=tuple(lls))


@dataclass(frozen=True)
class UnaryCosts:
    """Per-pixel labeling costs, clamped to [0, 50]."""

    cost_bg: np.ndarray
    cost_fg: np.ndarray

    def __post_init__(self):
        bg = np.ascontiguousarray(self.cost_bg, dtype=np.float64)
        fg = np.ascontiguousarray(self.cost_fg, dtype=np.float64)
        if bg.ndim != 2 or bg.shape != fg.shape:
            raise ValueError("unary cost planes must be matching 2-D arrays")
        for name, arr in (("cost_bg", bg), ("cost_fg", fg)):
            if not np.isfinite(arr).all() or arr.min() < 0 or arr.max() > COST_CLAMP:
                raise ValueError(f"{name} must be finite within [0, {COST_CLAMP}]")
        object.__setattr__(self, "cost_bg", bg)
        object.__setattr__(self, "cost_fg", fg)

    @property
    def height(self) -> int:
        return self.cost_bg.shape[0]

    @property
    def width(self) -> int:
        return self.cost_bg.shape[1]


def unary_costs(frame: Frame, fg: ColorGMM, bg: ColorGMM) -> UnaryCosts:
    """Negative log-likelihood of each pixel under each color model, clamped."""
    colors = frame.as_float().reshape(-1, 3)
    cost_fg = np.clip(-fg.log_density(colors), 0.0, COST_CLAMP)
    cost_bg = np.clip(-bg.log_density(colors), 0.0, COST_CLAMP)
    shape = (frame.height, frame.width)
    return UnaryCosts(cost_bg=cost_bg.reshape(shape), cost_fg=cost_fg.reshape(shape))


@dataclass(frozen=True)
class PairwiseWeights:
    """Contrast weights on 4-neighbor edges: w = exp(-beta * ||dI||^2)."""

    horizontal: np.ndarray  # (H, W-1), edge (y, x)-(y, x+1)
    vertical: np.ndarray    # (H-1, W), edge (y, x)-(y+1, x)
    beta: float

    def __post_init__(self):
        hz = np.ascontiguousarray(self.horizontal, dtype=np.float64)
        vt = np.ascontiguousarray(self.vertical, dtype=np.float64)
        if hz.ndim != 2 or vt.ndim != 2 or hz.shape[0] != vt.shape[0] + 1 or hz.shape[1] + 1 != vt.shape[1]:
            raise ValueError(f"inconsistent edge plane shapes: {hz.shape} / {vt.shape}")
        for name, arr in (("horizontal", hz), ("vertical", vt)):
            if arr.size and (arr.min() <= 0 or arr.max() > 1.0):
                raise ValueError(f"{name} weights must lie in (0, 1]")
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0: {self.beta}")
        object.__setattr__(self, "horizontal", hz)
        object.__setattr__(self, "vertical", vt)

    @property
    def height(self) -> int:
        return self.vertical.shape[0] + 1

    @property
    def width(self) -> int:
        return self.horizontal.shape[1] + 1

    @property
    def edge_count(self) -> int:
        return self.horizontal.size + self.vertical.size


def pairwise_weights(frame: Frame, beta: float | None = None) -> PairwiseWeights:
    """Edge weights from color contrast; beta defaults to 1 / (2 * mean ||dI||^2)."""
    colors = frame.as_float()
    dh = ((colors[:, 1:] - colors[:, :-1]) ** 2).sum(axis=2)
    dv = ((colors[1:, :] - colors[:-1, :]) ** 2).sum(axis=2)
    if beta is None:
        n_edges = dh.size + dv.size
        mean_sq = (dh.sum() + dv.sum()) / n_edges if n_edges else 0.0
        beta = 1.0 if mean_sq == 0.0 else 1.0 / (2.0 * mean_sq)
    elif not beta > 0:
        raise ValueError(f"beta must be > 0: {beta}")
    return PairwiseWeights(horizontal=np.exp(-beta * dh), vertical=np.exp(-beta * dv), beta=float(beta))


def energy(labeling: BinaryMask, unary: UnaryCosts, pairwise: PairwiseWeights, lam: float) -> float:
    """Total labeling energy: unary costs plus lambda-weighted disagreement penalties."""
    check_same_shape(labeling, unary, "unary costs")
    check_same_shape(labeling, pairwise, "pairwise weights")
    lab = labeling.labels
    unary_total = np.where(lab == 1, unary.cost_fg, unary.cost_bg).sum()
    dh = (lab[:, 1:] != lab[:, :-1]) * pairwise.horizontal
    dv = (lab[1:, :] != lab[:-1, :]) * pairwise.vertical
    return float(unary_total + lam * (dh.sum() + dv.sum()))


@njit(cache=True)
def _dinic_min_cut(head, enext, eto, ecap, n_nodes, source, sink):  # pragma: no cover
    level = np.empty(n_nodes, np.int64)
    arc = np.empty(n_nodes, np.int64)
    queue = np.empty(n_nodes, np.int64)
    path = np.empty(n_nodes, np.int64)
    while True:
        for i in range(n_nodes):
            level[i] = -1
        level[source] = 0
        queue[0] = source
        qh, qt = 0, 1
        while qh < qt:
            u = queue[qh]
            qh += 1
            e = head[u]
            while e != -1:
                v = eto[e]
                if ecap[e] > 0.0 and level[v] == -1:
                    level[v] = level[u] + 1
                    queue[qt] = v
                    qt += 1
                e = enext[e]
        if level[sink] == -1:
            break
        for i in range(n_nodes):
            arc[i] = head[i]
        while True:
            # one augmenting path along the level graph, current-arc DFS
            u = source
            depth = 0
            reached = False
            exhausted = False
            while True:
                if u == sink:
                    reached = True
                    break
                e = arc[u]
                advanced = False
                while e != -1:
                    v = eto[e]
                    if ecap[e] > 0.0 and level[v] == level[u] + 1:
                        advanced = True
                        break
                    e = enext[e]
                    arc[u] = e
                if advanced:
                    path[depth] = e
                    depth += 1
                    u = eto[e]
                else:
                    if u == source:
                        exhausted = True
                        break
                    depth -= 1
                    back = path[depth]
                    u = eto[back ^ 1]
                    arc[u] = enext[back]
            if exhausted:
                break
            if reached:
                bottleneck = ecap[path[0]]
                for i in range(1, depth):
                    if ecap[path[i]] < bottleneck:
                        bottleneck = ecap[path[i]]
                for i in range(depth):
                    ecap[path[i]] -= bottleneck
                    ecap[path[i] ^ 1] += bottleneck
    # canonical cut: source side = residual-reachable from the source
    reach = np.zeros(n_nodes, np.uint8)
    reach[source] = 1
    queue[0] = source
    qh, qt = 0, 1
    while qh < qt:
        u = queue[qh]
        qh += 1
        e = head[u]
        while e != -1:
            v = eto[e]
            if ecap[e] > 0.0 and reach[v] == 0:
                reach[v] = 1
                queue[qt] = v
                qt += 1
            e = enext[e]
    return reach


def min_cut_labeling(unary: UnaryCosts, pairwise: PairwiseWeights, lam: float) -> BinaryMask:
    """Exact global minimizer of the grid energy via augmenting-path max-flow.

    Terminal capacities carry the unary costs, neighbor capacities lambda * w
    in both directions; the returned labeling marks foreground exactly on the
    source side of the canonical minimum cut, so tied pixels fall to
    background.
    """
    check_same_shape(unary, pairwise, "pairwise weights")
    if lam < 0:
        raise ValueError(f"lambda must be >= 0: {lam}")
    h, w = unary.height, unary.width
    n = h * w
    source, sink = n, n + 1
    pixels = np.arange(n, dtype=np.int64)
    idx = pixels.reshape(h, w)
    h_from = idx[:, :-1].ravel()
    v_from = idx[:-1, :].ravel()
    m = 4 * n + 2 * pairwise.edge_count

    # residual pairs sit at (2k, 2k+1): per pixel s->i and i->t with their
    # zero-capacity reverses, then symmetric horizontal and vertical pairs
    efrom = np.empty(m, dtype=np.int64)
    eto = np.empty(m, dtype=np.int64)
    ecap = np.empty(m, dtype=np.float64)

    term = np.s_[:4 * n]
    efrom[term][0::4] = source
    eto[term][0::4] = pixels
    ecap[term][0::4] = unary.cost_bg.ravel()
    efrom[term][1::4] = pixels
    eto[term][1::4] = source
    ecap[term][1::4] = 0.0
    efrom[term][2::4] = pixels
    eto[term][2::4] = sink
    ecap[term][2::4] = unary.cost_fg.ravel()
    efrom[term][3::4] = sink
    eto[term][3::4] = pixels
    ecap[term][3::4] = 0.0

    def fill_pairs(offset, src, dst, caps):
        block = np.s_[offset:offset + 2 * len(src)]
        efrom[block][0::2] = src
        eto[block][0::2] = dst
        efrom[block][1::2] = dst
        eto[block][1::2] = src
        ecap[block][0::2] = caps
        ecap[block][1::2] = caps

    fill_pairs(4 * n, h_from, h_from + 1, lam * pairwise.horizontal.ravel())
    fill_pairs(4 * n + 2 * h_from.size, v_from, v_from + w, lam * pairwise.vertical.ravel())

    # linked-list adjacency equivalent to inserting edges in index order:
    # head is each node's most recent edge, enext walks back through earlier ones
    head = np.full(n + 2, -1, dtype=np.int64)
    enext = np.full(m, -1, dtype=np.int64)
    by_node = np.argsort(efrom, kind="stable")
    grouped = efrom[by_node]
    same = grouped[1:] == grouped[:-1]
    enext[by_node[1:][same]] = by_node[:-1][same]
    last = np.nonzero(np.concatenate([~same, [True]]))[0]
    head[grouped[last]] = by_node[last]

    reach = _dinic_min_cut(head, enext, eto, ecap, n + 2, source, sink)
    return BinaryMask(np.asarray(reach[:n]).reshape(h, w))


def brute_force_labeling(unary: UnaryCosts, pairwise: PairwiseWeights, lam: float) -> BinaryMask:
    """Global minimizer by exhaustive enumeration (instances up to 20 pixels).

    Ties resolve to the lexicographically smallest row-major bit pattern.
    """
    check_same_shape(unary, pairwise, "pairwise weights")
    h, w = unary.height, unary.width
    n = h * w
    if n > BRUTE_FORCE_LIMIT:
        raise ValueError(f"instance too large for enumeration: {n} > {BRUTE_FORCE_LIMIT} px")
    codes = np.arange(2 ** n, dtype=np.int64)
    # pixel k (row-major) lives at bit n-1-k so integer order == lex order
    bits = ((codes[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1).astype(np.int8)
    cost_bg = unary.cost_bg.ravel()
    cost_fg = unary.cost_fg.ravel()
    energies = bits @ cost_fg + (1 - bits) @ cost_bg
    idx = np.arange(n).reshape(h, w)
    for a, b, wgt in (
        (idx[:, :-1].ravel(), idx[:, 1:].ravel(), pairwise.horizontal.ravel()),
        (idx[:-1, :].ravel(), idx[1:, :].ravel(), pairwise.vertical.ravel()),
    ):
        disagreement = bits[:, a] != bits[:, b]
        energies = energies + lam * (disagreement @ wgt)
    best = int(np.argmin(energies))
    return BinaryMask(bits[best].reshape(h, w).astype(np.uint8))


def crf_refine(frame: Frame, coarse: BinaryMask, cfg: PipelineConfig, seed: int) -> BinaryMask:
    """Refit color models on the coarse split and return the optimal labeling.

    A coarse mask with only one class present is returned unchanged: there is
    no evidence to fit the missing model.
    """
    check_same_shape(frame, coarse, "coarse mask")
    fg_count = coarse.count()
    if fg_count == 0 or fg_count == coarse.labels.size:
        return coarse
    colors = frame.as_float().reshape(-1, 3)
    labels = coarse.labels.ravel().astype(bool)
    fg_model = fit_gmm(colors[labels], cfg.gmm_components, seed)
    bg_model = fit_gmm(colors[~labels], cfg.gmm_components, seed + 1)
    unary = unary_costs(frame, fg_model, bg_model)
    pairwise = pairwise_weights(frame, cfg.beta_override)
    return min_cut_labeling(unary, pairwise, cfg.lam)
