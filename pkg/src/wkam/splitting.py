"""Stable/center/unstable splittings along a torus and their invariance under a cocycle.

A splitting is stored as graphs over a reference frame ``Q_ref(theta)``
(columns ordered ``[s | c | u]``).  In reference coordinates each bundle is
``{x + A x}`` for ``x`` in its reference block.  Four graphs are kept:

* ``s``  : stable bundle over the reference ``s`` block, values in ``c+u``
* ``u``  : unstable bundle over ``u``, values in ``s+c``
* ``cu`` : center-unstable bundle over ``c+u``, values in ``s``
* ``cs`` : center-stable bundle over ``s+c``, values in ``u``

The center bundle is the intersection of ``cu`` and ``cs``.  Dominating
bundles (``u``, ``cu``) are refined by forward graph transforms, dominated
ones (``s``, ``cs``) by backward transforms, so every update contracts.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import MaxIterExceeded, NoContraction, SingularMatrixError
from .fourier import FourierSeries, check_conditioning

GRAPHS = ("s", "u", "cu", "cs")
SIGMAS = ("s", "c", "u")


def _index_sets(dims):
    ns, nc, nu = dims
    s = np.arange(ns)
    c = np.arange(ns, ns + nc)
    u = np.arange(ns + nc, ns + nc + nu)
    return {"s": s, "c": c, "u": u}


def graph_blocks(dims):
    """``{name: (base indices, complement indices)}`` in reference coordinates."""
    idx = _index_sets(dims)
    cat = np.concatenate
    return {
        "s": (idx["s"], cat([idx["c"], idx["u"]])),
        "u": (idx["u"], cat([idx["s"], idx["c"]])),
        "cu": (cat([idx["c"], idx["u"]]), idx["s"]),
        "cs": (cat([idx["s"], idx["c"]]), idx["u"]),
    }


def polar(V):
    """Orthonormal factor of the polar decomposition, stacked over leading axes."""
    u, _, vh = np.linalg.svd(V, full_matrices=False)
    return u @ vh


def orthogonal_projector(V):
    U = polar(V)
    return U @ np.swapaxes(U, -1, -2)


@dataclass(frozen=True)
class Cocycle:
    """Matrix cocycle ``gamma_theta`` over the rotation by ``omega``."""

    gamma: FourierSeries
    omega: tuple

    def __post_init__(self):
        object.__setattr__(self, "omega", tuple(float(w) for w in np.atleast_1d(self.omega)))

    @classmethod
    def from_grid(cls, values, omega, K_max, d=1):
        return cls(FourierSeries.from_grid(values, K_max, d), omega)

    @cached_property
    def grid(self):
        return self.gamma.eval_grid(real=True)

    def at(self, j):
        """``gamma(theta + j*omega)`` on the grid."""
        if j == 0:
            return self.grid
        return self.gamma.shift(np.multiply(j, self.omega)).eval_grid(real=True)

    def product(self, j, start=0):
        """``Gamma^j(theta + start*omega) = gamma(theta+(start+j-1)omega) ... gamma(theta+start*omega)``."""
        dim = self.gamma.value_shape[0]
        out = np.broadcast_to(np.eye(dim), self.grid.shape).copy()
        for k in range(j):
            out = self.at(start + k) @ out
        return out

    def property_defect(self, j, m):
        """``max |Gamma^{j+m} - Gamma^j o T_{m omega} Gamma^m|`` over grid nodes."""
        lhs = self.product(j + m)
        rhs = self.product(j, start=m) @ self.product(m)
        return float(np.max(np.abs(lhs - rhs)))


@dataclass(frozen=True)
class Splitting:
    reference: FourierSeries
    dims: tuple
    graphs: dict
    omega: tuple
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "omega", tuple(float(w) for w in np.atleast_1d(self.omega)))
        object.__setattr__(self, "dims", tuple(int(v) for v in self.dims))
        dim = sum(self.dims)
        if self.reference.value_shape != (dim, dim):
            raise ValueError("reference frame must be a square matrix of size dim E^s + dim E^c + dim E^u")
        blocks = graph_blocks(self.dims)
        for name in GRAPHS:
            base, comp = blocks[name]
            if self.graphs[name].value_shape != (len(comp), len(base)):
                raise ValueError(f"graph {name!r} has shape {self.graphs[name].value_shape}")

    @classmethod
    def from_reference(cls, reference, dims, omega):
        blocks = graph_blocks(dims)
        graphs = {
            name: FourierSeries.zeros((len(comp), len(base)), reference.K_max, reference.d, reference.grid_size)
            for name, (base, comp) in blocks.items()
        }
        return cls(reference, dims, graphs, omega)

    def with_graphs(self, graphs, info=None):
        return Splitting(self.reference, self.dims, dict(graphs), self.omega, info or {})

    @property
    def dim(self):
        return sum(self.dims)

    @property
    def K_max(self):
        return self.reference.K_max

    @cached_property
    def reference_grid(self):
        return self.reference.eval_grid(real=True)

    @cached_property
    def _graph_grids(self):
        return {name: g.eval_grid(real=True) for name, g in self.graphs.items()}

    @cached_property
    def center_graph(self):
        """Graph ``A^c`` of the center bundle over the reference ``c`` block, values in ``s+u``."""
        ns, nc, nu = self.dims
        A_cu = self._graph_grids["cu"]
        A_cs = self._graph_grids["cs"]
        cu_c, cu_u = A_cu[..., :nc], A_cu[..., nc:]
        cs_s, cs_c = A_cs[..., :ns], A_cs[..., ns:]
        shape = A_cu.shape[:-2]
        lhs = np.zeros(shape + (ns + nu, ns + nu))
        lhs[..., :ns, :ns] = np.eye(ns)
        lhs[..., :ns, ns:] = -cu_u
        lhs[..., ns:, :ns] = -cs_s
        lhs[..., ns:, ns:] = np.eye(nu)
        rhs = np.concatenate([cu_c, cs_c], axis=-2)
        return np.linalg.solve(lhs, rhs)

    @cached_property
    def bases(self):
        """Basis matrices per bundle on the grid, shape ``(N, dim, dim E^sigma)``."""
        idx = _index_sets(self.dims)
        blocks = graph_blocks(self.dims)
        Q = self.reference_grid
        out = {}
        for sigma in ("s", "u"):
            base, comp = blocks[sigma]
            X = np.zeros(Q.shape[:-1] + (len(base),))
            X[..., base, :] = np.eye(len(base))
            X[..., comp, :] = self._graph_grids[sigma]
            out[sigma] = Q @ X
        X = np.zeros(Q.shape[:-1] + (self.dims[1],))
        X[..., idx["c"], :] = np.eye(self.dims[1])
        X[..., np.concatenate([idx["s"], idx["u"]]), :] = self.center_graph
        out["c"] = Q @ X
        return out

    @cached_property
    def frame(self):
        b = self.bases
        return np.concatenate([b["s"], b["c"], b["u"]], axis=-1)

    @cached_property
    def frame_condition(self):
        return check_conditioning(self.frame, 1e12)

    @cached_property
    def projections(self):
        """Projections ``Pi^sigma`` on the grid along the complementary bundles."""
        _ = self.frame_condition
        Q = self.frame
        Qinv = np.linalg.inv(Q)
        idx = _index_sets(self.dims)
        return {s: Q[..., idx[s]] @ Qinv[..., idx[s], :] for s in SIGMAS}

    @cached_property
    def projection_series(self):
        d = self.reference.d
        return {s: FourierSeries.from_grid(P, self.K_max, d) for s, P in self.projections.items()}

    def projections_at(self, shift_steps):
        """Projections at ``theta + shift_steps * omega`` on the grid."""
        if shift_steps == 0:
            return self.projections
        w = np.multiply(shift_steps, self.omega)
        return {s: P.shift(w).eval_grid(real=True) for s, P in self.projection_series.items()}

    @cached_property
    def projection_norms(self):
        return {s: float(np.max(np.linalg.norm(P, ord=2, axis=(-2, -1)))) for s, P in self.projections.items()}

    def projection_identity_defect(self):
        P = self.projections
        eye = np.eye(self.dim)
        total = float(np.max(np.abs(P["s"] + P["c"] + P["u"] - eye)))
        idem = max(float(np.max(np.abs(p @ p - p))) for p in P.values())
        return max(total, idem)


def product_splitting(f, K_max, omega, grid_size=None):
    """Closed-form splitting of the uncoupled default family along ``K0 = (theta, 0, omega, 0)``.

    ``E^c = span{dx, dp}``; ``E^s``, ``E^u`` are the eigenlines of the
    ``(y, q)`` factor ``[[1+c, lam], [c, lam]]`` at the hyperbolic fixed point.
    """
    if getattr(f, "eps_c", None) != 0.0 or getattr(f, "eps", None) != 0.0:
        raise ValueError("product_splitting requires the uncoupled family (eps = eps_c = 0)")
    lam = float(np.real(f.lam(f.eps)))
    a_s, a_u = hyperbolic_multipliers(f.c, lam)
    Q = np.zeros((4, 4))
    for col, a in ((0, a_s), (3, a_u)):
        v = np.array([0.0, 1.0, 0.0, (a - (1.0 + f.c)) / lam])
        Q[:, col] = v / np.linalg.norm(v)
    Q[0, 1] = 1.0  # dx
    Q[2, 2] = 1.0  # dp
    ref = FourierSeries.constant(Q, K_max, 1, grid_size)
    return Splitting.from_reference(ref, (1, 2, 1), omega)


def hyperbolic_multipliers(c, lam):
    """Eigenvalues ``(a_s, a_u)`` of ``[[1+c, lam], [c, lam]]``."""
    tr, det = 1.0 + c + lam, lam
    disc = np.sqrt(tr * tr - 4.0 * det)
    return (tr - disc) / 2.0, (tr + disc) / 2.0


def defect_blocks(cocycle, E, rho=0.0):
    """Norms of ``Pi^sigma_{theta+omega} gamma_theta Pi^sigma'_theta`` for ``sigma != sigma'``."""
    P0 = E.projections
    P1 = E.projections_at(1)
    gam = cocycle.grid
    d = cocycle.gamma.d
    out = {}
    for s in SIGMAS:
        for t in SIGMAS:
            if s != t:
                block = P1[s] @ gam @ P0[t]
                out[(s, t)] = FourierSeries.from_grid(block, E.K_max, d).norm(rho)
    return out


def invariance_defect(cocycle, E, rho=0.0):
    return max(defect_blocks(cocycle, E, rho).values())


def splitting_distance(E1, E2):
    """Max over bundles and grid nodes of the spectral norm of orthogonal-projector differences."""
    out = 0.0
    for s in SIGMAS:
        diff = orthogonal_projector(E1.bases[s]) - orthogonal_projector(E2.bases[s])
        out = max(out, float(np.max(np.linalg.norm(diff, ord=2, axis=(-2, -1)))))
    return out


def _reference_cocycle(cocycle, E):
    """``G(theta) = Q_ref(theta+omega)^-1 gamma_theta Q_ref(theta)`` on the grid."""
    Q0 = E.reference_grid
    Q1 = E.reference.shift(E.omega).eval_grid(real=True)
    return np.linalg.solve(Q1, cocycle.grid @ Q0)


def _graph_transform(T, base, comp, A, step, K_max, d):
    """One graph transform with ``T(theta)`` mapping the fiber at theta to theta+step."""
    T_bb = T[..., base[:, None], base]
    T_bm = T[..., base[:, None], comp]
    T_mb = T[..., comp[:, None], base]
    T_mm = T[..., comp[:, None], comp]
    den = T_bb + T_bm @ A
    try:
        check_conditioning(den, 1e10)
    except SingularMatrixError as err:
        raise NoContraction(f"graph transform lost invertibility at node {err.node}", "close splitting") from err
    new = (T_mb + T_mm @ A) @ np.linalg.inv(den)
    # values belong to theta + step; bring them back to the grid nodes
    return FourierSeries.from_grid(new, K_max, d).shift(-np.asarray(step))


def close_splitting(cocycle, E0, tol=1e-12, max_iter=100, stall_ratio=0.9):
    """Refine ``E0`` into a splitting invariant under ``cocycle`` by graph-transform sweeps.

    The result carries ``info`` with the defect history, the number of sweeps,
    the initial defect, the distance to ``E0`` and the ratio
    ``distance / initial defect``.
    """
    omega = np.asarray(E0.omega)
    d = cocycle.gamma.d
    K = E0.K_max
    initial = invariance_defect(cocycle, E0)
    history = [initial]
    if initial <= tol:
        return E0.with_graphs(E0.graphs, _closing_info(history, 0, E0, E0))

    G = _reference_cocycle(cocycle, E0)
    check_conditioning(G, 1e14)
    H = FourierSeries.from_grid(np.linalg.inv(G), K, d).shift(-omega).eval_grid(real=True)
    blocks = graph_blocks(E0.dims)
    graphs = dict(E0.graphs)
    E = E0
    for sweep in range(1, max_iter + 1):
        for name, T, step in (("u", G, omega), ("cu", G, omega), ("s", H, -omega), ("cs", H, -omega)):
            base, comp = blocks[name]
            graphs[name] = _graph_transform(T, base, comp, graphs[name].eval_grid(real=True), step, K, d).real_part()
        E = E0.with_graphs(graphs)
        defect = invariance_defect(cocycle, E)
        history.append(defect)
        if not np.isfinite(defect):
            raise NoContraction("defect is not finite", "close splitting")
        if defect <= tol:
            return E.with_graphs(graphs, _closing_info(history, sweep, E0, E))
        if defect >= stall_ratio * history[-2]:
            raise NoContraction(
                f"defect ratio {defect / history[-2]:.3f} >= {stall_ratio} at sweep {sweep} (defect {defect:.3e})",
                "close splitting",
            )
    raise MaxIterExceeded(f"splitting defect {history[-1]:.3e} > {tol:.1e} after {max_iter} sweeps", "close splitting")


def _closing_info(history, sweeps, E0, E):
    dist = splitting_distance(E0, E) if sweeps else 0.0
    initial = history[0]
    return {
        "sweeps": sweeps,
        "defect_history": [float(h) for h in history],
        "initial_defect": float(initial),
        "defect": float(history[-1]),
        "distance": float(dist),
        "distance_ratio": float(dist / initial) if initial > 0 else 0.0,
    }


@dataclass(frozen=True)
class RateEstimate:
    lambda_minus: float
    lambda_c_minus: float
    lambda_c_plus: float
    lambda_plus: float
    C0: float
    J: int
    exponents: dict = field(default_factory=dict, compare=False)

    def as_dict(self):
        return {
            "lambda_minus": self.lambda_minus,
            "lambda_c_minus": self.lambda_c_minus,
            "lambda_c_plus": self.lambda_c_plus,
            "lambda_plus": self.lambda_plus,
            "C0": self.C0,
            "J": self.J,
        }


def restricted_cocycle(cocycle, E, sigma):
    """``U(theta+omega)^T gamma U(theta)`` with ``U`` an orthonormal frame of ``E^sigma``."""
    U0 = polar(E.bases[sigma])
    d = cocycle.gamma.d
    U1 = FourierSeries.from_grid(U0, E.K_max, d).shift(E.omega).eval_grid(real=True)
    G = np.swapaxes(U1, -1, -2) @ cocycle.grid @ U0
    return FourierSeries.from_grid(G, E.K_max, d)


def estimate_rates(cocycle, E, J_max=20, burn_in=300):
    """Fit trichotomy rates from products of the cocycle restricted to each bundle.

    Along every orbit the restricted products are QR-factorized step by step;
    the grid average of the accumulated ``log |R_ii|`` is fitted by least
    squares over ``j = J_max/2 .. J_max`` after ``burn_in`` discarded steps
    that let the QR frames align with the Oseledets directions.  The slowest stable exponent gives
    ``lambda_-``, the fastest unstable one ``lambda_+``, the extreme center
    exponents give ``lambda_c^-`` and ``lambda_c^+``.  ``C0`` is the smallest
    constant bounding all forward products by ``rate**j`` and all backward
    products by ``rate**-j`` for ``j <= J_max``.
    """
    omega = np.asarray(E.omega)
    js = np.arange(1, J_max + 1)
    fit = js >= max(1, J_max // 2)
    exps = {}
    C0 = 1.0
    prods = {}
    for sigma in SIGMAS:
        Gs = restricted_cocycle(cocycle, E, sigma)
        m = Gs.value_shape[0]
        n_nodes = Gs.eval_grid().shape[:-2]
        Qk = np.broadcast_to(np.eye(m), n_nodes + (m, m)).copy()
        P = Qk.copy()
        cum = np.zeros(n_nodes + (m,))
        mean_cum = np.zeros((J_max, m))
        norms = np.zeros((J_max,) + n_nodes)
        inv_norms = np.zeros((J_max,) + n_nodes)
        for j in range(J_max):
            Gj = Gs.shift(j * omega).eval_grid(real=True)
            P = Gj @ P
            norms[j] = np.linalg.norm(P, ord=2, axis=(-2, -1))
            inv_norms[j] = 1.0 / np.linalg.norm(P, ord=-2, axis=(-2, -1))
        # a one-dimensional bundle has no frame to align
        skip = burn_in if m > 1 else 0
        for j in range(skip + J_max):
            Gj = Gs.shift(j * omega).eval_grid(real=True)
            Qk, R = np.linalg.qr(Gj @ Qk)
            if j >= skip:
                cum += np.log(np.abs(np.diagonal(R, axis1=-2, axis2=-1)))
                mean_cum[j - skip] = cum.reshape(-1, m).mean(axis=0)
        slopes = np.array([np.polyfit(js[fit], mean_cum[fit, i], 1)[0] for i in range(m)]) if J_max > 1 \
            else mean_cum[0]
        exps[sigma] = np.sort(slopes)[::-1]
        prods[sigma] = (norms, inv_norms)

    rates = {
        "s": np.exp(exps["s"].max()),
        "c+": np.exp(exps["c"].max()),
        "c-": np.exp(exps["c"].min()),
        "u": np.exp(exps["u"].min()),
    }
    bounds = {"s": (rates["s"], None), "c": (rates["c+"], rates["c-"]), "u": (None, rates["u"])}
    for sigma, (fwd, bwd) in bounds.items():
        norms, inv_norms = prods[sigma]
        jj = js.reshape((-1,) + (1,) * (norms.ndim - 1))
        if fwd is not None:
            C0 = max(C0, float(np.max(norms / fwd**jj)))
        if bwd is not None:
            C0 = max(C0, float(np.max(inv_norms * bwd**jj)))
    return RateEstimate(
        lambda_minus=float(rates["s"]),
        lambda_c_minus=float(rates["c-"]),
        lambda_c_plus=float(rates["c+"]),
        lambda_plus=float(rates["u"]),
        C0=C0,
        J=J_max,
        exponents={k: v.tolist() for k, v in exps.items()},
    )


@dataclass(frozen=True)
class HypothesisReport:
    conditions: dict
    measured: dict

    @property
    def ok(self):
        return all(v for k, v in self.conditions.items() if not k.startswith("H3'"))

    def lines(self):
        for key, val in self.conditions.items():
            yield f"{key}: {'true' if val else 'false'}"


def check_hypotheses(rates, lam, defect=None, projections=None, dims=None, d=1, defect_max=1e-2, rtol=1e-8):
    """Evaluate the trichotomy and center-bundle conditions as booleans with measured values.

    Two readings of the conformal rate condition are reported: the literal
    ``lambda_- < lam*lambda_+ < lambda_c^-`` and the separation form
    ``lambda_- * lambda_c^+ < lam < lambda_c^- * lambda_+`` (the one making the
    center bundle symplectically orthogonal to the hyperbolic ones).
    """
    lm, lcm, lcp, lp = rates.lambda_minus, rates.lambda_c_minus, rates.lambda_c_plus, rates.lambda_plus
    slack = rtol * max(1.0, abs(lam))
    cond = {}
    measured = {"rates": rates.as_dict(), "lam": lam}
    if defect is not None:
        cond["H2"] = bool(defect <= defect_max)
        measured["defect"] = defect
    cond["H3"] = bool(lm < 1.0 < lp and lm < lcm and lcm <= lcp + slack and lcp < lp)
    cond["H3'(literal)"] = bool(lm < lam * lp < lcm)
    cond["H3'(separation)"] = bool(lm * lcp < lam < lcm * lp)
    cond["center_bracket"] = bool(lcm <= lam + slack and lam <= lcp + slack)
    if dims is not None:
        cond["H4"] = bool(dims[1] == 2 * d)
        measured["dims"] = list(dims)
    if projections is not None:
        cond["bounded_projections"] = bool(all(np.isfinite(v) for v in projections.values()))
        measured["projection_norms"] = dict(projections)
    return HypothesisReport(cond, measured)
