"""Reduction of a semilinear DAE to explicit ODE plus algebraic parts.

Two routes are provided.  The direct route keeps the whole explicit block
(x1 + x2_sigma) as the differential variable and solves one algebraic
equation for the kernel component x20.  The cascade route applies to fields
with a declared block-triangular structure: the chain-top components are
solved level by level as functions of time only, their time derivatives are
obtained by implicit differentiation, and only the kernel level remains
coupled to the differential variable.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from ._linalg import orth_basis
from .config import Tolerances
from .errors import (ConstraintSolveFailure, NoConvergence, StructureViolation)
from .implicit import (ImplicitProblem, SolveOptions, fd_jacobian, solve_newton)
from .pencil import CanonicalSystem, DualSystem, Pencil
from .projectors import ProjectorSet

__all__ = ["StructureTag", "NonlinearField", "SemilinearDAE", "ReducedFirst",
           "ReducedCascade", "reduce_first", "reduce_cascade", "residual_L0",
           "check_structure", "StructureReport", "StructureCheckConfig"]


class StructureTag(enum.Enum):
    GENERAL = "general"
    STRUCTURED = "structured"
    STRUCTURED_VARIANT = "structured_variant"


@dataclass
class NonlinearField:
    """Right-hand side f(t, x) with optional analytic derivatives."""

    eval: Callable
    jacobian: Callable | None = None
    t_derivative: Callable | None = None
    structure_tag: StructureTag = StructureTag.GENERAL

    def __call__(self, t, x):
        return np.asarray(self.eval(t, x), dtype=float)

    def jac(self, t, x):
        if self.jacobian is not None:
            return np.asarray(self.jacobian(t, x), dtype=float)
        return fd_jacobian(lambda z: self.eval(t, z), np.asarray(x, float))

    def dt(self, t, x):
        if self.t_derivative is not None:
            return np.asarray(self.t_derivative(t, x), dtype=float)
        h = max(1e-6, 1e-6 * abs(t))
        return (self(t + h, x) - self(t - h, x)) / (2.0 * h)

    def validate_jacobian(self, points, rtol: float = 1e-5) -> float:
        """Worst relative mismatch between the analytic Jacobian and
        central differences over the sample points."""
        worst = 0.0
        for t, x in points:
            ja = self.jac(t, x)
            jf = fd_jacobian(lambda z: self.eval(t, z), np.asarray(x, float))
            scale = max(1.0, float(np.abs(jf).max()))
            worst = max(worst, float(np.abs(ja - jf).max()) / scale)
        if worst > rtol:
            raise ValueError(f"jacobian mismatch {worst:.3e} exceeds {rtol}")
        return worst


@dataclass
class SemilinearDAE:
    """Matrix pair, its verified operator family, and the nonlinear field."""

    pencil: Pencil
    projectors: ProjectorSet
    canonical: CanonicalSystem
    dual: DualSystem
    field: NonlinearField
    name: str = ""

    def __post_init__(self):
        if self.projectors.fingerprint != self.pencil.fingerprint:
            raise ValueError("projector set was built from a different pair")

    @property
    def tol(self) -> Tolerances:
        return self.pencil.tol


@dataclass(frozen=True)
class _Block:
    """Columns of chain vectors and dual functionals for one state slice."""

    phi: np.ndarray  # N x k
    q: np.ndarray    # N x k

    @property
    def dim(self) -> int:
        return self.phi.shape[1]

    def x_coords(self, b_mat, x):
        return self.q.conj().T @ (b_mat @ x)

    def y_coords(self, y):
        return self.q.conj().T @ y

    def lift(self, coords):
        return self.phi @ coords


def _select_block(dae: SemilinearDAE, pred) -> _Block:
    pairs = dae.canonical.pairs()
    idx = [k for k, (i, j) in enumerate(pairs)
           if pred(dae.canonical.chains[i].multiplicity, j)]
    n_dim = dae.pencil.n_dim
    if not idx:
        z = np.zeros((n_dim, 0))
        return _Block(z, z.copy())
    return _Block(dae.canonical.matrix()[:, idx], dae.dual.matrix()[:, idx])


# ---------------------------------------------------------------------------
# direct reduction


@dataclass
class _FirstState:
    """Warm-start data carried through one integration or sampling run."""

    c20: np.ndarray | None = None
    cascade: "_CascadeEvaluator | None" = None


class ReducedFirst:
    """Explicit form with the whole (x1 + x2_sigma) block differential."""

    def __init__(self, dae: SemilinearDAE):
        self.dae = dae
        ps = dae.projectors
        self.ps = ps
        self.nu = ps.nu
        self.n = ps.n
        self.p12 = ps.p1 + ps.p2_sigma
        self.q12 = ps.q1 + ps.q2_sigma
        self.kernel = _select_block(dae, lambda m, j: j == 1)       # x20 slice
        self.tops = _select_block(dae, lambda m, j: j == m)          # residual rows
        self.structured = dae.field.structure_tag is not StructureTag.GENERAL
        self._cascade: ReducedCascade | None = None

    # -- spec callbacks ----------------------------------------------------
    def pi(self, t, x):
        """Drift of the differential block, mapped back into the state space."""
        f = self.dae.field(t, x)
        return self.ps.a_tilde_inv @ (self.q12 @ (f - self.dae.pencil.b @ x))

    def pi_hat(self, t, x):
        """Image-side drift of the reduced ODE for w."""
        f = self.dae.field(t, x)
        return self.q12 @ (f - self.dae.pencil.b @ x)

    def f2_star(self, t, x):
        """Constraint residual vector (ambient)."""
        f = self.dae.field(t, x)
        return self.ps.q2_star @ (f - self.dae.pencil.b @ x)

    def f2_star_components(self, t, x1, x2_sigma, x20):
        return self.f2_star(t, np.asarray(x1) + np.asarray(x2_sigma)
                            + np.asarray(x20))

    def residual_L0(self, t, x) -> float:
        """Constraint distance, scaled by the block norm of the state so the
        measure stays meaningful on trajectories of growing magnitude."""
        return float(np.linalg.norm(self.f2_star(t, x))
                     / max(1.0, self.split_norm(x)))

    # -- splitting ----------------------------------------------------------
    def split(self, x):
        return self.ps.p1 @ x, self.ps.p2_sigma @ x, self.ps.p20 @ x

    def split_norm(self, x) -> float:
        x1, x2s, x20 = self.split(x)
        return float(np.linalg.norm(x1) + np.linalg.norm(x2s)
                     + np.linalg.norm(x20))

    # -- algebraic solve -----------------------------------------------------
    def make_state(self) -> _FirstState:
        st = _FirstState()
        if self.structured and self.nu >= 2:
            st.cascade = self.cascade.evaluator()
        return st

    @property
    def cascade(self) -> "ReducedCascade":
        if self._cascade is None:
            self._cascade = ReducedCascade(self.dae)
        return self._cascade

    def solve_x20(self, t, x12, state: _FirstState | None = None,
                  tol: float | None = None):
        """Kernel component on the constraint manifold at fixed (t, x12).

        For a general field this solves the constraint rows directly.  For
        a structure-tagged field those rows do not involve the kernel
        component, so the solve uses the differentiated-constraint form
        instead (the kernel-level equation with the implicit time
        derivatives of the structured levels); without it the direct
        Jacobian is singular by construction.
        """
        state = state or self.make_state()
        tol = tol if tol is not None else self.dae.tol.solver
        b = self.dae.pencil.b
        a = self.dae.pencil.a
        fld = self.dae.field
        if self.n == 0:
            return np.zeros(self.dae.pencil.n_dim), state

        guess = state.c20 if state.c20 is not None else np.zeros(self.kernel.dim)
        # absolute tolerance scaled by the state magnitude: at large states
        # the floating-point floor of the residual grows alongside
        tol = tol * max(1.0, float(np.linalg.norm(x12)),
                        float(np.linalg.norm(guess)))
        if self.structured and self.nu >= 2:
            ev = state.cascade
            parts = ev.algebraic_parts(t)
            d_vec = a @ (parts["d_chain_1"] + parts["d_wedge_1"])
            rows = self.kernel  # kernel-level rows, paired with q_i^1

            def resid(_t, _p, c):
                x = x12 + self.kernel.lift(c)
                return rows.y_coords(fld(t, x) - b @ self.kernel.lift(c) - d_vec)

            def jac(_t, _p, c):
                x = x12 + self.kernel.lift(c)
                jf = fld.jac(t, x)
                return rows.y_coords(jf @ self.kernel.phi - b @ self.kernel.phi)
        else:
            rows = self.tops

            def resid(_t, _p, c):
                x = x12 + self.kernel.lift(c)
                return rows.y_coords(fld(t, x) - b @ x)

            def jac(_t, _p, c):
                x = x12 + self.kernel.lift(c)
                jf = fld.jac(t, x)
                return rows.y_coords(jf @ self.kernel.phi - b @ self.kernel.phi)

        problem = ImplicitProblem(residual=resid, jac_y=jac)
        c = solve_newton(problem, t, None, guess, SolveOptions(tol=tol))
        state.c20 = c
        return self.kernel.lift(c), state

    def eta_hat(self, t, w, state: _FirstState | None = None):
        """Kernel component as a function of the reduced variable."""
        x12 = self.ps.a_tilde_inv @ w
        return self.solve_x20(t, x12, state)

    def drift_w(self, t, w, state: _FirstState):
        """Right-hand side of the reduced ODE, plus the assembled state."""
        w = self.q12 @ w
        x12 = self.ps.a_tilde_inv @ w
        x20, state = self.solve_x20(t, x12, state)
        x = x12 + x20
        return self.pi_hat(t, x), x, state

    def consistent_point(self, t0, x_guess, tol: float | None = None):
        """Keep the explicit components of the guess, solve the rest.

        For structure-tagged fields the constraint levels pin the chain-top
        components as well, so those parts of the guess are replaced by the
        level solutions.
        """
        tol = tol if tol is not None else self.dae.tol.cons
        state = self.make_state()
        if self.structured and self.nu >= 2:
            x1 = self.ps.p1 @ x_guess
            x12 = x1 + state.cascade.eta_2sigma(t0)
        else:
            x12 = self.p12 @ x_guess
        if self.n:
            state.c20 = self.kernel.x_coords(self.dae.pencil.b, x_guess)
        x20, _ = self.solve_x20(t0, x12, state, tol=min(tol * 1e-2, self.dae.tol.solver))
        x0 = x12 + x20
        res = self.residual_L0(t0, x0)
        if res > tol:
            raise NoConvergence(1, res, label="consistent_initialize")
        return x0


def reduce_first(dae: SemilinearDAE) -> ReducedFirst:
    return ReducedFirst(dae)


def residual_L0(reduced, t, x) -> float:
    """Distance of (t, x) from the constraint manifold."""
    return reduced.residual_L0(t, x)


# ---------------------------------------------------------------------------
# cascade reduction


class ReducedCascade:
    """Level-by-level explicit form for structure-tagged fields."""

    def __init__(self, dae: SemilinearDAE):
        self.dae = dae
        ps = dae.projectors
        self.ps = ps
        self.nu = ps.nu
        self.n = ps.n
        self.variant = dae.field.structure_tag is StructureTag.STRUCTURED_VARIANT
        # chain-top slices: level s holds the order-s vectors of chains of
        # exact length s+1 (s = 1..nu-1)
        self.chain_blocks = {
            s: _select_block(dae, lambda m, j, s=s: j == s + 1 and m == s + 1)
            for s in range(1, max(self.nu, 1))
        }
        # wedge slices: order-s vectors of strictly longer chains
        self.wedge_blocks = {
            s: _select_block(dae, lambda m, j, s=s: j == s + 1 and m >= s + 2)
            for s in range(1, max(self.nu - 1, 1))
        }
        self.kernel = _select_block(dae, lambda m, j: j == 1)
        self.q1_basis = orth_basis(ps.q1)
        self.tol = dae.tol

    @property
    def level_count(self) -> int:
        """Number of equations in the reduced system (2 nu - 1, floor 1)."""
        return max(2 * self.nu - 1, 1)

    def evaluator(self) -> "_CascadeEvaluator":
        return _CascadeEvaluator(self)

    def split_norm(self, x) -> float:
        x1 = self.ps.p1 @ x
        x2s = self.ps.p2_sigma @ x
        x20 = self.ps.p20 @ x
        return float(np.linalg.norm(x1) + np.linalg.norm(x2s)
                     + np.linalg.norm(x20))

    def residual_L0(self, t, x) -> float:
        f = self.dae.field(t, x)
        raw = float(np.linalg.norm(self.ps.q2_star @ (f - self.dae.pencil.b @ x)))
        return raw / max(1.0, self.split_norm(x))

    def drift_w1(self, t, w1, evaluator: "_CascadeEvaluator"):
        """Right-hand side of the reduced ODE for w1 = corrected-A x1."""
        w1 = self.ps.q1 @ w1
        x1 = self.ps.a_tilde_inv @ w1
        parts = evaluator.algebraic_parts(t)
        x20 = evaluator.solve_x20(t, x1, parts)
        x = x1 + parts["eta_2sigma"] + x20
        f = self.dae.field(t, x)
        drift = self.ps.q1 @ (f - self.dae.pencil.b @ x1)
        return drift, x

    def consistent_point(self, t0, x_guess, tol: float | None = None):
        tol = tol if tol is not None else self.dae.tol.cons
        ev = self.evaluator()
        x1 = self.ps.p1 @ x_guess
        parts = ev.algebraic_parts(t0)
        if self.kernel.dim:
            ev.warm_x20 = self.kernel.x_coords(self.dae.pencil.b, x_guess)
        x20 = ev.solve_x20(t0, x1, parts)
        x0 = x1 + parts["eta_2sigma"] + x20
        res = self.residual_L0(t0, x0)
        if res > tol:
            raise NoConvergence(1, res, label="consistent_initialize")
        return x0

    def level_residuals(self, t, x, evaluator: "_CascadeEvaluator | None" = None):
        """Residual norm of every algebraic equation at the state x.

        Chain rows are evaluated on the components of x itself; the kernel
        row needs the level derivatives, which are functions of time only
        and come from the evaluator.
        """
        ev = evaluator or self.evaluator()
        fld = self.dae.field
        b = self.dae.pencil.b
        a = self.dae.pencil.a
        n_dim = self.dae.pencil.n_dim
        out = {}
        for s, blk in self.chain_blocks.items():
            if blk.dim == 0:
                continue
            arg = sum((self.chain_blocks[j].lift(
                self.chain_blocks[j].x_coords(b, x))
                for j in range(s, self.nu) if self.chain_blocks[j].dim),
                np.zeros(n_dim))
            if self.variant:
                arg = sum((self.chain_blocks[j].lift(
                    self.chain_blocks[j].x_coords(b, x))
                    for j in range(1, self.nu) if self.chain_blocks[j].dim),
                    np.zeros(n_dim))
            own = blk.lift(blk.x_coords(b, x))
            r = blk.y_coords(fld(t, arg) - b @ own)
            out[f"chain_level_{s}"] = float(np.linalg.norm(r))
        parts = ev.algebraic_parts(t)
        x1 = self.ps.p1 @ x
        x20 = self.ps.p20 @ x
        x2s = self.ps.p2_sigma @ x
        d_vec = a @ (parts["d_chain_1"] + parts["d_wedge_1"])
        r20 = self.kernel.y_coords(
            fld(t, x1 + x2s + x20) - b @ x20 - d_vec)
        out["kernel_level"] = float(np.linalg.norm(r20))
        return out


def reduce_cascade(dae: SemilinearDAE, waive_structure_check: bool = False,
                   check_config: "StructureCheckConfig | None" = None
                   ) -> ReducedCascade:
    """Build the cascade reduction, verifying the declared field structure
    by sampling unless explicitly waived."""
    if dae.field.structure_tag is StructureTag.GENERAL and dae.projectors.nu > 1:
        raise StructureViolation("<untagged>", float("nan"),
                                 "cascade reduction needs a structure tag")
    if (not waive_structure_check
            and dae.field.structure_tag is not StructureTag.GENERAL):
        check_structure(dae, check_config)
    return ReducedCascade(dae)


class _CascadeEvaluator:
    """Per-run solver state: warm starts and a small per-time cache."""

    _CACHE_MAX = 24

    def __init__(self, rc: ReducedCascade):
        self.rc = rc
        self.warm_chain: dict[int, np.ndarray] = {}
        self.warm_wedge: dict[int, np.ndarray] = {}
        self.warm_x20: np.ndarray | None = None
        self._chain_cache: dict[float, dict] = {}
        self._wedge_cache: dict[tuple[int, float], np.ndarray] = {}
        self.opts = SolveOptions(tol=rc.tol.solver)

    # -- chain-top levels ----------------------------------------------------
    def chain_values(self, t: float) -> dict:
        got = self._chain_cache.get(t)
        if got is not None:
            return got
        rc = self.rc
        fld = rc.dae.field
        b = rc.dae.pencil.b
        n_dim = rc.dae.pencil.n_dim
        values: dict[int, np.ndarray] = {}
        derivs: dict[int, np.ndarray] = {}
        jacs: dict[int, np.ndarray] = {}

        if rc.variant:
            blocks = [rc.chain_blocks[s] for s in range(1, rc.nu)]
            dims = [blk.dim for blk in blocks]
            total = sum(dims)
            if total:
                phi = np.column_stack([blk.phi for blk in blocks if blk.dim]) \
                    if total else np.zeros((n_dim, 0))
                q = np.column_stack([blk.q for blk in blocks if blk.dim])

                def resid(_t, _p, c):
                    x = phi @ c
                    return q.conj().T @ (fld(t, x) - b @ x)

                def jac(_t, _p, c):
                    x = phi @ c
                    return q.conj().T @ ((fld.jac(t, x) - b) @ phi)

                guess = self.warm_chain.get(-1, np.zeros(total))
                c = solve_newton(ImplicitProblem(resid, jac), t, None, guess,
                                 self.opts)
                self.warm_chain[-1] = c
                x = phi @ c
                j_full = q.conj().T @ ((fld.jac(t, x) - b) @ phi)
                dt_coords = q.conj().T @ fld.dt(t, x)
                dc = np.linalg.solve(j_full, -dt_coords)
                off = 0
                for s, blk in zip(range(1, rc.nu), blocks):
                    values[s] = c[off:off + blk.dim]
                    derivs[s] = dc[off:off + blk.dim]
                    off += blk.dim
            for s in range(1, rc.nu):
                values.setdefault(s, np.zeros(0))
                derivs.setdefault(s, np.zeros(0))
        else:
            for s in range(rc.nu - 1, 0, -1):
                blk = rc.chain_blocks[s]
                if blk.dim == 0:
                    values[s] = np.zeros(0)
                    derivs[s] = np.zeros(0)
                    continue
                upper = sum((rc.chain_blocks[j].lift(values[j])
                             for j in range(s + 1, rc.nu)
                             if rc.chain_blocks[j].dim),
                            np.zeros(n_dim))

                def resid(_t, _p, c, blk=blk, upper=upper):
                    x = upper + blk.lift(c)
                    return blk.y_coords(fld(t, x) - b @ blk.lift(c))

                def jac(_t, _p, c, blk=blk, upper=upper):
                    x = upper + blk.lift(c)
                    return blk.y_coords((fld.jac(t, x) @ blk.phi)
                                        - b @ blk.phi)

                guess = self.warm_chain.get(s, np.zeros(blk.dim))
                try:
                    c = solve_newton(ImplicitProblem(resid, jac), t, None,
                                     guess, self.opts)
                except NoConvergence as exc:
                    raise ConstraintSolveFailure(t, f"chain_level_{s}", exc)
                self.warm_chain[s] = c
                values[s] = c
                # implicit derivative with chain rule through upper levels
                x = upper + blk.lift(c)
                jf = fld.jac(t, x)
                j_own = blk.y_coords(jf @ blk.phi - b @ blk.phi)
                rhs = blk.y_coords(fld.dt(t, x))
                for j in range(s + 1, rc.nu):
                    ub = rc.chain_blocks[j]
                    if ub.dim:
                        rhs = rhs + blk.y_coords(jf @ ub.phi) @ derivs[j]
                derivs[s] = np.linalg.solve(j_own, -rhs)
                jacs[s] = j_own

        got = {"values": values, "derivatives": derivs, "jacobians": jacs}
        if len(self._chain_cache) >= self._CACHE_MAX:
            self._chain_cache.pop(next(iter(self._chain_cache)))
        self._chain_cache[t] = got
        return got

    # -- wedge levels ----------------------------------------------------------
    def wedge_value(self, s: int, t: float) -> np.ndarray:
        rc = self.rc
        key = (s, t)
        got = self._wedge_cache.get(key)
        if got is not None:
            return got
        blk = rc.wedge_blocks[s]
        if blk.dim == 0:
            self._wedge_cache[key] = np.zeros(0)
            return self._wedge_cache[key]
        fld = rc.dae.field
        a, b = rc.dae.pencil.a, rc.dae.pencil.b
        n_dim = rc.dae.pencil.n_dim
        chain = self.chain_values(t)
        chain_part = sum((rc.chain_blocks[j].lift(chain["values"][j])
                          for j in range(1, rc.nu) if rc.chain_blocks[j].dim),
                         np.zeros(n_dim))
        upper_wedge = sum((rc.wedge_blocks[i].lift(self.wedge_value(i, t))
                           for i in range(s + 1, rc.nu - 1)),
                          np.zeros(n_dim))
        if s == rc.nu - 2:
            d_term = rc.chain_blocks[rc.nu - 1].lift(
                chain["derivatives"][rc.nu - 1]) if rc.chain_blocks[rc.nu - 1].dim \
                else np.zeros(n_dim)
        else:
            d_chain = rc.chain_blocks[s + 1].lift(chain["derivatives"][s + 1]) \
                if rc.chain_blocks[s + 1].dim else np.zeros(n_dim)
            d_wedge = rc.wedge_blocks[s + 1].lift(self.wedge_derivative(s + 1, t))
            d_term = d_chain + d_wedge
        offset = a @ d_term

        def resid(_t, _p, c):
            x = chain_part + upper_wedge + blk.lift(c)
            return blk.y_coords(fld(t, x) - b @ blk.lift(c) - offset)

        def jac(_t, _p, c):
            x = chain_part + upper_wedge + blk.lift(c)
            return blk.y_coords(fld.jac(t, x) @ blk.phi - b @ blk.phi)

        guess = self.warm_wedge.get(s, np.zeros(blk.dim))
        try:
            c = solve_newton(ImplicitProblem(resid, jac), t, None, guess,
                             self.opts)
        except NoConvergence as exc:
            raise ConstraintSolveFailure(t, f"wedge_level_{s}", exc)
        self.warm_wedge[s] = c
        if len(self._wedge_cache) >= 4 * self._CACHE_MAX:
            self._wedge_cache.pop(next(iter(self._wedge_cache)))
        self._wedge_cache[key] = c
        return c

    def wedge_derivative(self, s: int, t: float) -> np.ndarray:
        """Central finite difference of the wedge-level branch."""
        blk = self.rc.wedge_blocks[s]
        if blk.dim == 0:
            return np.zeros(0)
        h = max(1e-6, 1e-6 * abs(t))
        return (self.wedge_value(s, t + h) - self.wedge_value(s, t - h)) / (2 * h)

    # -- assembled pieces --------------------------------------------------------
    def eta_2sigma(self, t: float) -> np.ndarray:
        rc = self.rc
        n_dim = rc.dae.pencil.n_dim
        if rc.nu <= 1:
            return np.zeros(n_dim)
        chain = self.chain_values(t)
        out = sum((rc.chain_blocks[j].lift(chain["values"][j])
                   for j in range(1, rc.nu) if rc.chain_blocks[j].dim),
                  np.zeros(n_dim))
        for s in range(1, rc.nu - 1):
            out = out + rc.wedge_blocks[s].lift(self.wedge_value(s, t))
        return out

    def algebraic_parts(self, t: float) -> dict:
        rc = self.rc
        n_dim = rc.dae.pencil.n_dim
        zero = np.zeros(n_dim)
        if rc.nu <= 1:
            return {"eta_2sigma": zero, "d_chain_1": zero, "d_wedge_1": zero}
        chain = self.chain_values(t)
        d_chain_1 = rc.chain_blocks[1].lift(chain["derivatives"][1]) \
            if rc.chain_blocks[1].dim else zero
        d_wedge_1 = zero
        if rc.nu >= 3 and rc.wedge_blocks[1].dim:
            d_wedge_1 = rc.wedge_blocks[1].lift(self.wedge_derivative(1, t))
        return {"eta_2sigma": self.eta_2sigma(t),
                "d_chain_1": d_chain_1, "d_wedge_1": d_wedge_1}

    def solve_x20(self, t: float, x1: np.ndarray, parts: dict,
                  x2_sigma: np.ndarray | None = None) -> np.ndarray:
        rc = self.rc
        blk = rc.kernel
        if blk.dim == 0:
            return np.zeros(rc.dae.pencil.n_dim)
        fld = rc.dae.field
        a, b = rc.dae.pencil.a, rc.dae.pencil.b
        x2s = parts["eta_2sigma"] if x2_sigma is None else x2_sigma
        d_vec = a @ (parts["d_chain_1"] + parts["d_wedge_1"])
        opts = SolveOptions(tol=self.opts.tol * max(1.0, float(np.linalg.norm(x1))))

        def resid(_t, _p, c):
            x = x1 + x2s + blk.lift(c)
            return blk.y_coords(fld(t, x) - b @ blk.lift(c) - d_vec)

        def jac(_t, _p, c):
            x = x1 + x2s + blk.lift(c)
            return blk.y_coords(fld.jac(t, x) @ blk.phi - b @ blk.phi)

        guess = self.warm_x20 if self.warm_x20 is not None else np.zeros(blk.dim)
        try:
            c = solve_newton(ImplicitProblem(resid, jac), t, None, guess, opts)
        except NoConvergence as exc:
            raise ConstraintSolveFailure(t, "kernel_level", exc)
        self.warm_x20 = c
        return blk.lift(c)


# ---------------------------------------------------------------------------
# structure verification


@dataclass
class StructureCheckConfig:
    n_samples: int = 32
    rel_perturbation: float = 1e-2
    seed: int = 1234
    tol: float | None = None
    state_scale: float = 1.0


@dataclass
class StructureReport:
    passed: bool
    worst_projection: str
    worst_dependence: float
    per_projection: dict = dc_field(default_factory=dict)


def check_structure(dae: SemilinearDAE,
                    config: StructureCheckConfig | None = None
                    ) -> StructureReport:
    """Sampled verification of the declared field structure.

    For every projected component that the declared structure restricts,
    sample states, perturb only the excluded state slices, and measure the
    induced change of the projected component.  Raises StructureViolation
    on the first projection whose observed dependence exceeds tolerance.
    """
    cfg = config or StructureCheckConfig()
    tol = cfg.tol if cfg.tol is not None else dae.tol.struct_dep
    tag = dae.field.structure_tag
    nu = dae.projectors.nu
    if tag is StructureTag.GENERAL:
        raise StructureViolation("<untagged>", float("nan"),
                                 "field carries no structure tag")
    if nu <= 1:
        return StructureReport(True, "<vacuous>", 0.0)

    rc = ReducedCascade(dae)
    n_dim = dae.pencil.n_dim
    p1_basis = orth_basis(dae.projectors.p1)
    all_dirs = [p1_basis[:, k] for k in range(p1_basis.shape[1])]
    all_dirs += [rc.kernel.phi[:, k] for k in range(rc.kernel.dim)]
    chain_dirs = {s: [rc.chain_blocks[s].phi[:, k]
                      for k in range(rc.chain_blocks[s].dim)]
                  for s in rc.chain_blocks}
    wedge_dirs = {s: [rc.wedge_blocks[s].phi[:, k]
                      for k in range(rc.wedge_blocks[s].dim)]
                  for s in rc.wedge_blocks}

    checks = []  # (label, q_cols, allowed_levels)
    for s in range(1, nu):
        blk = rc.chain_blocks[s]
        if blk.dim == 0:
            continue
        if tag is StructureTag.STRUCTURED:
            allowed = {("chain", j) for j in range(s, nu)}
        else:
            allowed = {("chain", j) for j in range(1, nu)}
        checks.append((f"chain_rows_level_{s}", blk.q, allowed))
    for s in range(1, nu - 1):
        blk = rc.wedge_blocks[s]
        if blk.dim == 0:
            continue
        allowed = {("chain", j) for j in range(1, nu)}
        allowed |= {("wedge", i) for i in range(s, nu - 1)}
        checks.append((f"wedge_rows_level_{s}", blk.q, allowed))

    rng = np.random.default_rng(cfg.seed)
    report: dict[str, float] = {}
    worst_label, worst_dep = "<none>", 0.0
    for label, q_cols, allowed in checks:
        excluded = list(all_dirs)
        for j, dirs in chain_dirs.items():
            if ("chain", j) not in allowed:
                excluded.extend(dirs)
        for i, dirs in wedge_dirs.items():
            if ("wedge", i) not in allowed:
                excluded.extend(dirs)
        dep = 0.0
        sample = None
        for _ in range(cfg.n_samples):
            t = float(rng.uniform(0.0, 10.0))
            x = cfg.state_scale * rng.standard_normal(n_dim)
            base = q_cols.conj().T @ dae.field(t, x)
            for direction in excluded:
                h = cfg.rel_perturbation * cfg.state_scale
                moved = q_cols.conj().T @ dae.field(t, x + h * direction)
                delta = float(np.linalg.norm(moved - base)) / (
                    h * max(1.0, float(np.linalg.norm(base))))
                if delta > dep:
                    dep = delta
                    sample = (t, x.copy())
        report[label] = dep
        if dep > worst_dep:
            worst_dep, worst_label = dep, label
        if dep > tol:
            raise StructureViolation(label, dep, sample)
    return StructureReport(True, worst_label, worst_dep, report)
