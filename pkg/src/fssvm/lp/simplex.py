"""Reference dense simplex backend.

Bounded-variable revised simplex on ``A x + s = rhs`` where every row owns a
slack ``s`` whose bounds encode the row sense (``<=``: s >= 0, ``>=``: s <= 0,
``=``: s = 0).  The basis inverse is kept explicitly and refreshed from
scratch every ``REFACTOR`` pivots.

A cold start runs a singleton crash, then an artificial-variable phase 1 for
the rows the crash could not cover, then phase 2.  A warm start (basis from
an earlier solve of a model with the same shape) runs the dual simplex when
the basis is still dual feasible, which is the common case after bound
changes in branch and bound.
"""

from __future__ import annotations

import time

import numpy as np

from .model import GE, LE, Basis, LpSolution, MilpModel, TOL_FEAS

REFACTOR = 64
DEGENERATE_LIMIT = 1000
PIVOT_TOL = 1e-9
DUAL_TOL = 1e-9
HARRIS_TOL = 1e-9
MAX_ITER_FACTOR = 50


class _Solver:
    def __init__(self, model: MilpModel, time_limit: float | None, max_iter: int | None):
        self.model = model
        m, n = model.num_rows, model.num_vars
        self.m, self.n = m, n
        self.deadline = None if time_limit is None else time.perf_counter() + time_limit
        self.max_iter = max_iter or MAX_ITER_FACTOR * (m + n) + 1000
        self.iterations = 0

        slack_lb = np.zeros(m)
        slack_ub = np.zeros(m)
        for i, s in enumerate(model.sense):
            if s == LE:
                slack_ub[i] = np.inf
            elif s == GE:
                slack_lb[i] = -np.inf
        self.M = np.hstack([model.A, np.eye(m)])
        self.lb = np.concatenate([model.lb, slack_lb])
        self.ub = np.concatenate([model.ub, slack_ub])
        self.cost = np.concatenate([model.c, np.zeros(m)])
        self.rhs = model.rhs.astype(float)
        self.ncols = n + m

    # ------------------------------------------------------------------ state

    def _place_nonbasic(self) -> None:
        nb = ~self.is_basic
        lo_ok = np.isfinite(self.lb)
        hi_ok = np.isfinite(self.ub)
        x = np.where(lo_ok, self.lb, np.where(hi_ok, self.ub, 0.0))
        up = self.at_upper & hi_ok
        x = np.where(up, self.ub, x)
        # a variable placed on its upper bound because lb is infinite is "at upper"
        self.at_upper = np.where(~lo_ok & hi_ok, True, self.at_upper & hi_ok)
        self.x = np.where(nb, x, getattr(self, "x", np.zeros(self.ncols)))

    def _refactor(self) -> bool:
        B = self.M[:, self.basis]
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            return False
        if not np.all(np.isfinite(self.Binv)):
            return False
        self._recompute_xb()
        self.since_refactor = 0
        return True

    def _recompute_xb(self) -> None:
        nb = ~self.is_basic
        r = self.rhs - self.M[:, nb] @ self.x[nb]
        self.x[self.basis] = self.Binv @ r

    def _set_basis(self, basis: np.ndarray) -> None:
        self.basis = np.asarray(basis, dtype=int).copy()
        self.is_basic = np.zeros(self.ncols, dtype=bool)
        self.is_basic[self.basis] = True

    def _pivot(self, r: int, q: int, alpha: np.ndarray) -> None:
        piv = alpha[r]
        row = self.Binv[r] / piv
        self.Binv -= np.outer(alpha, row)
        self.Binv[r] = row
        p = self.basis[r]
        self.is_basic[p] = False
        self.is_basic[q] = True
        self.basis[r] = q
        self.since_refactor += 1

    def _timed_out(self) -> bool:
        return self.deadline is not None and time.perf_counter() > self.deadline

    def _movable(self) -> np.ndarray:
        return (self.ub - self.lb) > 0

    # ------------------------------------------------------------------ cold start

    def _crash(self) -> list[int]:
        """Slack basis, swapping in singleton structural columns for violated rows.

        Returns the rows that still need an artificial variable.
        """
        m, n = self.m, self.n
        self.at_upper = np.zeros(self.ncols, dtype=bool)
        self._set_basis(np.arange(n, n + m))
        self._place_nonbasic()
        A = self.M[:, :n]
        nnz = (A != 0).sum(axis=0)
        act = A @ self.x[:n]
        slack = self.rhs - act
        need: list[int] = []
        used = np.zeros(n, dtype=bool)
        singles_by_row: dict[int, list[int]] = {}
        for j in np.flatnonzero(nnz == 1):
            i = int(np.flatnonzero(A[:, j])[0])
            singles_by_row.setdefault(i, []).append(int(j))
        for i in range(m):
            si = n + i
            if self.lb[si] - TOL_FEAS <= slack[i] <= self.ub[si] + TOL_FEAS:
                continue
            placed = False
            for j in singles_by_row.get(i, []):
                if used[j]:
                    continue
                a = A[i, j]
                # choose the slack value at the violated bound, solve for x_j
                s_target = self.lb[si] if slack[i] < self.lb[si] else self.ub[si]
                xj = self.x[j] + (slack[i] - s_target) / a
                if self.lb[j] - TOL_FEAS <= xj <= self.ub[j] + TOL_FEAS:
                    used[j] = True
                    self.basis[i] = j
                    self.is_basic[j] = True
                    self.is_basic[si] = False
                    self.x[si] = s_target
                    self.at_upper[si] = s_target == self.ub[si] and np.isfinite(self.ub[si])
                    self.x[j] = xj
                    placed = True
                    break
            if not placed:
                need.append(i)
        return need

    def _add_artificials(self, rows: list[int]) -> None:
        """Replace the violated slacks by artificial columns +-e_i.

        The crash basis is diagonal (slacks and row singletons), so each
        artificial's value only depends on its own row.
        """
        self.n_art = len(rows)
        if rows:
            n, m, k = self.n, self.m, len(rows)
            rows_a = np.asarray(rows)
            struct_nb = ~self.is_basic[:n]
            xs = np.where(struct_nb, self.x[:n], 0.0)
            for i in rows:
                si = n + i
                slack = self.rhs[i] - self.M[i, :n] @ xs
                target = self.lb[si] if slack < self.lb[si] else self.ub[si]
                self.x[si] = target
                self.at_upper[si] = bool(target == self.ub[si])
                self.is_basic[si] = False
            res = self.rhs[rows_a] - self.M[rows_a, :n] @ xs - self.x[n + rows_a]
            art = np.zeros((m, k))
            art[rows_a, np.arange(k)] = np.where(res < 0, -1.0, 1.0)
            self.M = np.hstack([self.M, art])
            self.lb = np.concatenate([self.lb, np.zeros(k)])
            self.ub = np.concatenate([self.ub, np.full(k, np.inf)])
            self.cost = np.concatenate([self.cost, np.zeros(k)])
            self.x = np.concatenate([self.x, np.zeros(k)])
            self.at_upper = np.concatenate([self.at_upper, np.zeros(k, dtype=bool)])
            self.is_basic = np.concatenate([self.is_basic, np.ones(k, dtype=bool)])
            self.basis[rows_a] = self.ncols + np.arange(k)
            self.ncols += k
        if not self._refactor():
            raise np.linalg.LinAlgError("crash basis is singular")

    # ------------------------------------------------------------------ primal

    def _primal(self, cost: np.ndarray) -> str:
        bland = False
        degenerate = 0
        movable = self._movable()
        while True:
            if self.iterations >= self.max_iter:
                return "numerical-failure"
            if self._timed_out():
                return "time-limit"
            if self.since_refactor >= REFACTOR:
                if not self._refactor():
                    return "numerical-failure"
            y = self.Binv.T @ cost[self.basis]
            d = cost - self.M.T @ y
            nb = ~self.is_basic & movable
            free = ~np.isfinite(self.lb) & ~np.isfinite(self.ub)
            at_lo = nb & ~self.at_upper
            at_hi = nb & self.at_upper
            inc = (at_lo | (nb & free)) & (d < -DUAL_TOL)
            dec = (at_hi | (nb & free)) & (d > DUAL_TOL)
            elig = inc | dec
            if not elig.any():
                return "optimal"
            if bland:
                q = int(np.flatnonzero(elig)[0])
            else:
                score = np.where(elig, np.abs(d), -1.0)
                q = int(np.argmax(score))
            dirn = 1.0 if inc[q] else -1.0
            alpha = self.Binv @ self.M[:, q]
            delta = -dirn * alpha
            xb = self.x[self.basis]
            lbb = self.lb[self.basis]
            ubb = self.ub[self.basis]
            dn = delta < -PIVOT_TOL
            up = delta > PIVOT_TOL
            with np.errstate(divide="ignore", invalid="ignore"):
                lim_dn = np.where(dn & np.isfinite(lbb), (xb - lbb + HARRIS_TOL) / -delta, np.inf)
                lim_up = np.where(up & np.isfinite(ubb), (ubb - xb + HARRIS_TOL) / delta, np.inf)
                ex_dn = np.where(dn & np.isfinite(lbb), (xb - lbb) / -delta, np.inf)
                ex_up = np.where(up & np.isfinite(ubb), (ubb - xb) / delta, np.inf)
            lim = np.minimum(lim_dn, lim_up)
            exact = np.maximum(np.minimum(ex_dn, ex_up), 0.0)
            tmax = float(lim.min()) if lim.size else np.inf
            flip = self.ub[q] - self.lb[q]
            if np.isinf(tmax) and np.isinf(flip):
                return "unbounded"
            if flip <= tmax:
                # bound flip: no basis change
                t = flip
                self.x[self.basis] = xb + t * delta
                self.x[q] += dirn * t
                self.at_upper[q] = not self.at_upper[q] if np.isfinite(flip) else self.at_upper[q]
                self.iterations += 1
                degenerate = 0
                bland = False
                continue
            cand = np.flatnonzero(exact <= tmax)
            if bland:
                tmin = exact[cand].min()
                ties = cand[exact[cand] <= tmin + 1e-12]
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                r = int(cand[np.argmax(np.abs(delta[cand]))])
            t = float(exact[r])
            if abs(alpha[r]) < PIVOT_TOL:
                if not self._refactor():
                    return "numerical-failure"
                continue
            p = self.basis[r]
            self.x[self.basis] = xb + t * delta
            self.x[q] += dirn * t
            to_lower = delta[r] < 0
            self.x[p] = self.lb[p] if to_lower else self.ub[p]
            self.at_upper[p] = not to_lower
            self._pivot(r, q, alpha)
            self.iterations += 1
            if t <= 1e-12:
                degenerate += 1
                if degenerate >= DEGENERATE_LIMIT:
                    bland = True
            else:
                degenerate = 0
                bland = False

    # ------------------------------------------------------------------ dual

    def _dual_feasible(self, d: np.ndarray) -> bool:
        nb = ~self.is_basic & self._movable()
        free = ~np.isfinite(self.lb) & ~np.isfinite(self.ub)
        bad_lo = nb & ~self.at_upper & ~free & (d < -DUAL_TOL * 100)
        bad_hi = nb & self.at_upper & (d > DUAL_TOL * 100)
        bad_free = nb & free & (np.abs(d) > DUAL_TOL * 100)
        # boxed variables can be flipped to restore dual feasibility
        boxed = np.isfinite(self.lb) & np.isfinite(self.ub)
        fix = (bad_lo | bad_hi) & boxed
        if fix.any():
            self.at_upper[fix] = ~self.at_upper[fix]
            self._place_nonbasic()
            self._recompute_xb()
        return not ((bad_lo | bad_hi) & ~boxed).any() and not bad_free.any()

    def _dual(self, cost: np.ndarray) -> str:
        movable = self._movable()
        bland = False
        stall = 0
        while True:
            if self.iterations >= self.max_iter:
                return "numerical-failure"
            if self._timed_out():
                return "time-limit"
            if self.since_refactor >= REFACTOR:
                if not self._refactor():
                    return "numerical-failure"
            xb = self.x[self.basis]
            lbb = self.lb[self.basis]
            ubb = self.ub[self.basis]
            below = lbb - xb
            above = xb - ubb
            viol = np.maximum(below, above)
            infeasible = viol > TOL_FEAS * 0.1
            if not infeasible.any():
                return "optimal"
            if bland:
                rows = np.flatnonzero(infeasible)
                r = int(rows[np.argmin(self.basis[rows])])
            else:
                r = int(np.argmax(viol))
            p = self.basis[r]
            increase = below[r] > 0
            target = lbb[r] if increase else ubb[r]
            y = self.Binv.T @ cost[self.basis]
            d = cost - self.M.T @ y
            alpha_r = self.Binv[r] @ self.M
            nb = ~self.is_basic & movable
            free = ~np.isfinite(self.lb) & ~np.isfinite(self.ub)
            lo = nb & ~self.at_upper & ~free
            hi = nb & self.at_upper & ~free
            if increase:
                cand = (lo & (alpha_r < -PIVOT_TOL)) | (hi & (alpha_r > PIVOT_TOL)) | (nb & free & (np.abs(alpha_r) > PIVOT_TOL))
            else:
                cand = (lo & (alpha_r > PIVOT_TOL)) | (hi & (alpha_r < -PIVOT_TOL)) | (nb & free & (np.abs(alpha_r) > PIVOT_TOL))
            idx = np.flatnonzero(cand)
            if idx.size == 0:
                return "infeasible"
            a = np.abs(alpha_r[idx])
            dd = np.abs(d[idx])
            if bland:
                ratios = dd / a
                tmin = ratios.min()
                q = int(idx[ratios <= tmin + 1e-12][0])
            else:
                bound = ((dd + DUAL_TOL) / a).min()
                ok = dd / a <= bound
                q = int(idx[ok][np.argmax(a[ok])])
            alpha = self.Binv @ self.M[:, q]
            if abs(alpha[r]) < PIVOT_TOL:
                if not self._refactor():
                    return "numerical-failure"
                continue
            step = (target - xb[r]) / -alpha[r]
            self.x[self.basis] = xb - step * alpha
            self.x[q] += step
            self.x[p] = target
            self.at_upper[p] = not increase
            self._pivot(r, q, alpha)
            self.iterations += 1
            if abs(step) <= 1e-12:
                stall += 1
                if stall >= DEGENERATE_LIMIT:
                    bland = True
            else:
                stall = 0

    # ------------------------------------------------------------------ drivers

    def solve_cold(self) -> str:
        need = self._crash()
        self.since_refactor = 0
        self._add_artificials(need)
        if self.n_art:
            phase1 = np.zeros(self.ncols)
            phase1[self.ncols - self.n_art:] = 1.0
            status = self._primal(phase1)
            if status != "optimal":
                return status
            self._refactor()
            art = self.x[self.ncols - self.n_art:]
            scale = max(1.0, float(np.max(np.abs(self.rhs), initial=0.0)))
            if float(art.sum()) > TOL_FEAS * scale:
                return "infeasible"
            self.ub[self.ncols - self.n_art:] = 0.0
        return self._primal(self.cost)

    def solve_warm(self, warm: Basis) -> str | None:
        """Return a status, or None when the warm start is unusable."""
        if warm.basic.shape != (self.m,) or warm.at_upper.shape != (self.ncols,):
            return None
        self.n_art = 0
        self._set_basis(warm.basic)
        self.at_upper = warm.at_upper.copy()
        self.x = np.zeros(self.ncols)
        self._place_nonbasic()
        if not self._refactor():
            return None
        y = self.Binv.T @ self.cost[self.basis]
        d = self.cost - self.M.T @ y
        if self._dual_feasible(d):
            status = self._dual(self.cost)
            if status == "optimal":
                # the dual pass leaves a primal feasible basis; polish any dual slips
                status = self._primal(self.cost)
            return status if status in ("optimal", "infeasible", "time-limit") else None
        xb = self.x[self.basis]
        if np.all(xb >= self.lb[self.basis] - TOL_FEAS) and np.all(xb <= self.ub[self.basis] + TOL_FEAS):
            status = self._primal(self.cost)
            return status if status != "numerical-failure" else None
        return None

    def result(self, status: str) -> LpSolution:
        n, m = self.n, self.m
        if status != "optimal":
            return LpSolution(status, iterations=self.iterations)
        self._refactor()
        cb = self.cost[self.basis]
        y = self.Binv.T @ cb
        d = self.cost - self.M.T @ y
        x = self.x[:n].copy()
        # snap nonbasic structurals onto their bounds
        obj = float(self.model.c @ x + self.model.obj_const)
        basic = self.basis.copy()
        if self.n_art:
            # a basic artificial stands in for its row's slack (parallel columns)
            for r, b in enumerate(basic):
                if b >= n + m:
                    basic[r] = n + int(np.flatnonzero(self.M[:, b])[0])
        at_upper = self.at_upper[: n + m].copy()
        return LpSolution("optimal", obj, x, y.copy(), d[:n].copy(), self.iterations,
                          Basis(basic, at_upper))


def solve(model: MilpModel, time_limit: float | None = None, warm_start: Basis | None = None,
          max_iter: int | None = None) -> LpSolution:
    if warm_start is not None:
        s = _Solver(model, time_limit, max_iter)
        status = s.solve_warm(warm_start)
        if status is not None:
            return s.result(status)
    s = _Solver(model, time_limit, max_iter)
    return s.result(s.solve_cold())
