"""Reverse-mode automatic differentiation over rank-<=2 float64 tensors.

A Tape records primitive operations as an append-only node list; creation
order is a topological order, so backward is a single reverse sweep with
adjoint accumulation (fan-out sums). Operations where every operand is a
constant fold to a constant and record nothing, which keeps generic
physics code cheap when only some inputs are being differentiated.

Conventions: all tensor payloads are 2-D C-contiguous float64; scalars are
1x1. Elementwise ops require exactly matching shapes (no implicit
broadcasting; the explicit badd/bmul ops broadcast a single row).
"""

import math

import numpy as np

from ._backend import K
from .errors import ContractError, DomainError, GradientError


def _as_payload(values):
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise ContractError(f"tensors are rank <= 2, got rank {arr.ndim}")
    if arr.size == 0:
        raise ContractError("empty tensors are not supported")
    return np.ascontiguousarray(arr)


class Tensor:
    """Value plus an optional tape node id. node_id None means constant."""

    __slots__ = ("values", "node_id", "tape")

    def __init__(self, values, node_id=None, tape=None):
        self.values = values
        self.node_id = node_id
        self.tape = tape

    @property
    def shape(self):
        return self.values.shape

    @property
    def is_constant(self):
        return self.node_id is None

    def item(self):
        if self.values.shape != (1, 1):
            raise ContractError(f"item() needs a 1x1 tensor, got {self.values.shape}")
        return float(self.values[0, 0])

    def __repr__(self):
        tag = "const" if self.node_id is None else f"node {self.node_id}"
        return f"Tensor(shape={self.values.shape}, {tag})"


def constant(values):
    """An untracked tensor; participates in ops but never receives a gradient."""
    arr = _as_payload(values)
    if not np.all(np.isfinite(arr)):
        raise ContractError("non-finite values in tensor construction")
    return Tensor(arr, None)


class Gradients:
    """Adjoints keyed by node id: one entry per ancestor reachable from the
    backward root, nothing for unreachable nodes."""

    def __init__(self, by_node, n_processed):
        self._by_node = by_node
        self.n_processed = n_processed

    def __len__(self):
        return len(self._by_node)

    def __contains__(self, t):
        return t.node_id is not None and t.node_id in self._by_node

    def wrt(self, t):
        if t.node_id is None:
            raise ContractError("constant tensors have no gradient entry")
        try:
            return self._by_node[t.node_id]
        except KeyError:
            raise ContractError(
                f"node {t.node_id} is not an ancestor of the backward root"
            ) from None

    def get(self, t, default=None):
        if t.node_id is None:
            return default
        return self._by_node.get(t.node_id, default)


class Tape:
    """Append-only operation record. One tape per differentiated computation;
    tensors from different tapes must not be mixed."""

    def __init__(self):
        # node: (op, parent ids (None for constant operands), parent shapes, aux)
        self._nodes = []

    @property
    def n_nodes(self):
        return len(self._nodes)

    def tensor(self, values):
        """A tracked leaf: gradients can be requested for it after backward."""
        arr = _as_payload(values)
        if not np.all(np.isfinite(arr)):
            raise ContractError("non-finite values in tensor construction")
        nid = len(self._nodes)
        self._nodes.append(("leaf", (), (), ()))
        return Tensor(arr, nid, self)

    # -- recording helpers --

    def _coerce(self, x):
        if isinstance(x, Tensor):
            if x.node_id is not None and x.tape is not self:
                raise ContractError("tensor belongs to a different tape")
            return x
        return constant(x)

    def _emit(self, op, operands, aux, values):
        if all(t.node_id is None for t in operands):
            return Tensor(values, None)
        nid = len(self._nodes)
        parents = tuple(t.node_id for t in operands)
        pshapes = tuple(t.values.shape for t in operands)
        self._nodes.append((op, parents, pshapes, aux))
        return Tensor(values, nid, self)

    @staticmethod
    def _match(a, b, op):
        if a.values.shape != b.values.shape:
            raise ContractError(
                f"{op}: shape mismatch {a.values.shape} vs {b.values.shape}"
            )

    # -- elementwise binary ops (python-number operands use the scalar forms) --

    def add(self, a, b):
        if isinstance(b, (int, float)) and not isinstance(b, bool):
            a = self._coerce(a)
            return self._emit("add_s", (a,), (), K.add_s(a.values, float(b)))
        if isinstance(a, (int, float)) and not isinstance(a, bool):
            return self.add(b, a)
        a, b = self._coerce(a), self._coerce(b)
        self._match(a, b, "add")
        return self._emit("add", (a, b), (), K.add(a.values, b.values))

    def sub(self, a, b):
        if isinstance(b, (int, float)) and not isinstance(b, bool):
            a = self._coerce(a)
            return self._emit("add_s", (a,), (), K.add_s(a.values, -float(b)))
        if isinstance(a, (int, float)) and not isinstance(a, bool):
            b = self._coerce(b)
            return self._emit("rsub_s", (b,), (), K.rsub_s(float(a), b.values))
        a, b = self._coerce(a), self._coerce(b)
        self._match(a, b, "sub")
        return self._emit("sub", (a, b), (), K.sub(a.values, b.values))

    def mul(self, a, b):
        if isinstance(b, (int, float)) and not isinstance(b, bool):
            a = self._coerce(a)
            return self._emit("mul_s", (a,), (float(b),), K.mul_s(a.values, float(b)))
        if isinstance(a, (int, float)) and not isinstance(a, bool):
            return self.mul(b, a)
        a, b = self._coerce(a), self._coerce(b)
        self._match(a, b, "mul")
        return self._emit("mul", (a, b), (a.values, b.values), K.mul(a.values, b.values))

    def div(self, a, b):
        if isinstance(b, (int, float)) and not isinstance(b, bool):
            if b == 0.0:
                raise DomainError("division by exact zero")
            a = self._coerce(a)
            return self._emit(
                "mul_s", (a,), (1.0 / float(b),), K.mul_s(a.values, 1.0 / float(b))
            )
        if isinstance(a, (int, float)) and not isinstance(a, bool):
            b = self._coerce(b)
            if np.any(b.values == 0.0):
                raise DomainError("division by exact zero")
            y = K.rdiv_s(float(a), b.values)
            return self._emit("rdiv_s", (b,), (b.values, y), y)
        a, b = self._coerce(a), self._coerce(b)
        self._match(a, b, "div")
        if np.any(b.values == 0.0):
            raise DomainError("division by exact zero")
        y = K.div(a.values, b.values)
        return self._emit("div", (a, b), (b.values, y), y)

    def neg(self, a):
        a = self._coerce(a)
        return self._emit("neg", (a,), (), K.mul_s(a.values, -1.0))

    def pow(self, a, c):
        """Constant real exponent only."""
        a = self._coerce(a)
        c = float(c)
        if c != math.floor(c) and np.any(a.values < 0.0):
            raise DomainError("fractional power of a negative value")
        if c < 0.0 and np.any(a.values == 0.0):
            raise DomainError("negative power of zero")
        return self._emit("pow", (a,), (a.values, c), K.pow_s(a.values, c))

    # -- elementwise unary ops --

    def sin(self, a):
        a = self._coerce(a)
        return self._emit("sin", (a,), (a.values,), K.sin_(a.values))

    def cos(self, a):
        a = self._coerce(a)
        return self._emit("cos", (a,), (a.values,), K.cos_(a.values))

    def sqrt(self, a):
        a = self._coerce(a)
        if np.any(a.values < 0.0):
            raise DomainError("sqrt of a negative value")
        y = K.sqrt_(a.values)
        return self._emit("sqrt", (a,), (y,), y)

    def abs(self, a):
        a = self._coerce(a)
        return self._emit("abs", (a,), (a.values,), K.abs_(a.values))

    def log10(self, a):
        """Argument is clamped below at 1e-30; the clamp region has zero slope
        only through an explicit floor construction upstream, here the local
        derivative uses the clamped argument."""
        a = self._coerce(a)
        return self._emit("log10", (a,), (a.values,), K.log10_(a.values))

    def relu(self, a):
        a = self._coerce(a)
        return self._emit("relu", (a,), (a.values,), K.relu_(a.values))

    # -- structural ops --

    def matmul(self, a, b):
        a, b = self._coerce(a), self._coerce(b)
        if a.values.shape[1] != b.values.shape[0]:
            raise ContractError(
                f"matmul: inner dims differ {a.values.shape} x {b.values.shape}"
            )
        return self._emit(
            "matmul", (a, b), (a.values, b.values, False), K.gemm(a.values, b.values)
        )

    def matmul_nt(self, a, b):
        """a @ b.T; the natural form for (out x in) weight matrices."""
        a, b = self._coerce(a), self._coerce(b)
        if a.values.shape[1] != b.values.shape[1]:
            raise ContractError(
                f"matmul_nt: trailing dims differ {a.values.shape} x {b.values.shape}"
            )
        return self._emit(
            "matmul",
            (a, b),
            (a.values, b.values, True),
            K.gemm(a.values, b.values, tb=True),
        )

    def badd(self, a, r):
        """Add a single row r (1,m) to every row of a (n,m)."""
        a, r = self._coerce(a), self._coerce(r)
        if r.values.shape != (1, a.values.shape[1]):
            raise ContractError(
                f"badd: row shape {r.values.shape} does not match {a.values.shape}"
            )
        return self._emit("badd", (a, r), (), K.badd(a.values, r.values))

    def bmul(self, a, r):
        """Multiply every row of a (n,m) by the row r (1,m)."""
        a, r = self._coerce(a), self._coerce(r)
        if r.values.shape != (1, a.values.shape[1]):
            raise ContractError(
                f"bmul: row shape {r.values.shape} does not match {a.values.shape}"
            )
        return self._emit(
            "bmul", (a, r), (a.values, r.values), K.bmul(a.values, r.values)
        )

    def sum(self, a):
        a = self._coerce(a)
        return self._emit(
            "sum", (a,), (), np.array([[K.sum_all(a.values)]])
        )

    def mean(self, a):
        a = self._coerce(a)
        n = a.values.size
        return self._emit(
            "mean", (a,), (n,), np.array([[K.sum_all(a.values) / n]])
        )

    def concat_cols(self, parts):
        parts = [self._coerce(p) for p in parts]
        if not parts:
            raise ContractError("concat_cols needs at least one part")
        rows = parts[0].values.shape[0]
        for p in parts:
            if p.values.shape[0] != rows:
                raise ContractError("concat_cols: row counts differ")
        widths = tuple(p.values.shape[1] for p in parts)
        values = np.ascontiguousarray(
            np.concatenate([p.values for p in parts], axis=1)
        )
        return self._emit("concat", tuple(parts), (widths,), values)

    def slice_col(self, a, j):
        a = self._coerce(a)
        if not 0 <= j < a.values.shape[1]:
            raise ContractError(
                f"slice_col: column {j} out of range for shape {a.values.shape}"
            )
        values = np.ascontiguousarray(a.values[:, j : j + 1])
        return self._emit("slice", (a,), (j,), values)

    # -- reverse sweep --

    def backward(self, root):
        """Adjoints of a scalar root with respect to every reachable ancestor.
        Single reverse pass; each reachable node is processed exactly once."""
        if not isinstance(root, Tensor):
            raise ContractError("backward root must be a Tensor")
        if root.node_id is not None and root.tape is not self:
            raise ContractError("backward root belongs to a different tape")
        if root.values.shape != (1, 1):
            raise ContractError(
                f"backward root must be scalar (1x1), got {root.values.shape}"
            )
        if not np.isfinite(root.values[0, 0]):
            raise GradientError("backward root is not finite")
        if root.node_id is None:
            return Gradients({}, 0)

        nid_root = root.node_id
        adj = [None] * (nid_root + 1)
        adj[nid_root] = np.ones((1, 1))
        nodes = self._nodes
        processed = 0

        def acc(pid, shape):
            buf = adj[pid]
            if buf is None:
                buf = np.zeros(shape)
                adj[pid] = buf
            return buf

        for nid in range(nid_root, -1, -1):
            g = adj[nid]
            if g is None:
                continue
            processed += 1
            op, parents, pshapes, aux = nodes[nid]
            if op == "leaf":
                continue
            if op == "matmul":
                a_vals, b_vals, tb = aux
                pa, pb = parents
                if tb:
                    if pa is not None:
                        K.gemm(g, b_vals, out=acc(pa, pshapes[0]), accumulate=True)
                    if pb is not None:
                        K.gemm(g, a_vals, ta=True, out=acc(pb, pshapes[1]), accumulate=True)
                else:
                    if pa is not None:
                        K.gemm(g, b_vals, tb=True, out=acc(pa, pshapes[0]), accumulate=True)
                    if pb is not None:
                        K.gemm(a_vals, g, ta=True, out=acc(pb, pshapes[1]), accumulate=True)
            elif op == "add":
                pa, pb = parents
                if pa is not None:
                    K.iadd(acc(pa, pshapes[0]), g)
                if pb is not None:
                    K.iadd(acc(pb, pshapes[1]), g)
            elif op == "sub":
                pa, pb = parents
                if pa is not None:
                    K.iadd(acc(pa, pshapes[0]), g)
                if pb is not None:
                    K.isub(acc(pb, pshapes[1]), g)
            elif op == "mul":
                a_vals, b_vals = aux
                pa, pb = parents
                if pa is not None:
                    K.iadd_mul(acc(pa, pshapes[0]), g, b_vals)
                if pb is not None:
                    K.iadd_mul(acc(pb, pshapes[1]), g, a_vals)
            elif op == "div":
                b_vals, y_vals = aux
                pa, pb = parents
                if pa is not None:
                    K.iadd_div(acc(pa, pshapes[0]), g, b_vals)
                if pb is not None:
                    K.isub_ydiv(acc(pb, pshapes[1]), g, y_vals, b_vals)
            elif op == "add_s":
                (pa,) = parents
                if pa is not None:
                    K.iadd(acc(pa, pshapes[0]), g)
            elif op == "rsub_s":
                (pa,) = parents
                if pa is not None:
                    K.isub(acc(pa, pshapes[0]), g)
            elif op == "mul_s":
                (pa,) = parents
                if pa is not None:
                    K.iadd_s(acc(pa, pshapes[0]), g, aux[0])
            elif op == "rdiv_s":
                a_vals, y_vals = aux
                (pa,) = parents
                if pa is not None:
                    K.isub_ydiv(acc(pa, pshapes[0]), g, y_vals, a_vals)
            elif op == "neg":
                (pa,) = parents
                if pa is not None:
                    K.isub(acc(pa, pshapes[0]), g)
            elif op == "pow":
                a_vals, c = aux
                (pa,) = parents
                if pa is not None:
                    K.iadd_dpow(acc(pa, pshapes[0]), g, a_vals, c)
            elif op == "sin":
                (pa,) = parents
                if pa is not None:
                    K.iadd_dsin(acc(pa, pshapes[0]), g, aux[0])
            elif op == "cos":
                (pa,) = parents
                if pa is not None:
                    K.iadd_dcos(acc(pa, pshapes[0]), g, aux[0])
            elif op == "sqrt":
                (pa,) = parents
                if pa is not None:
                    K.iadd_dsqrt(acc(pa, pshapes[0]), g, aux[0])
            elif op == "abs":
                (pa,) = parents
                if pa is not None:
                    K.iadd_dabs(acc(pa, pshapes[0]), g, aux[0])
            elif op == "log10":
                (pa,) = parents
                if pa is not None:
                    K.iadd_dlog10(acc(pa, pshapes[0]), g, aux[0])
            elif op == "relu":
                (pa,) = parents
                if pa is not None:
                    K.iadd_drelu(acc(pa, pshapes[0]), g, aux[0])
            elif op == "badd":
                pa, pr = parents
                if pa is not None:
                    K.iadd(acc(pa, pshapes[0]), g)
                if pr is not None:
                    K.iadd_colsum(acc(pr, pshapes[1]), g)
            elif op == "bmul":
                a_vals, r_vals = aux
                pa, pr = parents
                if pa is not None:
                    K.iadd_bmul(acc(pa, pshapes[0]), g, r_vals)
                if pr is not None:
                    K.iadd_rowdot(acc(pr, pshapes[1]), g, a_vals)
            elif op == "sum":
                (pa,) = parents
                if pa is not None:
                    K.iadd_fill(acc(pa, pshapes[0]), g[0, 0])
            elif op == "mean":
                (pa,) = parents
                if pa is not None:
                    K.iadd_fill(acc(pa, pshapes[0]), g[0, 0] / aux[0])
            elif op == "concat":
                (widths,) = aux
                off = 0
                for pid, pshape, w in zip(parents, pshapes, widths):
                    if pid is not None:
                        acc(pid, pshape)[:, :] += g[:, off : off + w]
                    off += w
            elif op == "slice":
                (pa,) = parents
                if pa is not None:
                    acc(pa, pshapes[0])[:, aux[0] : aux[0] + 1] += g
            else:  # pragma: no cover
                raise ContractError(f"unknown op in backward: {op}")

        return Gradients(
            {nid: adj[nid] for nid in range(nid_root + 1) if adj[nid] is not None},
            processed,
        )


class GradCheckReport:
    """Outcome of an AD-vs-central-difference comparison.

    Kinked coordinates (one-sided slopes disagree, e.g. |x| at 0) are flagged
    in `kinks` and excluded from max_rel_err and the pass decision instead of
    producing a spurious failure. n_fd_evals grows linearly with the number of
    coordinates while n_backward stays 1; that asymmetry is the point of
    reverse mode and is asserted in the tests.
    """

    def __init__(self, ad, fd, rel_err, kinks, step, tol, n_fd_evals):
        self.ad = ad
        self.fd = fd
        self.rel_err = rel_err
        self.kinks = kinks
        self.step = step
        self.tol = tol
        self.n_fd_evals = n_fd_evals
        self.n_backward = 1
        checkable = [e for i, e in enumerate(rel_err.flat) if i not in kinks]
        self.max_rel_err = max(checkable) if checkable else 0.0
        self.passed = self.max_rel_err <= tol

    def __repr__(self):
        return (
            f"GradCheckReport(max_rel_err={self.max_rel_err:.3e}, "
            f"kinks={len(self.kinks)}, passed={self.passed})"
        )


def _eval_scalar(f, x_arr):
    t = Tape()
    y = f(t, t.tensor(x_arr))
    if not isinstance(y, Tensor) or y.values.shape != (1, 1):
        raise ContractError("grad_check: f must return a scalar (1x1) tensor")
    v = float(y.values[0, 0])
    if not np.isfinite(v):
        raise DomainError("grad_check: f is not finite near the evaluation point")
    return v


def grad_check(f, x0, step=1e-5, tol=1e-5):
    """Compare one reverse-mode sweep against per-coordinate central
    differences of f(tape, x) at x0.

    Relative error per coordinate is |ad - fd| / max(|ad|, |fd|, 1e-6); the
    floor keeps near-zero gradients from blowing up the ratio. Kinks are
    detected by comparing the two one-sided slopes.
    """
    if not 1e-7 <= step <= 1e-4:
        raise ContractError(f"step must lie in [1e-7, 1e-4], got {step}")
    x0 = _as_payload(x0)
    if not np.all(np.isfinite(x0)):
        raise ContractError("non-finite values in grad_check point")

    t = Tape()
    xt = t.tensor(x0)
    y = f(t, xt)
    if not isinstance(y, Tensor) or y.values.shape != (1, 1):
        raise ContractError("grad_check: f must return a scalar (1x1) tensor")
    f0 = float(y.values[0, 0])
    if not np.isfinite(f0):
        raise DomainError("grad_check: f is not finite at the evaluation point")
    grads = t.backward(y)
    ad = grads.get(xt)
    ad = np.zeros_like(x0) if ad is None else ad.copy()

    fd = np.zeros_like(x0)
    rel_err = np.zeros_like(x0)
    kinks = []
    n_fd_evals = 0
    flat = x0.ravel()
    for i in range(flat.size):
        orig = flat[i]
        xp = x0.copy()
        xp.flat[i] = orig + step
        fp = _eval_scalar(f, xp)
        xm = x0.copy()
        xm.flat[i] = orig - step
        fm = _eval_scalar(f, xm)
        n_fd_evals += 2
        central = (fp - fm) / (2.0 * step)
        slope_r = (fp - f0) / step
        slope_l = (f0 - fm) / step
        if abs(slope_r - slope_l) > 0.1 * max(1.0, abs(slope_r), abs(slope_l)):
            kinks.append(i)
        fd.flat[i] = central
        a = ad.flat[i]
        rel_err.flat[i] = abs(a - central) / max(abs(a), abs(central), 1e-6)
    return GradCheckReport(ad, fd, rel_err, kinks, step, tol, n_fd_evals)
