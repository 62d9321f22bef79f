"""Small-scale reference engines for AMP with a time-varying linear operator.

The data matrix is passed through an operator with a factored form

    op(Z) = sum_k  left[k] @ Z @ right[k]

and the recursion keeps either full memory (every prior iterate feeds the
denoiser) or an autoregressive memory (explicit weight matrices mix prior
iterates back in).  The matching Gaussian predictor builds the covariance of
the comparison process block by block; expectations with no closed form are
estimated by Monte Carlo over that same Gaussian process, so everything here
is meant for small n and short horizons, where it serves as the ground truth
the fast engines are checked against.

Function arguments ``functions[t]`` are callables taking the list of earlier
iterates; they must broadcast over a leading sample axis (each history entry
arrives as an (S, n) array during SE estimation).  An optional
``jacobian(history, s)`` method supplies the analytic n x n Jacobian with
respect to iterate s; otherwise forward differences are used.
"""

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_vector, rng_from_key


class OperatorDecomposition:
    """A factored linear operator on matrices: Z -> sum_k L_k Z R_k.

    The operator norms of all factors are bounded by construction when
    ``max_op_norm`` is given; decompositions exceeding it are rejected.
    """

    def __init__(self, left, right, max_op_norm=None):
        left = [np.asarray(A, dtype=float) for A in left]
        right = [np.asarray(A, dtype=float) for A in right]
        if len(left) != len(right) or not left:
            raise ValueError("need equally many (nonzero) left and right factors")
        n = left[0].shape[0]
        for A in (*left, *right):
            if A.shape != (n, n):
                raise ValueError("all factors must be square matrices of one size")
        self.left = left
        self.right = right
        self.n = n
        self.terms = len(left)
        self.op_norm_bound = max(np.linalg.norm(A, 2) for A in (*left, *right))
        if max_op_norm is not None and self.op_norm_bound > max_op_norm:
            raise ValueError(
                f"factor operator norm {self.op_norm_bound:.3g} exceeds bound {max_op_norm}")

    def apply(self, Z):
        out = np.zeros_like(np.asarray(Z, dtype=float))
        for L, R in zip(self.left, self.right):
            out += L @ Z @ R
        return out

    @classmethod
    def identity(cls, n):
        eye = np.eye(n)
        return cls([eye], [eye])

    @classmethod
    def row_projection(cls, delta):
        """op(Z) = diag(delta) @ Z — keep only the masked rows."""
        delta = np.asarray(delta, dtype=float)
        return cls([np.diag(delta)], [np.eye(len(delta))])


class ConstantFunction:
    """f(history) = fixed vector; the t = 0 initialization."""

    def __init__(self, value):
        self.value = np.asarray(value, dtype=float)

    def __call__(self, history):
        if history and np.ndim(history[-1]) == 2:
            return np.broadcast_to(self.value, history[-1].shape)
        return self.value

    def jacobian(self, history, s):
        n = self.value.shape[0]
        return np.zeros((n, n))


class SeparableFunction:
    """Coordinatewise denoiser applied to the most recent iterate."""

    def __init__(self, denoiser, noise_vars, signal_gains):
        self.denoiser = denoiser
        self.noise_vars = noise_vars
        self.signal_gains = signal_gains

    def __call__(self, history):
        return self.denoiser.eta(history[-1], self.noise_vars, self.signal_gains)

    def jacobian(self, history, s):
        x = history[-1]
        n = x.shape[-1]
        if s != len(history) - 1:
            return np.zeros((n, n))
        slopes = self.denoiser.deta_dy(x, self.noise_vars, self.signal_gains)
        if slopes.ndim == 2:
            slopes = slopes.mean(axis=0)
        return np.diag(slopes)


class LinearFunction:
    """f(history) = history[-1] @ G.T, a constant-Jacobian map."""

    def __init__(self, matrix):
        self.matrix = np.asarray(matrix, dtype=float)

    def __call__(self, history):
        return history[-1] @ self.matrix.T

    def jacobian(self, history, s):
        if s != len(history) - 1:
            return np.zeros_like(self.matrix)
        return self.matrix


def numerical_jacobian(fn, history, s, step=1e-6):
    """Forward-difference Jacobian of fn with respect to history entry s."""
    base = np.asarray(fn(history))
    n = base.shape[-1]
    jac = np.empty((n, n))
    for i in range(n):
        bumped = [h.copy() if k == s else h for k, h in enumerate(history)]
        bumped[s][..., i] += step
        jac[:, i] = (np.asarray(fn(bumped)) - base) / step
    return jac


def function_jacobian(fn, history, s, step=1e-6):
    if hasattr(fn, "jacobian"):
        return fn.jacobian(history, s)
    return numerical_jacobian(fn, history, s, step=step)


def operator_amp_step(Z, decomposition, fn, history, past_values, debias_matrices):
    """x_t = op(Z) @ fn(history) - sum_s debias_matrices[s] @ past_values[s]."""
    x = decomposition.apply(Z) @ fn(history)
    for s, B in enumerate(debias_matrices):
        if B is not None:
            x = x - B @ past_values[s]
    return x


def run_operator_amp(Z, decompositions, functions, debias, horizon):
    """Iterate the full-memory operator recursion for t = 0..horizon-1.

    ``debias`` maps (t, s) to an n x n matrix (missing pairs contribute
    nothing); t = 0 has no correction by construction.
    """
    history = []
    values = []
    for t in range(horizon):
        f_val = functions[t](history)
        rows = [debias.get((t, s)) for s in range(t)]
        x = decompositions[t].apply(Z) @ f_val
        for s, B in enumerate(rows):
            if B is not None:
                x = x - B @ values[s]
        values.append(f_val)
        history.append(x)
    return history


def autoregressive_step(Z, decomposition, fn, memory_row, debias_row, history, past_values):
    """x_t = op(Z) @ fn([x_{t-1}]) + sum_s A_{ts} x_s - sum_s B_{ts} f_s."""
    x = decomposition.apply(Z) @ fn(history[-1:] if history else [])
    for s, A in memory_row.items():
        x = x + A @ history[s]
    for s, B in debias_row.items():
        x = x - B @ past_values[s]
    return x


def run_autoregressive(Z, decompositions, functions, memory, debias, horizon):
    """Iterate the autoregressive recursion; ``memory`` maps (t, s) to A_{ts}."""
    history = []
    values = []
    for t in range(horizon):
        f_val = functions[t](history[-1:] if history else [])
        mem_row = {s: A for (tt, s), A in memory.items() if tt == t}
        db_row = {s: B for (tt, s), B in debias.items() if tt == t}
        x = decompositions[t].apply(Z) @ f_val
        for s, A in mem_row.items():
            x = x + A @ history[s]
        for s, B in db_row.items():
            x = x - B @ values[s]
        values.append(f_val)
        history.append(x)
    return history


class AutoregressiveMemory:
    """Memory weights A_{ts} and the derived propagators C_{ts}.

    The propagators satisfy C_{tt} = I and C_{ts} = sum_{s <= r < t} A_{tr} C_{rs};
    stacking both families into block unitriangular matrices makes them exact
    inverses of one another, which ``stacked_product`` exposes for testing.
    """

    def __init__(self, weights, n):
        self.weights = {key: np.asarray(A, dtype=float) for key, A in weights.items()}
        self.n = n
        self._propagators = {}

    @classmethod
    def from_masks(cls, masks):
        """Projection-AMP memory: A_{t,t-1} = diag(1 - delta_t), retaining
        unmasked coordinates from the previous iterate."""
        masks = [np.asarray(d) for d in masks]
        n = len(masks[0])
        weights = {(t, t - 1): np.diag(1.0 - masks[t].astype(float))
                   for t in range(1, len(masks))}
        return cls(weights, n)

    def weight(self, t, s):
        return self.weights.get((t, s), np.zeros((self.n, self.n)))

    def propagator(self, t, s):
        """C_{ts}; zero for s > t, identity for s = t."""
        if s > t:
            return np.zeros((self.n, self.n))
        if s == t:
            return np.eye(self.n)
        key = (t, s)
        if key not in self._propagators:
            total = np.zeros((self.n, self.n))
            for r in range(s, t):
                if (t, r) in self.weights:
                    total += self.weights[(t, r)] @ self.propagator(r, s)
            self._propagators[key] = total
        return self._propagators[key]

    def stacked_product(self, horizon):
        """Product of the stacked (I, -A) and (I, C) block matrices over
        t = 0..horizon; equals the identity up to roundoff."""
        n = self.n
        size = (horizon + 1) * n
        A_stack = np.eye(size)
        C_stack = np.eye(size)
        for t in range(horizon + 1):
            for s in range(t):
                A_stack[t * n:(t + 1) * n, s * n:(s + 1) * n] = -self.weight(t, s)
                C_stack[t * n:(t + 1) * n, s * n:(s + 1) * n] = self.propagator(t, s)
        return A_stack @ C_stack


class OperatorSE:
    """Gaussian comparison process for the full-memory operator recursion.

    ``cov[(s, t)]`` holds the n x n covariance block of (y_s, y_t) and
    ``overlaps[(s, l, t, k)]`` the scalar overlaps that generate it.  Blocks
    are built recursively; expectations are Monte Carlo averages over the
    process constructed so far (sampled through an eigendecomposition with
    small negative eigenvalues clipped to zero).
    """

    def __init__(self, n):
        self.n = n
        self.cov = {}
        self.overlaps = {}

    def stacked_cov(self, upto):
        size = upto * self.n
        big = np.empty((size, size))
        for s in range(upto):
            for t in range(s, upto):
                block = self.cov[(s, t)]
                big[s * self.n:(s + 1) * self.n, t * self.n:(t + 1) * self.n] = block
                big[t * self.n:(t + 1) * self.n, s * self.n:(s + 1) * self.n] = block.T
        return big

    def sample(self, upto, size, rng, clip_tol=1e-8):
        """Draw ``size`` joint samples of (y_0, ..., y_{upto-1}).

        Returns an array of shape (size, upto, n).  Raises if the stacked
        covariance is indefinite beyond the clipping tolerance.
        """
        big = self.stacked_cov(upto)
        big = (big + big.T) / 2.0
        eigvals, eigvecs = np.linalg.eigh(big)
        scale = max(1.0, float(eigvals.max(initial=0.0)))
        if eigvals.min() < -clip_tol * scale:
            raise np.linalg.LinAlgError(
                f"stacked SE covariance is indefinite: min eigenvalue {eigvals.min():.3e}")
        root = eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))
        draws = rng.standard_normal((size, big.shape[0])) @ root.T
        return draws.reshape(size, upto, self.n)


def operator_se(decompositions, functions, horizon, mc_samples=10_000, seed=0,
                clip_tol=1e-8):
    """Build the Gaussian predictor through step horizon-1.

    functions[t] is evaluated on sampled histories of the process built so
    far; overlaps are (1/n) E <R_{sl} f_s, R_{tk} f_t> and covariance blocks
    cov(y_s, y_t) = sum_{l,k} overlap * L_{sl} @ L_{tk}.T.
    """
    n = decompositions[0].n
    se = OperatorSE(n)
    rng = rng_from_key(seed)
    values = {}

    f0 = np.asarray(functions[0]([]))
    values[0] = f0[None, :]
    for t in range(horizon):
        if t > 0:
            draws = se.sample(t, mc_samples, rng, clip_tol=clip_tol)
            histories = [draws[:, s, :] for s in range(t)]
            for s in range(t + 1):
                values[s] = np.atleast_2d(np.asarray(functions[s](histories[:s])))
        for s in range(t + 1):
            dec_s, dec_t = decompositions[s], decompositions[t]
            block = np.zeros((n, n))
            for l, (Ls, Rs) in enumerate(zip(dec_s.left, dec_s.right)):
                proj_s = values[s] @ Rs.T
                for k, (Lt, Rt) in enumerate(zip(dec_t.left, dec_t.right)):
                    proj_t = values[t] @ Rt.T
                    q = float(np.mean(np.sum(proj_s * proj_t, axis=1)) / n)
                    se.overlaps[(s, l, t, k)] = q
                    block += q * Ls @ Lt.T
            se.cov[(s, t)] = block
    return se


def debias_matrices(decompositions, functions, se, t, memory=None,
                    mc_samples=2_000, seed=0, fd_step=1e-6):
    """Correction matrices {B_{ts} : s < t} for step t.

    Full memory (memory=None):
        B_{ts} = sum_{k,l} (1/n) tr(R_{tk} E[D_s f_t(y_{<t})] L_{sl}) L_{tk} R_{sl}
    Autoregressive (memory given):
        B_{ts} = sum_{k,l} (1/n) tr(R_{tk} E[D f_t(y_{t-1})] C_{t-1,s} L_{sl}) L_{tk} R_{sl}

    Jacobian expectations are averaged over samples of the Gaussian process;
    analytic Jacobians are used when the function provides them.
    """
    if t == 0:
        return {}
    n = decompositions[0].n
    rng = rng_from_key(seed, 7, t)
    draws = se.sample(t, mc_samples, rng)
    fn = functions[t]
    dec_t = decompositions[t]

    def mean_jacobian(history, arg_index):
        # analytic jacobians average over the sample axis in one call
        if hasattr(fn, "jacobian"):
            return fn.jacobian(history, arg_index)
        total = np.zeros((n, n))
        for i in range(draws.shape[0]):
            total += numerical_jacobian(fn, [h[i] for h in history], arg_index,
                                        step=fd_step)
        return total / draws.shape[0]

    out = {}
    if memory is None:
        full_history = [draws[:, r, :] for r in range(t)]
        jacobians = {s: mean_jacobian(full_history, s) for s in range(t)}
    else:
        last = mean_jacobian([draws[:, t - 1, :]], 0)
        jacobians = {s: last @ memory.propagator(t - 1, s) for s in range(t)}
    for s in range(t):
        dec_s = decompositions[s]
        B = np.zeros((n, n))
        for k, (Ltk, Rtk) in enumerate(zip(dec_t.left, dec_t.right)):
            for l, (Lsl, Rsl) in enumerate(zip(dec_s.left, dec_s.right)):
                coeff = np.trace(Rtk @ jacobians[s] @ Lsl) / n
                B += coeff * Ltk @ Rsl
        out[s] = B
    return out


def commuting_projector_covariance(masks, mean_squares):
    """Diagonal covariance recursion for diagonal (hence commuting) projectors.

    diag_t = mean_squares[t] * delta_t + diag_{t-1} * (1 - delta_t); with a
    full first mask the t = 0 row is mean_squares[0] everywhere.  Returns an
    array of shape (len(masks), n); entry [t, i] is the variance of the class
    that coordinate i belongs to after step t.
    """
    masks = [np.asarray(d, dtype=float) for d in masks]
    n = len(masks[0])
    out = np.empty((len(masks), n))
    prev = None
    for t, delta in enumerate(masks):
        if t == 0:
            if not delta.all():
                raise ValueError("the step-0 mask must update every coordinate")
            out[0] = mean_squares[0]
        else:
            out[t] = mean_squares[t] * delta + prev * (1.0 - delta)
        prev = out[t]
    return out
