"""Differentiable rule losses over Gumbel-Softmax relaxed Therblig steps.

A relaxed step is a probability vector of length |C|*7 + 1: one joint
(object, verb) category per cell of the |C| x 7 effect matrix, plus a final
null category whose effect matrix is zero. The verb axis follows
core.VERB_ORDER = (Re, M, G, R, U, O, H).

Two loss modes are provided:
  * "literal"   - the per-step norm expressions exactly as printed, with the
                  unclamped state recursion a_k = a_{k-1} + G_{k-1} beta.
  * "corrected" - the default; derived states are clamped to [0, 1] (matching
                  contact-set semantics) and each component is zero exactly
                  when the corresponding rule holds on discrete inputs.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .core import (
    DEFAULT_MAX_STEPS,
    NULL_TUPLE,
    ObjectVocabulary,
    TherbligTuple,
    Verb,
    VERB_INDEX,
    VERB_ORDER,
)

N_VERBS = len(VERB_ORDER)

# Per-verb effect coefficients, indexed by VERB_ORDER = (Re, M, G, R, U, O, H).
BETA = np.array([0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0])   # grasp +1, release -1
GAMMA = np.array([-1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0])  # reach, grasp
DELTA = np.array([0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0])    # move, release, use, orient

MODES = ("literal", "corrected")
NORMS = ("l1", "l2")

_KINK_TOL = 1e-8


class NonDifferentiableError(ValueError):
    """Raised when an L1 literal gradient is requested at a kink."""


def step_dim(n_objects: int) -> int:
    return n_objects * N_VERBS + 1


def category_index(t: TherbligTuple, n_objects: int) -> int:
    """Flat category index of a Therblig tuple in a relaxed step vector."""
    if t.is_null:
        return n_objects * N_VERBS
    return t.obj * N_VERBS + VERB_INDEX[t.verb]


def one_hot_step(t: TherbligTuple, n_objects: int) -> np.ndarray:
    p = np.zeros(step_dim(n_objects))
    p[category_index(t, n_objects)] = 1.0
    return p


def effect_matrix(probs: np.ndarray, n_objects: int) -> np.ndarray:
    """|C| x 7 view of a relaxed step (the null category drops out)."""
    probs = np.asarray(probs, dtype=float)
    if probs.shape != (step_dim(n_objects),):
        raise ValueError(
            f"step vector has length {probs.shape}, expected {step_dim(n_objects)}"
        )
    return probs[:-1].reshape(n_objects, N_VERBS)


def check_simplex(probs: np.ndarray, atol: float = 1e-9) -> None:
    probs = np.asarray(probs, dtype=float)
    if np.any(probs < -atol) or abs(probs.sum() - 1.0) > max(atol, 1e-9):
        raise ValueError("step probabilities must lie on the simplex")


def standard_gumbel(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard Gumbel(0, 1) draws via the inverse CDF."""
    u = rng.random(shape)
    return -np.log(-np.log(np.clip(u, 1e-300, 1.0 - 1e-16)))


def gumbel_softmax(logits, temperature: float, noise) -> np.ndarray:
    """Temperature-scaled softmax over perturbed logits.

    Noise is an explicit argument so the operation is deterministic; pass
    standard-Gumbel draws for sampling, zeros for a plain softmax.
    """
    logits = np.asarray(logits, dtype=float)
    noise = np.asarray(noise, dtype=float)
    if logits.shape != noise.shape:
        raise ValueError("logits and noise must have the same shape")
    if not temperature > 0:
        raise ValueError("temperature must be > 0")
    if not (np.all(np.isfinite(logits)) and np.all(np.isfinite(noise))):
        raise ValueError("logits and noise must be finite")
    z = (logits + noise) / temperature
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _as_steps(steps: Sequence[np.ndarray], n_objects: int) -> np.ndarray:
    if not isinstance(steps, np.ndarray) or steps.dtype != float:
        steps = np.asarray(list(steps), dtype=float)
    if steps.size == 0:
        return steps.reshape(0, step_dim(n_objects))
    if steps.ndim != 2 or steps.shape[1] != step_dim(n_objects):
        raise ValueError(
            f"steps must be K x {step_dim(n_objects)}, got shape {steps.shape}"
        )
    return steps


def _step_effects(steps: np.ndarray, n_objects: int, coeffs: np.ndarray) -> np.ndarray:
    """Per-step effect vectors G_k @ coeffs for a whole K x D step array."""
    return steps[:, :-1].reshape(len(steps), n_objects, N_VERBS) @ coeffs


def _contact_vec(c, n_objects: int) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if c.shape != (n_objects,):
        raise ValueError(f"contact vector must have length {n_objects}")
    return c


def contact_vector(state, n_objects: int) -> np.ndarray:
    """Binary |C|-vector of a discrete contact set."""
    v = np.zeros(n_objects)
    for i in state:
        v[int(i)] = 1.0
    return v


def derive_states(c_start, steps, clamp: bool = False) -> List[np.ndarray]:
    """State recursion a_k = a_{k-1} + G_{k-1} beta, a_0 = c_start.

    With clamp=True each state is clipped to [0, 1], which reproduces
    contact-set semantics exactly on one-hot inputs (double grasp saturates).
    """
    n_objects = len(np.asarray(c_start))
    steps = _as_steps(steps, n_objects)
    a = _contact_vec(c_start, n_objects)
    out = [a]
    for e in _step_effects(steps, n_objects, BETA):
        a = a + e
        if clamp:
            a = np.minimum(1.0, np.maximum(0.0, a))
        out.append(a)
    return out


def _norm(r: np.ndarray, norm: str) -> float:
    if norm == "l1":
        return float(np.abs(r).sum())
    if norm == "l2":
        return float(np.sqrt((r * r).sum()))
    raise ValueError(f"unknown norm {norm!r}")


def _check_args(mode: str, norm: str) -> None:
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if norm not in NORMS:
        raise ValueError(f"unknown norm {norm!r}")


def loss_C(c_start, c_end, steps, mode: str = "corrected", norm: str = "l1") -> float:
    """Rule 1: the steps' net grasp/release effect must map c_start to c_end."""
    _check_args(mode, norm)
    n_objects = len(np.asarray(c_start))
    steps = _as_steps(steps, n_objects)
    c0 = _contact_vec(c_start, n_objects)
    c1 = _contact_vec(c_end, n_objects)
    if mode == "literal":
        return sum(
            _norm(c0 + e - c1, norm) for e in _step_effects(steps, n_objects, BETA)
        )
    final = derive_states(c0, steps, clamp=True)[-1]
    return _norm(final - c1, norm)


def loss_EC(c_start, steps, mode: str = "corrected", norm: str = "l1") -> float:
    """Rule 2: penalize reaching/grasping objects already in contact."""
    _check_args(mode, norm)
    n_objects = len(np.asarray(c_start))
    steps = _as_steps(steps, n_objects)
    gamma_effects = _step_effects(steps, n_objects, GAMMA)
    if mode == "literal":
        states = derive_states(c_start, steps, clamp=False)
        return sum(
            _norm(states[k] - gamma_effects[k], norm) for k in range(len(steps))
        )
    states = derive_states(c_start, steps, clamp=True)
    total = 0.0
    for k in range(len(steps)):
        # -gamma_effects[k] is the reach/grasp mass per object
        total += float(states[k] @ -gamma_effects[k])
    return total


def loss_NC(c_start, steps, mode: str = "corrected", norm: str = "l1") -> float:
    """Rule 3: penalize moving/orienting/using/releasing objects not in contact."""
    _check_args(mode, norm)
    n_objects = len(np.asarray(c_start))
    steps = _as_steps(steps, n_objects)
    delta_effects = _step_effects(steps, n_objects, DELTA)
    if mode == "literal":
        states = derive_states(c_start, steps, clamp=False)
        return sum(
            _norm(states[k] - delta_effects[k], norm) for k in range(len(steps))
        )
    states = derive_states(c_start, steps, clamp=True)
    total = 0.0
    for k in range(len(steps)):
        total += float((1.0 - states[k]) @ delta_effects[k])
    return total


@dataclass(frozen=True)
class LossReport:
    l_c: float
    l_ec: float
    l_nc: float
    total: float
    mode: str
    norm: str

    def to_dict(self) -> dict:
        return {
            "L_C": self.l_c,
            "L_EC": self.l_ec,
            "L_NC": self.l_nc,
            "total": self.total,
            "mode": self.mode,
            "norm": self.norm,
        }


def combined_rule_loss(
    c_start, c_end, steps, mode: str = "corrected", norm: str = "l1"
) -> LossReport:
    lc = loss_C(c_start, c_end, steps, mode, norm)
    lec = loss_EC(c_start, steps, mode, norm)
    lnc = loss_NC(c_start, steps, mode, norm)
    return LossReport(lc, lec, lnc, lc + lec + lnc, mode, norm)


# ---------------------------------------------------------------------------
# Analytic gradients w.r.t. the pre-softmax logits.
# ---------------------------------------------------------------------------


def _dnorm(r: np.ndarray, norm: str, where: str) -> np.ndarray:
    if norm == "l1":
        return np.sign(r)
    n = np.sqrt((r * r).sum())
    if n < 1e-300:
        return np.zeros_like(r)
    return r / n


def _refuse_l1_kinks(residuals, norm: str, mode: str) -> None:
    if norm != "l1" or mode != "literal":
        return
    for label, k, r in residuals:
        bad = np.nonzero(np.abs(r) < _KINK_TOL)[0]
        if bad.size:
            raise NonDifferentiableError(
                f"literal L1 loss {label} is non-differentiable at step {k}, "
                f"residual entries {bad.tolist()}"
            )


def _loss_and_grad_wrt_probs(
    probs: np.ndarray, c_start, c_end, mode: str, norm: str
) -> Tuple[float, np.ndarray]:
    """Combined rule loss and its gradient w.r.t. every step probability."""
    n_objects = len(np.asarray(c_start))
    K = probs.shape[0]
    c0 = _contact_vec(c_start, n_objects)
    c1 = _contact_vec(c_end, n_objects)
    G = [effect_matrix(p, n_objects) for p in probs]
    E = [g @ BETA for g in G]
    grad_G = [np.zeros_like(g) for g in G]

    if mode == "corrected":
        # forward with clamped states
        a = [c0]
        pre = []
        for k in range(K):
            s = a[k] + E[k]
            pre.append(s)
            a.append(np.clip(s, 0.0, 1.0))
        resid = a[K] - c1
        M = [-(g @ GAMMA) for g in G]
        D = [g @ DELTA for g in G]
        lc = _norm(resid, norm)
        lec = sum(float(a[k] @ M[k]) for k in range(K))
        lnc = sum(float((1.0 - a[k]) @ D[k]) for k in range(K))
        loss = lc + lec + lnc
        # backward
        ga = [np.zeros(n_objects) for _ in range(K + 1)]
        ga[K] = _dnorm(resid, norm, "L_C")
        for k in range(K):
            ga[k] += M[k] - D[k]
            grad_G[k] += np.outer(a[k], -GAMMA) + np.outer(1.0 - a[k], DELTA)
        for k in range(K - 1, -1, -1):
            gs = ga[k + 1] * ((pre[k] > 0.0) & (pre[k] < 1.0))
            grad_G[k] += np.outer(gs, BETA)
            ga[k] += gs
    else:
        a = derive_states(c0, probs, clamp=False)
        r1 = [c0 + E[k] - c1 for k in range(K)]
        r2 = [a[k] - G[k] @ GAMMA for k in range(K)]
        r3 = [a[k] - G[k] @ DELTA for k in range(K)]
        _refuse_l1_kinks(
            [("L_C", k, r1[k]) for k in range(K)]
            + [("L_EC", k, r2[k]) for k in range(K)]
            + [("L_NC", k, r3[k]) for k in range(K)],
            norm,
            mode,
        )
        loss = sum(_norm(r, norm) for r in r1 + r2 + r3)
        v = [_dnorm(r1[k], norm, "L_C") for k in range(K)]
        u = [_dnorm(r2[k], norm, "L_EC") for k in range(K)]
        w = [_dnorm(r3[k], norm, "L_NC") for k in range(K)]
        # a_k = c0 + sum_{j<k} E_j, so each E_j collects the suffix of state grads
        suffix = np.zeros(n_objects)
        for k in range(K - 1, -1, -1):
            grad_G[k] += (
                np.outer(v[k] + suffix, BETA)
                + np.outer(u[k], -GAMMA)
                + np.outer(w[k], -DELTA)
            )
            suffix += u[k] + w[k]

    grad_p = np.zeros_like(probs)
    for k in range(K):
        grad_p[k, :-1] = grad_G[k].ravel()
    return loss, grad_p


def _forward_from_logits(
    logits: np.ndarray, c_start, c_end, tau: float, noise: np.ndarray, mode: str, norm: str
) -> float:
    probs = gumbel_softmax(logits, tau, noise)
    lr = combined_rule_loss(c_start, c_end, probs, mode, norm)
    return lr.total


def grad_rule_loss(
    logits,
    c_start,
    c_end,
    tau: float,
    noise,
    mode: str = "corrected",
    norm: str = "l1",
) -> np.ndarray:
    """Gradient of combined_rule_loss(gumbel_softmax(logits)) w.r.t. every logit.

    Deterministic given the supplied noise. Refuses literal-L1 configurations
    whose residuals sit on a kink (NonDifferentiableError).
    """
    _check_args(mode, norm)
    logits = np.asarray(logits, dtype=float)
    noise = np.asarray(noise, dtype=float)
    if logits.ndim != 2:
        raise ValueError("logits must be K x D")
    n_objects = (logits.shape[1] - 1) // N_VERBS
    if step_dim(n_objects) != logits.shape[1]:
        raise ValueError("logit rows must have length |C|*7 + 1")
    probs = gumbel_softmax(logits, tau, noise)
    _, grad_p = _loss_and_grad_wrt_probs(probs, c_start, c_end, mode, norm)
    # softmax jacobian, row by row
    grad_z = probs * (grad_p - (probs * grad_p).sum(axis=1, keepdims=True))
    return grad_z / tau


def finite_diff_check(
    logits,
    c_start,
    c_end,
    tau: float,
    noise,
    mode: str = "corrected",
    norm: str = "l1",
    h: float = 1e-5,
) -> float:
    """Max relative error between analytic and central finite-difference gradients."""
    if not 0 < h <= 1e-2:
        raise ValueError("h must lie in (0, 1e-2]")
    logits = np.asarray(logits, dtype=float)
    analytic = grad_rule_loss(logits, c_start, c_end, tau, noise, mode, norm)
    if logits.size == 0:
        return 0.0
    max_err = 0.0
    it = np.nditer(logits, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        bumped = logits.copy()
        bumped[idx] += h
        f_plus = _forward_from_logits(bumped, c_start, c_end, tau, noise, mode, norm)
        bumped[idx] -= 2 * h
        f_minus = _forward_from_logits(bumped, c_start, c_end, tau, noise, mode, norm)
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise ValueError("non-finite loss value during finite differencing")
        fd = (f_plus - f_minus) / (2 * h)
        a = analytic[idx]
        # Denominator floor 1e-6: central differences carry ~1e-9 absolute
        # rounding noise at this loss scale, so coordinates whose true
        # gradient is below the floor cannot be resolved and count as zero.
        err = abs(a - fd) / max(1e-6, abs(a) + abs(fd))
        max_err = max(max_err, err)
    return max_err


# ---------------------------------------------------------------------------
# Serializable loss instances (consumed by the CLI `loss` / `gradcheck`).
# ---------------------------------------------------------------------------


@dataclass
class LossInstance:
    vocab: ObjectVocabulary
    c_start: np.ndarray
    c_end: np.ndarray
    logits: np.ndarray
    tau: float = 1.0
    noise: Optional[np.ndarray] = None
    mode: str = "corrected"
    norm: str = "l1"

    def __post_init__(self):
        if self.noise is None:
            self.noise = np.zeros_like(self.logits)

    def probs(self) -> np.ndarray:
        return gumbel_softmax(self.logits, self.tau, self.noise)

    def loss(self) -> LossReport:
        return combined_rule_loss(self.c_start, self.c_end, self.probs(), self.mode, self.norm)

    def grad(self) -> np.ndarray:
        return grad_rule_loss(
            self.logits, self.c_start, self.c_end, self.tau, self.noise, self.mode, self.norm
        )

    def gradcheck(self, h: float = 1e-5) -> float:
        return finite_diff_check(
            self.logits, self.c_start, self.c_end, self.tau, self.noise, self.mode, self.norm, h
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "vocab": list(self.vocab.names),
                "c_start": self.c_start.tolist(),
                "c_end": self.c_end.tolist(),
                "logits": self.logits.tolist(),
                "tau": self.tau,
                "noise": self.noise.tolist(),
                "mode": self.mode,
                "norm": self.norm,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "LossInstance":
        doc = json.loads(text)
        vocab = ObjectVocabulary(doc["vocab"])
        n = len(vocab)

        def contacts(value) -> np.ndarray:
            if all(isinstance(x, str) for x in value):
                return contact_vector([vocab.index(x) for x in value], n)
            v = np.asarray(value, dtype=float)
            if v.shape != (n,):
                raise ValueError("contact vector length must equal |C|")
            return v

        logits = np.asarray(doc["logits"], dtype=float)
        noise = doc.get("noise")
        return cls(
            vocab=vocab,
            c_start=contacts(doc["c_start"]),
            c_end=contacts(doc["c_end"]),
            logits=logits,
            tau=float(doc.get("tau", 1.0)),
            noise=None if noise is None else np.asarray(noise, dtype=float),
            mode=doc.get("mode", "corrected"),
            norm=doc.get("norm", "l1"),
        )
