"""Self-contained numerical verification suite.

Every check draws seeded random instances, compares the library against an
independent oracle (LAPACK eigendecompositions, Simpson quadrature, finite
differences, step halving) and reports the worst residual seen.

``run_suite(fault_inject=True)`` adds ``1e-3`` to the right-hand side fed to
the fixed-step integrator, which the oracle triangle must detect.
"""
import time
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import simpson

from . import dataio, kernels
from . import model as M
from .encoder import encode_modality, fuse_speaker, speaker_embed
from .graph import (MixhopParams, NormalizedAdjacency, build_conversation_graph,
                    conversation_adjacency, dirichlet_energy, normalize_adjacency, unroll_mixhop)
from .metrics import report_from_confusion
from .numerics import sym_eig
from .odecore import (METHODS, OdeConfig, build_cache, exact_solution, f_matrix,
                      initial_state, integrate, ode_rhs, paper_closed_form,
                      second_order_identity_check, solve)

FAULT = 1e-3
T_VALUES = (0.5, 1.0, 2.0, 4.0)
FLAG_COMBOS = ((True, True), (False, True), (True, False), (False, False))

# Operations that carry a model equation; the manifest check asserts each is
# exercised by at least one check below.
EQUATION_OPERATIONS = (
    "normalize_adjacency", "build_conversation_graph", "mixhop_step", "speaker_embed",
    "gru_cell_step", "encode_modality", "fuse_speaker", "ode_rhs", "initial_state",
    "exact_solution", "f_matrix", "paper_closed_form", "solve", "integrate",
    "second_order_identity_check", "classifier_head", "predict_label", "loss",
    "weighted_f1", "dirichlet_energy",
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    residual: float
    tolerance: float
    detail: str = ""
    report_only: bool = False
    seconds: float = 0.0

    def line(self):
        status = "INFO" if self.report_only else ("PASS" if self.passed else "FAIL")
        text = f"{status} {self.name:<24} residual={self.residual:.3e} tol={self.tolerance:.0e}"
        if self.detail:
            text += f"  {self.detail}"
        return text + f"  ({self.seconds:.2f}s)"


@dataclass
class Instance:
    a_hat: np.ndarray
    w: np.ndarray
    e: np.ndarray
    cache: object
    # LAPACK eigensystems, independent of the Jacobi solver used by the library
    a_vals: np.ndarray
    a_vecs: np.ndarray
    w_vals: np.ndarray
    w_vecs: np.ndarray

    def to_eig(self, m):
        return self.a_vecs.T @ m @ self.w_vecs

    def from_eig(self, k):
        return self.a_vecs @ k @ self.w_vecs.T

    def power_sandwich(self, s):
        """``A^s E W^s`` via the LAPACK eigensystems."""
        return self.from_eig(self.to_eig(self.e) * np.outer(self.a_vals ** s, self.w_vals ** s))


def _orthogonal(rng, n):
    q, r = np.linalg.qr(rng.normal(size=(n, n)))
    return q * np.sign(np.diag(r))


def _spd(rng, n, low, high):
    q = _orthogonal(rng, n)
    m = (q * rng.uniform(low, high, size=n)) @ q.T
    return 0.5 * (m + m.T)


def make_instance(a_hat, w, e):
    a_vals, a_vecs = np.linalg.eigh(a_hat)
    w_vals, w_vecs = np.linalg.eigh(w)
    return Instance(a_hat, w, e, build_cache(a_hat, w), a_vals, a_vecs, w_vals, w_vecs)


def random_instances(count=50, seed=0, max_nodes=12, max_dim=8):
    """Symmetric A with spectrum in (0.05, 1], symmetric W with spectrum in (0.05, 1)."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n = int(rng.integers(2, max_nodes + 1))
        d = int(rng.integers(1, max_dim + 1))
        q = _orthogonal(rng, n)
        a = (q * (1.0 - rng.uniform(0.0, 0.95, size=n))) @ q.T  # spectrum in (0.05, 1]
        a = 0.5 * (a + a.T)
        w = _spd(rng, d, 0.05 + 1e-9, 1.0 - 1e-9)
        out.append(make_instance(a, w, rng.normal(size=(n, d))))
    return out


def quadrature(inst, upper, panels=2000):
    """Composite Simpson rule for ``int_0^upper A^s E W^s ds``."""
    s = np.linspace(0.0, upper, panels + 1)
    rates = np.add.outer(np.log(inst.a_vals), np.log(inst.w_vals))
    vals = np.exp(rates[:, :, None] * s)
    return inst.from_eig(inst.to_eig(inst.e) * simpson(vals, x=s, axis=2))


def _rel(a, b):
    scale = max(np.linalg.norm(a), np.linalg.norm(b), 1e-300)
    return float(np.linalg.norm(a - b) / scale)


def _rk4(inst, t, steps, fault=False, method="rk4"):
    c = inst.cache
    forcing = inst.e + (FAULT if fault else 0.0)
    return integrate(c.log_adj, c.log_w, forcing, initial_state(inst.e, c), t, steps, method)


# --------------------------------------------------------------------------
# checks
# --------------------------------------------------------------------------

def check_oracle_triangle(instances, fault=False):
    worst = 0.0
    for inst in instances:
        for t in T_VALUES:
            exact = exact_solution(inst.e, inst.cache, t)
            rk = _rk4(inst, t, 512, fault)
            quad = quadrature(inst, t + 1.0)
            worst = max(worst, _rel(exact, rk), _rel(exact, quad), _rel(rk, quad))
    return worst, 1e-5, f"{len(instances)} instances x t in {T_VALUES}"


def check_riemann_derivative(instances, fault=False, h=1e-4):
    worst = rhs_err = 0.0
    for inst in instances:
        for t in T_VALUES:
            fd = (exact_solution(inst.e, inst.cache, t + h)
                  - exact_solution(inst.e, inst.cache, t - h)) / (2 * h)
            worst = max(worst, _rel(fd, inst.power_sandwich(t + 1.0)))
            rhs = ode_rhs(exact_solution(inst.e, inst.cache, t), inst.e, inst.cache)
            rhs_err = max(rhs_err, _rel(fd, rhs))
    return max(worst, rhs_err), 1e-3, \
        f"central difference vs A^(t+1) E W^(t+1); vs ode_rhs {rhs_err:.1e}"


def check_second_order(instances, fault=False):
    worst = max(second_order_identity_check(inst.e, inst.cache, t)
                for inst in instances for t in T_VALUES)
    return worst, 1e-4, "H'' vs ln(A) H' + H' ln(W)"


def check_initial_state(instances, fault=False):
    worst = max(_rel(initial_state(inst.e, inst.cache), quadrature(inst, 1.0))
                for inst in instances)
    e = np.random.default_rng(1).normal(size=(5, 3))
    ident = build_cache(np.eye(5), np.eye(3))
    exact_identity = np.array_equal(initial_state(e, ident), e)
    return (worst if exact_identity else np.inf), 1e-7, \
        f"A=W=I returns E exactly: {exact_identity}"


def check_linearity(instances, fault=False):
    rng = np.random.default_rng(3)
    worst = 0.0
    for inst in instances[:10]:
        e1, e2 = rng.normal(size=inst.e.shape), rng.normal(size=inst.e.shape)
        lhs = exact_solution(2.0 * e1 - 0.5 * e2, inst.cache, 2.0)
        rhs = 2.0 * exact_solution(e1, inst.cache, 2.0) - 0.5 * exact_solution(e2, inst.cache, 2.0)
        worst = max(worst, _rel(lhs, rhs))
    return worst, 1e-9, "exact_solution is linear in E"


def check_discrete_continuous(instances, fault=False):
    """Left/right Riemann sandwich of the unrolled P=1 mixhop sum."""
    violations, worst_gap = 0, 0.0
    for inst in instances[:20]:
        n_nodes, d = inst.e.shape
        e_tilde = np.abs(np.random.default_rng(n_nodes * 31 + d).normal(size=(n_nodes, d))) + 0.1
        e = inst.from_eig(e_tilde)
        adj = NormalizedAdjacency(inst.a_hat, 1.0, sym_eig(inst.a_hat), (inst.a_hat != 0) * 1.0)
        params = MixhopParams(inst.w, np.array([1.0]))
        rates = np.outer(inst.a_vals, inst.w_vals)
        for n in range(1, 9):
            disc = inst.to_eig(unroll_mixhop(e, adj, params, n))
            cont = inst.to_eig(exact_solution(e, inst.cache, float(n)))
            right = disc - e_tilde + e_tilde * rates ** (n + 1)
            slack = 1e-9 * np.abs(disc).max()
            violations += int(np.sum(cont > disc + slack) + np.sum(cont < right - slack))
            worst_gap = max(worst_gap, float(np.max(np.abs(disc - cont))))
    return float(violations), 0.5, f"sandwich violations (max gap {worst_gap:.3f})"


def _orders(inst, method, steps, t=1.0):
    ref = exact_solution(inst.e, inst.cache, t)
    errs = [np.linalg.norm(_rk4(inst, t, s, method=method) - ref) for s in steps]
    return [float(np.log2(errs[k] / errs[k + 1])) for k in range(len(errs) - 1)]


def check_solver_orders(instances, fault=False):
    euler, rk4 = [], []
    for inst in instances[:10]:
        euler += _orders(inst, "euler", (64, 128, 256))
        rk4 += _orders(inst, "rk4", (8, 16, 32))
    ok = all(0.8 <= o <= 1.2 for o in euler) and all(3.5 <= o <= 4.5 for o in rk4)
    # residual: distance of the worst estimate from its nominal order
    worst = max(max(abs(o - 1) for o in euler), max(abs(o - 4) for o in rk4))
    detail = (f"euler {min(euler):.2f}..{max(euler):.2f}, "
              f"rk4 {min(rk4):.2f}..{max(rk4):.2f}")
    return (worst if ok else np.inf), 0.5, detail


def check_f_continuity(instances, fault=False):
    delta = 1e-6
    worst = 0.0
    for s in (delta, -delta, 0.5 * delta):
        for T in (0.5, 1.0, 3.0):
            a, b = np.array([s]), np.array([0.0])
            series = kernels.flow_weights(a, b, T, 2 * abs(s), kernels.INTEGRAL)
            closed = kernels.flow_weights(a, b, T, 0.25 * abs(s), kernels.INTEGRAL)
            worst = max(worst, abs(series[0, 0] - closed[0, 0]) / T)
    tiny = kernels.flow_weights(np.array([1e-9]), np.array([0.0]), 1.0, delta, kernels.INTEGRAL)
    zero = kernels.flow_weights(np.array([0.0]), np.array([0.0]), 1.0, delta, kernels.INTEGRAL)
    worst = max(worst, abs(tiny[0, 0] - zero[0, 0]))
    inst = instances[0]
    cache = inst.cache.with_e(inst.e)
    f_small = f_matrix(cache, 1e-12)
    worst = max(worst, float(np.abs(f_small).max()) / max(np.abs(cache.e_tilde).max(), 1.0))
    return worst, 1e-7, "series and closed branches at |s| = delta"


def check_t_end_zero(instances, fault=False):
    worst = 0.0
    for inst in instances[:10]:
        h0 = initial_state(inst.e, inst.cache)
        for method in METHODS:
            worst = max(worst, _rel(solve(inst.e, inst.cache, OdeConfig(t_end=0.0, method=method)), h0))
        worst = max(worst, _rel(exact_solution(inst.e, inst.cache, 0.0), h0))
        worst = max(worst, _rel(paper_closed_form(inst.e, inst.cache, 0.0), inst.e))
        worst = max(worst, float(np.abs(f_matrix(inst.cache.with_e(inst.e), 0.0)).max()))
    e = np.random.default_rng(2).normal(size=(4, 2))
    ident = build_cache(np.eye(4), np.eye(2))
    worst = max(worst, _rel(exact_solution(e, ident, 2.5), 3.5 * e))
    worst = max(worst, _rel(paper_closed_form(e, ident, 2.5), 3.5 * e))
    return worst, 1e-12, "t_end = 0 identities and A = W = I"


def check_literal_form(instances, fault=False):
    devs = [_rel(paper_closed_form(inst.e, inst.cache, 1.0), _rk4(inst, 1.0, 512))
            for inst in instances]
    return float(np.median(devs)), np.inf, \
        f"median relative deviation from rk4 at t=1 (max {max(devs):.3f})"


def check_dirichlet(instances, fault=False):
    """Energy against a brute-force edge loop, and decay under repeated smoothing."""
    rng = np.random.default_rng(5)
    raw = normalize_adjacency(conversation_adjacency(5, 1, 1))
    h = rng.normal(size=(raw.node_count, 3))
    src = raw.source
    brute = 0.5 * sum(np.sum((h[i] - h[j]) ** 2) for i in range(len(src)) for j in range(len(src))
                      if src[i, j])
    err = abs(dirichlet_energy(h, raw) - brute) / brute
    smooth = h.copy()
    energies = []
    for _ in range(30):
        smooth = raw.matrix @ smooth
        energies.append(dirichlet_energy(smooth / np.linalg.norm(smooth), raw))
    decays = energies[-1] < energies[0]
    return (err if decays else np.inf), 1e-12, f"energy decays under smoothing: {decays}"


# --------------------------------------------------------------------------
# model-level checks
# --------------------------------------------------------------------------

def toy_problem(seed=0, **model_changes):
    """One three-utterance conversation, two speakers, four classes, tiny widths."""
    syn = dataio.SyntheticConfig(conversations=1, min_utterances=3, max_utterances=3,
                                 dims=(3, 2, 2), classes=4, speakers=2, seed=seed)
    ds = dataio.gen_synthetic(syn)
    cfg = replace(M.ModelConfig(input_dims=(3, 2, 2), n_classes=4, n_speakers=2, hidden=2,
                                dim=3, head_hidden=4, w_past=1, w_future=1,
                                ode=OdeConfig(steps=4)), **model_changes)
    params = M.init_params(cfg, seed, ds.classes, ("spk0", "spk1"))
    batch = M.collate(M.prepare_dataset(ds, params), cfg.n_speakers, cfg.ode.clamp_eps)
    return ds, params, batch


def gradient_check(params, batch, l2=1e-3, dropout=0.5, mask_seed=7, step=1e-5):
    """Relative error between backprop and central differences, per parameter array.

    The dropout mask is held fixed by reseeding its generator on every call.
    """
    def loss_value():
        return M.batch_loss(batch, params, l2, True, dropout, np.random.default_rng(mask_seed))

    _, grads = M.backward(batch, params, l2, True, dropout, np.random.default_rng(mask_seed))
    errors = {}
    for name, arr in params.named_arrays().items():
        fd = np.zeros_like(arr)
        flat, gflat = arr.reshape(-1), fd.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + step
            up = loss_value()
            flat[k] = orig - step
            down = loss_value()
            flat[k] = orig
            gflat[k] = (up - down) / (2 * step)
        g = grads[name]
        scale = max(np.linalg.norm(g), np.linalg.norm(fd))
        errors[name] = 0.0 if scale < 1e-9 else float(np.linalg.norm(g - fd) / scale)
    return errors


def check_gradients(instances=None, fault=False):
    worst, where = 0.0, ""
    runs = [dict(use_ode=o, use_mixhop=m) for o, m in FLAG_COMBOS]
    runs += [dict(ode=OdeConfig(method=meth, t_end=2.0, steps=3))
             for meth in ("euler", "closed_form_exact", "closed_form_paper")]
    for changes in runs:
        _, params, batch = toy_problem(0, **changes)
        for name, err in gradient_check(params, batch).items():
            if err > worst:
                worst, where = err, f"{name} with {changes}"
    return worst, 1e-3, f"{len(runs)} model variants; worst at {where}"


class _Utt:
    def __init__(self, text, audio, visual):
        self.text, self.audio, self.visual = text, audio, visual


def check_pipeline(instances=None, fault=False):
    """Per-utterance library operations reproduce the batched training path."""
    worst = 0.0
    for method in METHODS:
        ds, params, batch = toy_problem(1, ode=OdeConfig(method=method, t_end=1.5, steps=6))
        cfg = params.config
        conv = ds.conversations[0]
        one = M.collate(M.prepare_dataset(ds.subset([conv]), params), cfg.n_speakers,
                        cfg.ode.clamp_eps)
        n_spk = cfg.n_speakers
        fused = {}
        for m in M.MODALITIES:
            c = encode_modality(conv.modality(m), params.encoders[m])
            fused[m] = []
            for vec, spk in zip(c, conv.speakers):
                onehot = np.zeros(n_spk)
                onehot[params.speakers.index(spk)] = 1.0
                fused[m].append(fuse_speaker(vec, speaker_embed(onehot, params.speaker)))
        graph = build_conversation_graph(
            [_Utt(*(fused[m][i] for m in M.MODALITIES)) for i in range(len(conv))],
            cfg.w_past, cfg.w_future)
        adj = normalize_adjacency(graph.adjacency, cfg.alpha)
        w = params.mixing_matrix()
        h = unroll_mixhop(graph.features, adj, MixhopParams(w, params.hop_gates.copy()),
                          cfg.mixhop_depth)
        h = solve(h, build_cache(adj, w, cfg.ode.clamp_eps), cfg.ode)
        L = len(conv)
        emb = (h[:L] + h[L:2 * L] + h[2 * L:]) / 3.0
        logits = np.maximum(emb @ params.W_l.T + params.b_l, 0.0) @ params.W_smax.T + params.b_smax
        probs = np.exp(logits - logits.max(axis=1, keepdims=True))
        probs /= probs.sum(axis=1, keepdims=True)
        model_probs = M.forward(one, params)
        worst = max(worst, _rel(probs, model_probs))
        if [M.predict_label(r) for r in probs] != [int(np.argmax(r)) for r in model_probs]:
            worst = np.inf
        manual = -np.mean(np.log(probs[np.arange(L), one.labels]))
        worst = max(worst, abs(float(M.loss(model_probs, one.labels, params)) - manual))
    return worst, 1e-9, "library ops vs batched forward, all ODE methods"


def check_metrics(instances=None, fault=False):
    rep = report_from_confusion(np.array([[1, 1], [0, 2]]))
    return abs(rep.weighted_f1 - 11.0 / 15.0), 1e-9, f"W-F1 of [[1,1],[0,2]] = {rep.weighted_f1:.5f}"


CHECKS = {
    "oracle_triangle": (check_oracle_triangle,
                        ("exact_solution", "integrate", "initial_state", "ode_rhs")),
    "riemann_derivative": (check_riemann_derivative, ("exact_solution", "ode_rhs")),
    "second_order_identity": (check_second_order, ("second_order_identity_check",)),
    "initial_state": (check_initial_state, ("initial_state",)),
    "linearity": (check_linearity, ("exact_solution",)),
    "discrete_continuous": (check_discrete_continuous, ("mixhop_step", "exact_solution")),
    "solver_orders": (check_solver_orders, ("integrate",)),
    "f_continuity": (check_f_continuity, ("f_matrix",)),
    "t_end_zero": (check_t_end_zero, ("solve", "paper_closed_form", "f_matrix")),
    "literal_form_deviation": (check_literal_form, ("paper_closed_form",)),
    "dirichlet_energy": (check_dirichlet, ("dirichlet_energy", "normalize_adjacency")),
    "gradients": (check_gradients, ("classifier_head", "loss", "mixhop_step", "solve")),
    "pipeline": (check_pipeline, ("normalize_adjacency", "build_conversation_graph",
                                  "speaker_embed", "gru_cell_step", "encode_modality",
                                  "fuse_speaker", "mixhop_step", "solve", "classifier_head",
                                  "predict_label", "loss")),
    "metrics": (check_metrics, ("weighted_f1",)),
}
REPORT_ONLY = {"literal_form_deviation"}


def coverage_gaps(names=None):
    covered = set()
    for name in names or CHECKS:
        covered.update(CHECKS[name][1])
    return sorted(set(EQUATION_OPERATIONS) - covered)


def run_suite(seed=0, fault_inject=False, count=50, only=None):
    """Run the checks and return a list of :class:`CheckResult`."""
    instances = random_instances(count, seed)
    results = []
    names = list(only) if only else list(CHECKS)
    for name in names:
        fn, _ = CHECKS[name]
        t0 = time.perf_counter()
        residual, tol, detail = fn(instances, fault_inject)
        passed = bool(np.isfinite(residual) and residual < tol)
        results.append(CheckResult(name, passed or name in REPORT_ONLY, float(residual), tol,
                                   detail, name in REPORT_ONLY, time.perf_counter() - t0))
    if only:
        return results
    gaps = coverage_gaps(names)
    results.append(CheckResult("coverage_manifest", not gaps, float(len(gaps)), 0.5,
                               "uncovered: " + ", ".join(gaps) if gaps else "all operations covered"))
    return results


def all_passed(results):
    return all(r.passed for r in results)
