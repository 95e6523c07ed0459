"""Semi-supervised GP regression with partially observed inputs.

Fully observed input rows are treated as latent points clamped at their
values with a tiny variance.  Partially observed rows first get their
missing cells inferred from their outputs under the clamped-only model, then
q(X) of the missing cells is refined on all rows with the observed cells held
fixed.  By default the kernel, noise and inducing inputs keep their values from
the clamped-only stage.
"""
import warnings
from dataclasses import dataclass, field

import numpy as np

from .bound import OutputData
from .errors import ArgumentError
from .kernels import parse_kernel
from .model import Model
from .predict import InferConfig, infer_latent, nearest_neighbours, predict_moments
from .training import LbfgsOptimizer, TrainConfig, train
from .variational import FactorizedQ

__all__ = ["SemiSupConfig", "SemiSupModel", "semi_supervised_train",
           "semisup_benchmark", "BenchConfig", "Standardizer"]


@dataclass
class SemiSupConfig:
    eps: float = 1e-9
    num_inducing: int = 30
    fixed_beta_iters: int = 50
    main_iters: int = 300
    infer_iters: int = 150
    kernel: str = "rbfard+bias"
    seed: int = 0
    # step C keeps the step-A kernel, noise and inducing inputs; only q(X) moves
    hold_hyper: bool = True
    hold_inducing: bool = True

    def __post_init__(self):
        if not self.eps > 0:
            raise ArgumentError("eps must be positive")


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X):
        mean = np.nanmean(X, 0)
        std = np.nanstd(X, 0)
        std = np.where(std > 1e-12, std, 1.0)
        return cls(mean, std)

    def forward(self, X):
        return (X - self.mean) / self.std

    def inverse(self, X):
        return X * self.std + self.mean

    def inverse_var(self, V):
        return V * self.std ** 2


@dataclass
class SemiSupModel:
    model: Model
    z_scale: Standardizer
    y_scale: Standardizer
    stage_a: Model = None
    imputed: tuple = None     # (mean, var) of q(X) after step B, standardised units

    def predict(self, Zstar, include_noise=False):
        """Output mean and variance for fully observed test inputs."""
        Zs = self.z_scale.forward(np.atleast_2d(Zstar))
        eps = np.full(Zs.shape, 1e-9)
        mom = predict_moments(self.model, Zs, eps, None, include_noise)
        return self.y_scale.inverse(mom.mean), self.y_scale.inverse_var(mom.var)


def _clamped_model(kernel_expr, Zmean, Zvar, fixed, Y, m, seed):
    n, q = Zmean.shape
    rng = np.random.default_rng(seed)
    kernel = parse_kernel(kernel_expr, q)
    leaf = kernel.children[0] if hasattr(kernel, "children") else kernel
    leaf.weights = (1.0 / q) * (1.0 + 0.01 * rng.standard_normal(q))
    Z = Zmean[rng.choice(n, min(m, n), replace=False)].copy()
    qx = FactorizedQ(Zmean, Zvar, fixed=fixed)
    y_mean = Y.mean(0)
    return Model(kernel, Z, qx, 100.0 / max(float(np.var(Y - y_mean)), 1e-12),
                 OutputData.from_Y(Y - y_mean), y_mean=y_mean)


def _freeze_kernel(kernel):
    for leaf in getattr(kernel, "children", [kernel]):
        leaf.fixed = set(name for name, _ in leaf._groups())


def semi_supervised_train(Z, Y, config=None):
    """Train on inputs ``Z`` (NaN marks a missing cell) and outputs ``Y``."""
    cfg = config or SemiSupConfig()
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if Z.shape[0] != Y.shape[0]:
        raise ArgumentError("inputs and outputs differ in length")
    if np.any(~np.isfinite(Y)):
        raise ArgumentError("outputs must be fully observed")
    zs, ys = Standardizer.fit(Z), Standardizer.fit(Y)
    Zs, Ys = zs.forward(Z), ys.forward(Y)
    obs = np.isfinite(Zs)
    o_rows = np.where(obs.all(1))[0]
    u_rows = np.where(~obs.all(1))[0]
    n, q = Zs.shape
    tcfg = TrainConfig(latent_dim=q, num_inducing=cfg.num_inducing,
                       fixed_beta_iters=cfg.fixed_beta_iters, main_iters=cfg.main_iters,
                       seed=cfg.seed)

    # step A: clamped model on the fully observed rows
    stage_a = None
    if o_rows.size:
        stage_a = _clamped_model(cfg.kernel, Zs[o_rows], np.full((o_rows.size, q), cfg.eps),
                                 np.ones((o_rows.size, q), bool), Ys[o_rows],
                                 cfg.num_inducing, cfg.seed)
        train(stage_a, tcfg)
        if u_rows.size == 0:
            return SemiSupModel(stage_a, zs, ys, stage_a)
    else:
        warnings.warn("no fully observed rows; training an unsupervised model")

    # step B: infer missing cells of each partial row from its outputs
    mean = np.where(obs, Zs, 0.0)
    var = np.where(obs, cfg.eps, 1.0)
    if stage_a is not None:
        icfg = InferConfig(iters=cfg.infer_iters)
        nn = nearest_neighbours(Ys[o_rows], Ys[u_rows])
        for r, i in enumerate(u_rows):
            m0 = np.where(obs[i], Zs[i], Zs[o_rows[nn[r]]])[None]
            v0 = np.where(obs[i], cfg.eps, 0.5)[None]
            tq = infer_latent(stage_a, Ys[i:i + 1], None, icfg,
                              init_mean=m0, init_var=v0, fixed=obs[i][None])
            mean[i] = np.where(obs[i], Zs[i], tq.mean[0])
            var[i] = np.where(obs[i], cfg.eps, np.clip(tq.var[0], cfg.eps, 1.0))

    # step C: joint refinement with observed cells clamped
    model = _clamped_model(cfg.kernel, mean, var, obs, Ys, cfg.num_inducing, cfg.seed)
    if stage_a is not None:
        model.kernel = stage_a.kernel.copy()
        model.beta = stage_a.beta
        if stage_a.Z.shape == model.Z.shape:
            model.Z = stage_a.Z.copy()
        if cfg.hold_hyper:
            _freeze_kernel(model.kernel)
            model.fix_beta = True
        model.fix_inducing = cfg.hold_inducing
    train(model, tcfg)
    return SemiSupModel(model, zs, ys, stage_a, (mean, var))


# -- benchmark -----------------------------------------------------------------

@dataclass
class BenchConfig:
    n_obs: int = 40
    n_partial: int = 60
    n_test: int = 100
    q: int = 15
    p: int = 5
    fractions: tuple = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 1.0)
    seeds: tuple = (0, 1, 2, 3)
    train: SemiSupConfig = field(default_factory=SemiSupConfig)
    workers: int = 1          # seeds run in separate processes when > 1


def _mse(a, b):
    return float(np.mean((a - b) ** 2))


def _bench_seed(cfg, seed, data_fn=None):
    from .data import semisup_data
    if data_fn is None:
        Z, Y = semisup_data(cfg.n_obs + cfg.n_partial + cfg.n_test, cfg.q, cfg.p, seed=seed)
    else:
        Z, Y = data_fn(cfg.n_obs + cfg.n_partial + cfg.n_test, seed)
    n_tr = cfg.n_obs + cfg.n_partial
    rng = np.random.default_rng(1000 + seed)
    Ztr, Ytr, Zte, Yte = Z[:n_tr], Y[:n_tr], Z[n_tr:], Y[n_tr:]
    ys = Standardizer.fit(Ytr)
    target = ys.forward(Yte)
    o = slice(0, cfg.n_obs)
    # baselines depend only on the fully observed rows
    base = semi_supervised_train(Ztr[o], Ytr[o], cfg.train)
    gp_pred = ys.forward(base.predict(Zte)[0])
    zs_o = Standardizer.fit(Ztr[o])
    nn = nearest_neighbours(zs_o.forward(Ztr[o]), zs_o.forward(Zte))
    nn_pred = ys.forward(Ytr[o][nn])
    mean_pred = np.broadcast_to(ys.forward(Ytr[o]).mean(0), target.shape)
    out = {}
    for frac in cfg.fractions:
        Zm = Ztr.copy()
        part = Zm[cfg.n_obs:]
        drop = rng.random(part.shape) < frac if frac < 1.0 else np.ones(part.shape, bool)
        part[drop] = np.nan
        ss = semi_supervised_train(Zm, Ytr, cfg.train)
        ss_pred = ys.forward(ss.predict(Zte)[0])
        for method, pred in (("semi-supervised", ss_pred), ("gp-observed", gp_pred),
                             ("nn-observed", nn_pred), ("mean", mean_pred)):
            out[(frac, method)] = _mse(pred, target)
    return out


def _bench_worker(args):
    from threadpoolctl import threadpool_limits
    with threadpool_limits(limits=1), warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return _bench_seed(*args)


def semisup_benchmark(config=None, data_fn=None):
    """MSE of the semi-supervised model against baselines.

    Returns rows ``(fraction, method, mse, stderr)`` averaged over seeds.  MSE
    is measured on outputs standardised with the training statistics.
    ``data_fn(n, seed) -> (Z, Y)`` replaces the default generator; it must be
    picklable when ``workers > 1``.
    """
    cfg = config or BenchConfig()
    jobs = [(cfg, seed, data_fn) for seed in cfg.seeds]
    if cfg.workers > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=min(cfg.workers, len(jobs))) as pool:
            per_seed = list(pool.map(_bench_worker, jobs))
    else:
        per_seed = [_bench_seed(*job) for job in jobs]
    scores = {}
    for res in per_seed:
        for key, val in res.items():
            scores.setdefault(key, []).append(val)
    rows = []
    for (frac, method), vals in sorted(scores.items()):
        v = np.asarray(vals)
        se = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0
        rows.append((frac, method, float(v.mean()), se))
    return rows
