"""Command-line front end.

Subcommands: train, reconstruct, forecast, density, autoregress, semisup.
Options may also come from a plain-text ``key=value`` file (``--config``);
flags given on the command line override file values.

Exit codes: 0 success, 2 argument error, 3 I/O error, 4 numerical error.
"""
import argparse
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, CapabilityError, DataFileError, NumericalError, StateError
from .io import load_model, read_csv, save_model, write_csv
from .kernels import parse_kernel
from .predict import (InferConfig, autoregress_dataset, forecast, iterative_predict,
                      log_density, predict_moments, reconstruct)
from .training import TrainConfig, ard_report, default_temporal_kernel, fit
from .variational import LatentPrior

EXIT_OK, EXIT_ARGS, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4

# option name -> (type, default); shared by the flag parser and config files
OPTIONS = {
    "data": (str, None),
    "test": (str, None),
    "model": (str, None),
    "out": (str, None),
    "variant": (str, "static"),
    "latent_dim": (int, 2),
    "inducing": (int, 20),
    "iters": (int, 1000),
    "fixed_beta_iters": (int, 100),
    "seed": (int, 0),
    "threads": (int, 1),
    "kernel": (str, "rbfard+bias"),
    "timestamps": (str, None),
    "test_timestamps": (str, None),
    "inputs": (str, None),
    "boundaries": (str, None),
    "header": (bool, False),
    "init_variance": (float, 0.5),
    "infer_iters": (int, 300),
    "include_noise": (bool, False),
    "precision": (str, "decimal"),
    "tau": (int, 16),
    "steps": (int, 0),
    "prior_var": (float, 0.01),
    "input_cols": (int, None),
    "benchmark": (bool, False),
    "fractions": (str, None),
    "seeds": (str, None),
}

VARIANTS = ("static", "dynamical", "uncertain-input")


@dataclass
class RunConfig:
    command: str
    values: dict = field(default_factory=dict)

    def __getattr__(self, name):
        try:
            return self.__dict__["values"][name]
        except KeyError:
            raise AttributeError(name) from None


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ArgumentError(f"not a boolean: {text!r}")


def read_config_file(path):
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as e:
        raise DataFileError(f"cannot read config {path}: {e}") from e
    out = {}
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ArgumentError(f"{path}: line {lineno}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in OPTIONS:
            raise ArgumentError(f"{path}: line {lineno}: unknown key {key!r}")
        typ = OPTIONS[key][0]
        try:
            out[key] = _bool(val) if typ is bool else typ(val)
        except ValueError as e:
            raise ArgumentError(f"{path}: line {lineno}: bad value for {key}: {val!r}") from e
    return out


def build_parser():
    parser = argparse.ArgumentParser(prog="vargplvm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("train", "reconstruct", "forecast", "density", "autoregress", "semisup"):
        p = sub.add_parser(name)
        p.add_argument("--config")
        for key, (typ, _) in OPTIONS.items():
            flag = "--" + key.replace("_", "-")
            if typ is bool:
                p.add_argument(flag, dest=key, action="store_const", const=True, default=None)
            else:
                p.add_argument(flag, dest=key, type=typ, default=None)
    return parser


def resolve(argv):
    """Parse flags, merge with an optional config file, fill defaults."""
    args = build_parser().parse_args(argv)
    values = {k: d for k, (_, d) in OPTIONS.items()}
    if args.config:
        values.update(read_config_file(args.config))
    values.update({k: v for k, v in vars(args).items() if k in OPTIONS and v is not None})
    if values["variant"] not in VARIANTS:
        raise ArgumentError(f"variant must be one of {VARIANTS}")
    return RunConfig(args.command, values)


def _need(cfg, *names):
    for name in names:
        if getattr(cfg, name) is None:
            raise ArgumentError(f"{cfg.command} needs --{name.replace('_', '-')}")


def _stem(path):
    return os.path.splitext(path)[0]


def _int_list(text):
    return [int(s) for s in str(text).split(",") if s.strip()]


def _float_list(text):
    return [float(s) for s in str(text).split(",") if s.strip()]


def _read_full(path, header, what):
    X, _ = read_csv(path, header=header)
    if np.isnan(X).any():
        raise ArgumentError(f"{what} file {path} must not contain missing values")
    return X


# -- commands ------------------------------------------------------------------

def cmd_train(cfg):
    _need(cfg, "data", "model")
    Y = _read_full(cfg.data, cfg.header, "data")
    n, p = Y.shape
    q = cfg.latent_dim
    prior = None
    if cfg.variant == "dynamical":
        _need(cfg, "timestamps")
        t = _read_full(cfg.timestamps, cfg.header, "timestamps")
        if t.shape[0] != n:
            raise ArgumentError("timestamps and data differ in length")
        bounds = _int_list(cfg.boundaries) if cfg.boundaries else [0]
        prior = LatentPrior("temporal", kernel=default_temporal_kernel(t), t=t, boundaries=bounds)
    elif cfg.variant == "uncertain-input":
        _need(cfg, "inputs")
        Z = _read_full(cfg.inputs, cfg.header, "inputs")
        if Z.shape[0] != n:
            raise ArgumentError("inputs and data differ in length")
        q = Z.shape[1]
        prior = LatentPrior("uncertain", Z=Z, var=np.full(q, cfg.prior_var))
    if cfg.variant == "static" and q > min(n, p):
        raise ArgumentError(f"latent-dim {q} exceeds min(n, p)={min(n, p)} for PCA initialisation")
    tcfg = TrainConfig(latent_dim=q, num_inducing=cfg.inducing, fixed_beta_iters=cfg.fixed_beta_iters,
                       main_iters=cfg.iters, init_variance=cfg.init_variance, seed=cfg.seed,
                       kernel=cfg.kernel)
    parse_kernel(cfg.kernel, q)   # validate before the expensive part
    model = fit(Y, tcfg, prior=prior)
    save_model(cfg.model, model, cfg.precision)
    stem = _stem(cfg.model)
    write_csv(stem + ".trace.csv", model.trace, header=["iter", "bound", "beta"])
    try:
        text = ard_report(model).to_text()
    except CapabilityError:
        text = "# kernel has no ARD weights\n"
    with open(stem + ".ard.txt", "w") as fh:
        fh.write(text)
    return model


def _infer_config(cfg):
    return InferConfig(iters=cfg.infer_iters)


def cmd_reconstruct(cfg):
    _need(cfg, "model", "test", "out")
    model = load_model(cfg.model)
    Ys, _ = read_csv(cfg.test, header=cfg.header)
    if Ys.shape[1] != model.output.p:
        raise ArgumentError(f"test file has {Ys.shape[1]} columns, model expects {model.output.p}")
    missing = np.isnan(Ys)
    if not missing.any():
        raise ArgumentError("test rows are fully observed; use the density command instead")
    if not (missing == missing[0]).all():
        raise ArgumentError("all test rows must share the same set of missing columns")
    o = np.where(~missing[0])[0]
    u = np.where(missing[0])[0]
    t_star = None
    if model.prior.kind == "temporal":
        _need(cfg, "test_timestamps")
        t_star = _read_full(cfg.test_timestamps, cfg.header, "timestamps")
    mom, _ = reconstruct(Ys[:, o], o, model, _infer_config(cfg), t_star=t_star,
                         include_noise=cfg.include_noise)
    header = [f"mean_{j}" for j in u] + [f"var_{j}" for j in u]
    write_csv(cfg.out, np.hstack([mom.mean, mom.var]), header=header)
    return mom


def cmd_forecast(cfg):
    _need(cfg, "model", "test_timestamps", "out")
    model = load_model(cfg.model)
    t_star = _read_full(cfg.test_timestamps, cfg.header, "timestamps")
    tq, mom = forecast(t_star, model, include_noise=cfg.include_noise)
    q, p = tq.mean.shape[1], mom.mean.shape[1]
    header = (["t"] + [f"x_mean_{j}" for j in range(q)] + [f"x_var_{j}" for j in range(q)]
              + [f"y_mean_{j}" for j in range(p)] + [f"y_var_{j}" for j in range(p)])
    write_csv(cfg.out, np.hstack([t_star[:, :1], tq.mean, tq.var, mom.mean, mom.var]), header=header)
    return tq, mom


def cmd_density(cfg):
    """Per-row log density of test points (jointly for a dynamical model)."""
    _need(cfg, "model", "test", "out")
    model = load_model(cfg.model)
    Ys = _read_full(cfg.test, cfg.header, "test")
    icfg = _infer_config(cfg)
    if model.prior.kind == "temporal":
        _need(cfg, "test_timestamps")
        t_star = _read_full(cfg.test_timestamps, cfg.header, "timestamps")
        rows = [("all", log_density(Ys, model, icfg, t_star=t_star))]
    else:
        rows = [(i, log_density(Ys[i:i + 1], model, icfg)) for i in range(Ys.shape[0])]
    write_csv(cfg.out, rows, header=["row", "log_density"])
    return rows


def cmd_autoregress(cfg):
    """Train a windowed uncertain-input model; write one-step fits and k-step predictions."""
    _need(cfg, "data", "out")
    Y = _read_full(cfg.data, cfg.header, "data")
    Zh, Yh = autoregress_dataset(Y, cfg.tau)
    q = Zh.shape[1]
    prior = LatentPrior("uncertain", Z=Zh, var=np.full(q, cfg.prior_var), fix_var=True,
                        fix_means=True)
    tcfg = TrainConfig(latent_dim=q, num_inducing=min(cfg.inducing, Zh.shape[0]),
                       fixed_beta_iters=cfg.fixed_beta_iters, main_iters=cfg.iters,
                       init_variance=cfg.prior_var, seed=cfg.seed, kernel=cfg.kernel)
    model = fit(Yh, tcfg, prior=prior)
    if cfg.model:
        save_model(cfg.model, model, cfg.precision)
    p = Yh.shape[1]
    mom = predict_moments(model, Zh, np.zeros_like(Zh), None, include_noise=cfg.include_noise)
    header = ["index"] + [f"target_{j}" for j in range(p)] + [f"mean_{j}" for j in range(p)] \
        + [f"var_{j}" for j in range(p)]
    idx = np.arange(cfg.tau, Y.shape[0])[:, None]
    write_csv(cfg.out, np.hstack([idx, Yh, mom.mean, mom.var]), header=header)
    if cfg.steps > 0:
        means, variances = iterative_predict(model, Y[-cfg.tau:], cfg.steps)
        header = ["step"] + [f"mean_{j}" for j in range(p)] + [f"var_{j}" for j in range(p)]
        steps = np.arange(1, cfg.steps + 1)[:, None]
        write_csv(_stem(cfg.out) + ".iterative.csv", np.hstack([steps, means, variances]),
                  header=header)
    return model


def cmd_semisup(cfg):
    from .semisup import BenchConfig, SemiSupConfig, semi_supervised_train, semisup_benchmark
    scfg = SemiSupConfig(num_inducing=cfg.inducing, fixed_beta_iters=cfg.fixed_beta_iters,
                         main_iters=cfg.iters, infer_iters=cfg.infer_iters, kernel=cfg.kernel,
                         seed=cfg.seed)
    _need(cfg, "out")
    if cfg.benchmark:
        bcfg = BenchConfig(train=scfg)
        if cfg.fractions:
            bcfg.fractions = tuple(_float_list(cfg.fractions))
        if cfg.seeds:
            bcfg.seeds = tuple(_int_list(cfg.seeds))
        rows = semisup_benchmark(bcfg)
        write_csv(cfg.out, rows, header=["missing_fraction", "method", "mse", "stderr"])
        return rows
    _need(cfg, "data", "input_cols", "test")
    D, _ = read_csv(cfg.data, header=cfg.header)
    k = cfg.input_cols
    if not 0 < k < D.shape[1]:
        raise ArgumentError("input-cols must leave at least one output column")
    ss = semi_supervised_train(D[:, :k], D[:, k:], scfg)
    Zs = _read_full(cfg.test, cfg.header, "test")
    if Zs.shape[1] != k:
        raise ArgumentError(f"test file must have {k} input columns")
    mean, var = ss.predict(Zs, include_noise=cfg.include_noise)
    p = mean.shape[1]
    write_csv(cfg.out, np.hstack([mean, var]),
              header=[f"mean_{j}" for j in range(p)] + [f"var_{j}" for j in range(p)])
    return ss


COMMANDS = {"train": cmd_train, "reconstruct": cmd_reconstruct, "forecast": cmd_forecast,
            "density": cmd_density, "autoregress": cmd_autoregress, "semisup": cmd_semisup}


def main(argv=None):
    try:
        cfg = resolve(argv)
    except SystemExit as e:      # argparse usage errors
        return EXIT_ARGS if e.code else EXIT_OK
    except ArgumentError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ARGS
    except DataFileError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    try:
        from threadpoolctl import threadpool_limits
        with threadpool_limits(limits=max(1, cfg.threads)):
            COMMANDS[cfg.command](cfg)
    except (ArgumentError, CapabilityError, StateError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ARGS
    except (DataFileError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except (NumericalError, np.linalg.LinAlgError) as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
