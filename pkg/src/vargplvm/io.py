"""Model persistence (JSON) and CSV reading/writing.

CSV dialect: comma separated, '.' decimal point, at most one header row,
empty fields are missing values (read as NaN).
"""
import base64
import csv
import json

import numpy as np

from .bound import OutputData
from .errors import ArgumentError, DataFileError
from .kernels import kernel_from_dict
from .model import Model
from .variational import DynamicalQ, FactorizedQ, LatentPrior

__all__ = ["FORMAT_VERSION", "model_to_dict", "model_from_dict", "save_model",
           "load_model", "read_csv", "write_csv", "encode_array", "decode_array"]

FORMAT_VERSION = 1


def encode_array(a, precision="decimal"):
    a = np.asarray(a, dtype=float)
    if precision == "decimal":
        return {"shape": list(a.shape), "data": a.ravel().tolist()}
    if precision == "base64":
        raw = np.ascontiguousarray(a, dtype="<f8").tobytes()
        return {"shape": list(a.shape), "base64": base64.b64encode(raw).decode("ascii")}
    raise ArgumentError(f"unknown precision {precision!r}; use decimal or base64")


def decode_array(d):
    shape = tuple(d["shape"])
    if "base64" in d:
        flat = np.frombuffer(base64.b64decode(d["base64"]), dtype="<f8").astype(float)
    else:
        flat = np.asarray(d["data"], dtype=float)
    return flat.reshape(shape)


def _mask(a):
    return None if a is None else np.asarray(a, dtype=bool).astype(int).tolist()


def model_to_dict(model, precision="decimal"):
    """Plain-JSON description of a model; arrays are row-major."""
    enc = lambda a: None if a is None else encode_array(a, precision)
    n, q = model.q.shape
    if isinstance(model.q, DynamicalQ):
        qd = {"form": "dynamical", "mu_bar": enc(model.q.mu_bar), "lam": enc(model.q.lam)}
    else:
        qd = {"form": "factorized", "mean": enc(model.q.mean), "var": enc(model.q.var),
              "fixed": _mask(model.q.fixed), "fixed_mean": _mask(model.q.fixed_mean)}
    pr = model.prior
    prior = {"kind": pr.kind, "kernel": pr.kernel.to_dict() if pr.kernel is not None else None,
             "t": enc(pr.t), "boundaries": list(pr.boundaries), "Z": enc(pr.Z),
             "var": enc(pr.var), "fix_var": bool(pr.fix_var), "fix_means": bool(pr.fix_means)}
    out = model.output
    return {
        "format_version": FORMAT_VERSION,
        "precision": precision,
        "metadata": {"variant": model.variant, "q": q, "m": model.num_inducing,
                     "n": n, "p": out.p},
        "kernel": model.kernel.to_dict(),
        "inducing": enc(model.Z),
        "beta": float(model.beta),
        "fix_beta": bool(model.fix_beta),
        "fix_inducing": bool(model.fix_inducing),
        "q": qd,
        "prior": prior,
        "output": {"p": out.p, "trace_yy": float(out.trace_yy), "factor": enc(out.factor),
                   "Y": enc(out.Y)},
        "y_mean": enc(model.y_mean),
        "schema": [[name, off, list(shape)] for name, off, shape in model.schema()],
        "trace": [[int(i), float(b), float(be)] for i, b, be in model.trace],
    }


def model_from_dict(d):
    if d.get("format_version") != FORMAT_VERSION:
        raise DataFileError(f"unsupported model format_version {d.get('format_version')!r}")
    dec = lambda a: None if a is None else decode_array(a)
    qd = d["q"]
    if qd["form"] == "dynamical":
        qx = DynamicalQ(dec(qd["mu_bar"]), dec(qd["lam"]))
    else:
        qx = FactorizedQ(dec(qd["mean"]), dec(qd["var"]), fixed=qd.get("fixed"),
                         fixed_mean=qd.get("fixed_mean"))
    pd = d["prior"]
    prior = LatentPrior(kind=pd["kind"],
                        kernel=kernel_from_dict(pd["kernel"]) if pd["kernel"] else None,
                        t=dec(pd["t"]), boundaries=pd["boundaries"], Z=dec(pd["Z"]),
                        var=dec(pd["var"]), fix_var=pd["fix_var"], fix_means=pd["fix_means"])
    od = d["output"]
    output = OutputData(int(od["p"]), dec(od["factor"]), float(od["trace_yy"]), dec(od["Y"]))
    model = Model(kernel_from_dict(d["kernel"]), dec(d["inducing"]), qx, float(d["beta"]),
                  output, prior=prior, fix_beta=d["fix_beta"], fix_inducing=d["fix_inducing"],
                  y_mean=dec(d["y_mean"]), trace=[tuple(r) for r in d.get("trace", [])])
    return model


def save_model(path, model, precision="decimal"):
    text = json.dumps(model_to_dict(model, precision), indent=1, sort_keys=True)
    with open(path, "w") as fh:
        fh.write(text + "\n")


def load_model(path):
    try:
        with open(path) as fh:
            d = json.load(fh)
    except OSError as e:
        raise DataFileError(f"cannot read model file {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise DataFileError(f"{path}: invalid JSON at line {e.lineno}") from e
    try:
        return model_from_dict(d)
    except (KeyError, TypeError) as e:
        raise DataFileError(f"{path}: malformed model file ({e})") from e


def read_csv(path, header=False):
    """Read a numeric table; returns ``(array, column_names_or_None)``."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as e:
        raise DataFileError(f"cannot read {path}: {e}") from e
    names = None
    start = 0
    if header:
        if not rows:
            raise DataFileError(f"{path}: missing header row")
        names = [c.strip() for c in rows[0]]
        start = 1
    data, width = [], len(names) if names else None
    for lineno, row in enumerate(rows[start:], start=start + 1):
        if not row:
            continue   # blank line
        if width is None:
            width = len(row)
        if len(row) != width:
            raise DataFileError(f"{path}: line {lineno} has {len(row)} fields, expected {width}")
        try:
            data.append([float(c) if c.strip() else np.nan for c in row])
        except ValueError as e:
            raise DataFileError(f"{path}: line {lineno}: non-numeric field ({e})") from e
    if not data:
        raise DataFileError(f"{path}: no data rows")
    return np.array(data, dtype=float), names


def write_csv(path, table, header=None):
    """Write rows of numbers (NaN written as an empty field) or strings."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header is not None:
            w.writerow(header)
        for row in table:
            w.writerow(["" if isinstance(v, float) and np.isnan(v) else _fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)
