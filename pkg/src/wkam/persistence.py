"""Run configuration, state files and CSV output.

State files come in two forms written side by side:

* ``<name>.json``: one JSON object holding the torus, splitting, rates,
  history and the configuration hash.  Floats are written with ``repr`` so
  they round-trip exactly; non-finite values become the strings ``"inf"``,
  ``"-inf"`` and ``"nan"``.
* ``<name>.bin``: ``b"WKST"``, version (u8), header length (u32 LE), the JSON
  header without series, then the series blobs in the order listed under
  ``"series"`` in the header (each in the ``WKFS`` format).

Every file is written to a temporary name in the target directory and moved
into place with :func:`os.replace`.
"""

import copy
import csv
import hashlib
import io
import json
import math
import os
import struct
import tempfile

import numpy as np

from . import __version__
from .cohomology import GOLDEN_MEAN
from .errors import ConfigError
from .fourier import FourierSeries
from .kam import TorusSolution
from .splitting import GRAPHS, RateEstimate, Splitting

STATE_MAGIC = b"WKST"
STATE_VERSION = 1
SCAN_MAGIC = b"WKSC"

FAMILIES = ("dissipative_standard",)

DEFAULTS = {
    "family": None,
    "lam": 0.9,
    "c": 1.5,
    "eps_c": 0.0,
    "eps": 0.0,
    "alpha": None,
    "a": None,
    "omega": GOLDEN_MEAN,
    "tau": 1.0,
    "K_max": 64,
    "N_g": None,
    "tol": 1e-11,
    "max_iter": 20,
    "L0": 60,
    "seed": None,
    "lam_declared": None,
    "verify": {"samples": 100, "rng_seed": 0, "h": 1e-6, "conformal_tol": 1e-10, "jacobian_tol": 1e-8},
    "scan": {"A": 0.5, "N": 0, "r0": 0.9, "resolution": 256, "K_probe": 10000, "alpha": -1.0, "a": 5},
    "continuation": {"eps_path": None, "linspace": None, "order": 2},
}

SOLVE_COLUMNS = ("iter", "residual", "beta_norm", "defect", "lambda_minus", "lambda_c_minus", "lambda_c_plus",
                 "lambda_plus", "sys_condition")
SCAN_COLUMNS = ("re_eps", "im_eps", "member", "log_margin")
SUMMARY_COLUMNS = ("eps", "mu", "residual", "lambda_minus", "lambda_c_minus", "lambda_c_plus", "lambda_plus",
                   "sys_condition", "newton_steps")


# configuration

def _merge(defaults, given, where):
    out = copy.deepcopy(defaults)
    for key, val in given.items():
        if key not in defaults:
            raise ConfigError(f"unknown configuration key {where}{key!r}")
        if isinstance(defaults[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"configuration key {where}{key!r} must be an object")
            out[key] = _merge(defaults[key], val, f"{where}{key}.")
        else:
            out[key] = val
    return out


def _number(cfg, key, kind=float, positive=False, allow_none=False):
    val = cfg[key]
    if val is None and allow_none:
        return None
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{key!r} must be a number, got {val!r}")
    if kind is int and int(val) != val:
        raise ConfigError(f"{key!r} must be an integer, got {val!r}")
    val = kind(val)
    if positive and not val > 0:
        raise ConfigError(f"{key!r} must be positive, got {val!r}")
    return val


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"config {path} is not valid JSON: {err}") from err
    return validate_config(raw)


def validate_config(raw):
    """Merge with defaults and validate; returns the materialized configuration."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    if "family" not in raw:
        raise ConfigError("missing required key 'family'")
    cfg = _merge(DEFAULTS, raw, "")
    if cfg["family"] not in FAMILIES:
        raise ConfigError(f"unknown family {cfg['family']!r}; available: {', '.join(FAMILIES)}")
    for key in ("lam", "c", "eps_c", "eps", "omega"):
        cfg[key] = _number(cfg, key)
    for key in ("tau", "tol"):
        cfg[key] = _number(cfg, key, positive=True)
    for key in ("K_max", "max_iter", "L0"):
        cfg[key] = _number(cfg, key, int, positive=True)
    cfg["N_g"] = _number(cfg, "N_g", int, positive=True, allow_none=True)
    cfg["alpha"] = _number(cfg, "alpha", allow_none=True)
    cfg["a"] = _number(cfg, "a", int, positive=True, allow_none=True)
    cfg["lam_declared"] = _number(cfg, "lam_declared", allow_none=True)
    if (cfg["alpha"] is None) != (cfg["a"] is None):
        raise ConfigError("'alpha' and 'a' must be given together")
    if cfg["alpha"] is None and not 0.0 < cfg["lam"] < 1.0:
        raise ConfigError(f"'lam' must lie in (0, 1), got {cfg['lam']}")
    if not cfg["c"] > 0:
        raise ConfigError(f"'c' must be positive, got {cfg['c']}")
    if cfg["N_g"] is not None and cfg["N_g"] < 2 * cfg["K_max"] + 1:
        raise ConfigError("'N_g' must be at least 2*K_max + 1")
    if cfg["seed"] is not None and not isinstance(cfg["seed"], str):
        raise ConfigError("'seed' must be a path string")
    v = cfg["verify"]
    for key, kind in (("samples", int), ("rng_seed", int), ("h", float), ("conformal_tol", float),
                      ("jacobian_tol", float)):
        v[key] = _number(v, key, kind)
    if v["samples"] < 1:
        raise ConfigError("'verify.samples' must be at least 1")
    if not 1e-8 <= v["h"] <= 1e-4:
        raise ConfigError("'verify.h' must lie in [1e-8, 1e-4]")
    s = cfg["scan"]
    s["A"] = _number(s, "A", positive=True)
    s["N"] = _number(s, "N", int)
    s["r0"] = _number(s, "r0")
    s["resolution"] = _number(s, "resolution", int, positive=True)
    s["K_probe"] = _number(s, "K_probe", int, positive=True)
    s["alpha"] = _number(s, "alpha")
    s["a"] = _number(s, "a", int, positive=True)
    if s["N"] < 0 or s["r0"] < 0:
        raise ConfigError("'scan.N' and 'scan.r0' must be nonnegative")
    if s["r0"] > 0 and s["resolution"] < 64:
        raise ConfigError("'scan.resolution' must be at least 64")
    if s["alpha"] == 0:
        raise ConfigError("'scan.alpha' must be nonzero")
    c = cfg["continuation"]
    c["order"] = _number(c, "order", int)
    if c["order"] < 0:
        raise ConfigError("'continuation.order' must be nonnegative")
    if c["eps_path"] is not None and c["linspace"] is not None:
        raise ConfigError("give either 'continuation.eps_path' or 'continuation.linspace', not both")
    if c["eps_path"] is not None:
        if not isinstance(c["eps_path"], list) or not c["eps_path"]:
            raise ConfigError("'continuation.eps_path' must be a nonempty list")
        c["eps_path"] = [float(_number({"eps": e}, "eps")) for e in c["eps_path"]]
    if c["linspace"] is not None:
        ls = c["linspace"]
        if not isinstance(ls, list) or len(ls) != 3:
            raise ConfigError("'continuation.linspace' must be [start, stop, count]")
        c["linspace"] = [float(ls[0]), float(ls[1]), int(ls[2])]
        if c["linspace"][2] < 1:
            raise ConfigError("'continuation.linspace' count must be at least 1")
    return cfg


def eps_path(cfg):
    c = cfg["continuation"]
    if c["eps_path"] is not None:
        return list(c["eps_path"])
    if c["linspace"] is not None:
        start, stop, num = c["linspace"]
        return [float(x) for x in np.linspace(start, stop, num)]
    raise ConfigError("continuation needs 'continuation.eps_path' or 'continuation.linspace'")


def config_hash(cfg):
    text = json.dumps(sanitize(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def materialized(cfg):
    return {"artifact_version": __version__, "config": sanitize(cfg), "config_hash": config_hash(cfg)}


# JSON helpers

def sanitize(obj):
    """Convert numpy scalars/arrays and non-finite floats into plain JSON values."""
    if isinstance(obj, dict):
        return {str(k): sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return sanitize(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        val = float(obj)
        if math.isnan(val):
            return "nan"
        if math.isinf(val):
            return "inf" if val > 0 else "-inf"
        return val
    if isinstance(obj, complex):
        return [sanitize(obj.real), sanitize(obj.imag)]
    return obj


def atomic_write(path, data):
    """Write ``data`` (bytes or str) to ``path`` via a temporary file and :func:`os.replace`."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data.encode() if isinstance(data, str) else data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj):
    atomic_write(path, json.dumps(sanitize(obj), indent=1, sort_keys=True) + "\n")


# state files

def _state_header(sol, cfg_hash):
    E = sol.splitting
    return {
        "format": "wkam-state",
        "state_version": STATE_VERSION,
        "artifact_version": __version__,
        "config_hash": cfg_hash,
        "eps": sol.eps,
        "mu": sol.mu,
        "omega": list(sol.omega),
        "lift": sol.lift,
        "residual_norm": sol.residual_norm,
        "rates": sol.rates.as_dict() if sol.rates is not None else None,
        "rate_exponents": sol.rates.exponents if sol.rates is not None else None,
        "splitting_dims": list(E.dims) if E is not None else None,
        "history": list(sol.history),
        "verification": sol.verification,
    }


def state_to_json(sol, cfg_hash=None):
    head = _state_header(sol, cfg_hash)
    head["periodic"] = sol.periodic.to_json_dict()
    if sol.splitting is not None:
        head["splitting"] = {
            "reference": sol.splitting.reference.to_json_dict(),
            "graphs": {name: sol.splitting.graphs[name].to_json_dict() for name in GRAPHS},
        }
    return json.dumps(sanitize(head), sort_keys=True) + "\n"


def state_to_bytes(sol, cfg_hash=None):
    head = _state_header(sol, cfg_hash)
    series = [("periodic", sol.periodic)]
    if sol.splitting is not None:
        series.append(("splitting.reference", sol.splitting.reference))
        series += [(f"splitting.graphs.{g}", sol.splitting.graphs[g]) for g in GRAPHS]
    head["series"] = [name for name, _ in series]
    text = json.dumps(sanitize(head), sort_keys=True).encode()
    out = STATE_MAGIC + struct.pack("<BI", STATE_VERSION, len(text)) + text
    return out + b"".join(s.to_bytes() for _, s in series)


def _restore_float(v):
    if isinstance(v, str):
        return float(v)
    return v


def _solution_from(head, series):
    omega = tuple(head["omega"])
    E = None
    if "splitting.reference" in series:
        E = Splitting(series["splitting.reference"], tuple(head["splitting_dims"]),
                      {g: series[f"splitting.graphs.{g}"] for g in GRAPHS}, omega)
    rates = None
    if head.get("rates") is not None:
        r = {k: _restore_float(v) for k, v in head["rates"].items()}
        rates = RateEstimate(r["lambda_minus"], r["lambda_c_minus"], r["lambda_c_plus"], r["lambda_plus"], r["C0"],
                             int(r["J"]), head.get("rate_exponents") or {})
    history = tuple({k: _restore_float(v) for k, v in h.items()} for h in head.get("history", []))
    return TorusSolution(
        periodic=series["periodic"],
        mu=np.asarray(head["mu"], dtype=float),
        omega=omega,
        lift=np.asarray(head["lift"], dtype=float),
        eps=_restore_float(head["eps"]),
        splitting=E,
        rates=rates,
        residual_norm=_restore_float(head["residual_norm"]),
        history=history,
        verification=head.get("verification") or {},
    )


def state_from_json(text):
    head = json.loads(text)
    if head.get("format") != "wkam-state":
        raise ValueError("not a wkam state file")
    series = {"periodic": FourierSeries.from_json_dict(head["periodic"])}
    if "splitting" in head:
        series["splitting.reference"] = FourierSeries.from_json_dict(head["splitting"]["reference"])
        for g in GRAPHS:
            series[f"splitting.graphs.{g}"] = FourierSeries.from_json_dict(head["splitting"]["graphs"][g])
    return _solution_from(head, series), head.get("config_hash")


def state_from_bytes(data):
    if data[:4] != STATE_MAGIC:
        raise ValueError("not a wkam binary state (bad magic)")
    version, n = struct.unpack_from("<BI", data, 4)
    if version != STATE_VERSION:
        raise ValueError(f"unsupported state version {version}")
    offset = 9
    head = json.loads(data[offset:offset + n].decode())
    offset += n
    series = {}
    for name in head["series"]:
        s, used = FourierSeries.from_bytes(data, offset)
        series[name] = s
        offset += used
    return _solution_from(head, series), head.get("config_hash")


def write_state(stem, sol, cfg_hash=None):
    """Write ``<stem>.json`` and ``<stem>.bin``; returns both paths."""
    atomic_write(stem + ".json", state_to_json(sol, cfg_hash))
    atomic_write(stem + ".bin", state_to_bytes(sol, cfg_hash))
    return stem + ".json", stem + ".bin"


def read_state(path):
    """Read a state file in either form (chosen by content)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] == STATE_MAGIC:
        return state_from_bytes(data)
    return state_from_json(data.decode())


# CSV

def fmt(val):
    if isinstance(val, (bool, np.bool_)):
        return "1" if val else "0"
    if isinstance(val, (int, np.integer)):
        return str(int(val))
    val = float(val)
    if math.isnan(val):
        return "nan"
    if math.isinf(val):
        return "inf" if val > 0 else "-inf"
    return repr(val)


def csv_text(columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def solve_rows(sol):
    return [[h[c] for c in SOLVE_COLUMNS] for h in sol.history]


def scan_rows(result):
    rows = []
    for i, im in enumerate(result.im):
        for j, re in enumerate(result.re):
            rows.append([re, im, bool(result.member[i, j]), result.log_margin[i, j]])
    return rows


def scan_header(result):
    return {
        "artifact_version": __version__,
        "spec": result.spec.as_dict(),
        "columns": list(SCAN_COLUMNS),
        "layout": "row-major, rows over im_eps, re_eps fastest",
        "shape": list(result.member.shape),
        "members": int(result.member.sum()),
        "K_probe": result.spec.K_probe,
    }


def scan_to_bytes(result):
    """``b"WKSC"``, version (u8), rows (u32), cols (u32), then re axis, im axis (f64),
    member (u8) and log-margin (f64, IEEE infinities kept), all little-endian."""
    rows, cols = result.member.shape
    out = SCAN_MAGIC + struct.pack("<BII", 1, rows, cols)
    out += result.re.astype("<f8").tobytes() + result.im.astype("<f8").tobytes()
    out += result.member.astype("u1").tobytes() + result.log_margin.astype("<f8").tobytes()
    return out
