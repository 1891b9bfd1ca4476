"""Run configuration, corrector cache and result files.

Cache layout (all integers little-endian)::

    magic      5 bytes  b"KFPC1"
    version    u8
    dim        u8
    nx, nv     u16, u16
    config     32 bytes sha256 of the canonical config
    order      u16
    n_fields   u16
    fields     n_fields x (alpha: dim x u8, residual: f64,
                           coefficients: (re, im) f64 pairs, k-major / n-minor)
    n_tensors  u16
    tensors    n_tensors x (alpha: dim x u8, value: f64)
    checksum   8 bytes blake2b of everything above
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import struct
import tempfile
from dataclasses import asdict, dataclass, field, fields
from importlib import metadata
from pathlib import Path

import numpy as np

from .cells import CorrectorSet, multi_indices
from .spectral import FrictionMatrix, PhaseField, Potential, assemble_operator, fourier_basis, hermite_basis

log = logging.getLogger(__name__)

MAGIC = b"KFPC1"
VERSION = 1
_HEAD = struct.Struct("<5sBBHH32sHH")


class CacheInvalid(ValueError):
    """The cache file is corrupt, truncated, or belongs to a different config."""


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- configuration


@dataclass
class RunConfig:
    """Plain key-value run description (JSON on disk).

    ``potential`` is a list of ``[k, amplitude]`` or ``[k, cos, sin]`` entries
    with integer wave vectors ``k``; ``friction`` is a constant matrix.
    """

    dim: int = 1
    potential: list = field(default_factory=list)
    friction: list | None = None
    cuts: list = field(default_factory=lambda: [12, 32])
    tol: float = 1e-10
    order: int = 2
    n_traj: int = 100_000
    T: float = 50.0
    dt: float | None = None
    seed: int = 0
    times: list = field(default_factory=lambda: [8.0, 16.0, 32.0, 64.0])
    t0s: list = field(default_factory=lambda: [0.0, 4.0])
    m: list = field(default_factory=lambda: [0, 1, 2])
    R: int = 256
    experiments: list = field(default_factory=list)
    out: str = "results"

    def __post_init__(self):
        self.dim = int(self.dim)
        if self.dim < 1:
            raise ConfigError("dim must be >= 1")
        if self.friction is None:
            self.friction = np.eye(self.dim).tolist()
        self.potential = [self._mode(m) for m in self.potential]
        self.friction = [[float(x) for x in row] for row in self.friction]
        self.cuts = [int(c) for c in self.cuts]
        if len(self.cuts) != 2 or min(self.cuts) < 1:
            raise ConfigError("cuts must be [nx, nv] with positive entries")
        if self.n_traj <= 0 or self.T <= 0 or self.order < 1 or self.R <= 0:
            raise ConfigError("budgets must be positive")
        self.times = [float(t) for t in self.times]
        self.t0s = [float(t) for t in self.t0s]
        self.m = [int(m) for m in self.m]
        # physical checks run at load
        self.potential_obj()
        self.friction_obj()
        if self.potential_obj().bandwidth > self.cuts[0]:
            raise ConfigError("nx is smaller than the potential bandwidth")

    def _mode(self, entry):
        if isinstance(entry, dict):
            entry = [entry["k"], entry.get("cos", entry.get("amplitude", 0.0)), entry.get("sin", 0.0)]
        if len(entry) not in (2, 3):
            raise ConfigError(f"bad potential entry {entry!r}")
        k = [int(x) for x in np.atleast_1d(entry[0])]
        if len(k) != self.dim:
            raise ConfigError(f"wave vector {k} does not have dimension {self.dim}")
        amps = []
        for c in entry[1:]:
            if isinstance(c, complex) or isinstance(c, str):
                raise ConfigError("potential amplitudes must be real numbers")
            amps.append(float(c))
        if not all(np.isfinite(amps)):
            raise ConfigError("potential amplitudes must be finite")
        return [k] + amps + [0.0] * (3 - len(entry))

    def potential_obj(self) -> Potential:
        if not self.potential:
            return Potential.zero(self.dim)
        return Potential(self.dim, tuple((tuple(k), c, s) for k, c, s in self.potential))

    def friction_obj(self) -> FrictionMatrix:
        A = np.asarray(self.friction, float)
        if A.shape != (self.dim, self.dim):
            raise ConfigError("friction must be a dim x dim matrix")
        try:
            return FrictionMatrix(tuple(map(tuple, A)))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "RunConfig":
        if path is None:
            return cls()
        text = Path(path).read_text()
        return cls.from_dict(json.loads(text) if text.strip() else {})

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    def corrector_key(self) -> dict:
        return {"dim": self.dim, "potential": self.potential, "friction": self.friction,
                "cuts": self.cuts, "tol": self.tol}

    def hash(self, part: dict | None = None) -> bytes:
        blob = json.dumps(self.to_dict() if part is None else part, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).digest()


# ---------------------------------------------------------------- cache


def cache_dir(default=None) -> Path:
    d = os.environ.get("KFP_CACHE_DIR") or default or Path.home() / ".cache" / "kfphom"
    return Path(d)


def cache_path(cfg: RunConfig, order: int, directory=None) -> Path:
    tag = cfg.hash(cfg.corrector_key()).hex()[:16]
    return cache_dir(directory) / f"correctors-{tag}-o{order}.kfpc"


def atomic_write(path, data: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _checksum(data: bytes) -> bytes:
    return hashlib.blake2b(data, digest_size=8).digest()


def encode_correctors(cset: CorrectorSet, config_hash: bytes) -> bytes:
    d = cset.dim
    nx, nv = cset.cuts
    alphas = [a for k in range(1, cset.order + 1) for a in multi_indices(d, k)]
    parts = [_HEAD.pack(MAGIC, VERSION, d, nx, nv, config_hash, cset.order, len(alphas))]
    for a in alphas:
        parts.append(bytes(a))
        parts.append(struct.pack("<d", float(cset.residuals.get(a, 0.0))))
        c = np.ascontiguousarray(cset.phi[a].coeffs, dtype="<c16")
        parts.append(c.view("<f8").tobytes())
    tens = [a for k in range(cset.order + 1) for a in multi_indices(d, k)]
    parts.append(struct.pack("<H", len(tens)))
    for a in tens:
        parts.append(bytes(a) + struct.pack("<d", float(cset.abar_alpha[a])))
    body = b"".join(parts)
    return body + _checksum(body)


def decode_correctors(blob: bytes, pot: Potential, a: FrictionMatrix, *, config_hash: bytes | None = None,
                      tol: float = 0.0) -> CorrectorSet:
    if len(blob) < _HEAD.size + 8:
        raise CacheInvalid("file too short")
    body, tail = blob[:-8], blob[-8:]
    if _checksum(body) != tail:
        raise CacheInvalid("checksum mismatch")
    magic, version, d, nx, nv, h, order, nfields = _HEAD.unpack_from(body, 0)
    if magic != MAGIC:
        raise CacheInvalid("bad magic")
    if version != VERSION:
        raise CacheInvalid(f"unsupported cache version {version}")
    if d != pot.dim or d != a.dim:
        raise CacheInvalid("dimension mismatch")
    if config_hash is not None and h != config_hash:
        raise CacheInvalid("config hash mismatch")
    nk, nn = fourier_basis(d, nx).size, hermite_basis(d, nv).size
    pos = _HEAD.size
    phi = {(0,) * d: PhaseField.constant(d, nx, nv)}
    residuals = {}
    try:
        for _ in range(nfields):
            alpha = tuple(body[pos:pos + d])
            pos += d
            (res,) = struct.unpack_from("<d", body, pos)
            pos += 8
            n = 2 * nk * nn
            arr = np.frombuffer(body, dtype="<f8", count=n, offset=pos)
            pos += 8 * n
            phi[alpha] = PhaseField(d, nx, nv, arr.view("<c16").reshape(nk, nn).astype(complex))
            residuals[alpha] = res
        (nt,) = struct.unpack_from("<H", body, pos)
        pos += 2
        abar = {}
        for _ in range(nt):
            alpha = tuple(body[pos:pos + d])
            (val,) = struct.unpack_from("<d", body, pos + d)
            abar[alpha] = val
            pos += d + 8
    except (struct.error, ValueError) as exc:
        raise CacheInvalid(f"truncated cache: {exc}") from exc
    if pos != len(body):
        raise CacheInvalid("trailing bytes in cache")
    opr = assemble_operator(pot, a, (nx, nv))
    return CorrectorSet(pot, a, (nx, nv), order, tol, phi, abar, residuals, opr)


def save_correctors(path, cset: CorrectorSet, config_hash: bytes):
    atomic_write(path, encode_correctors(cset, config_hash))


def load_correctors(path, pot: Potential, a: FrictionMatrix, *, config_hash: bytes | None = None,
                    tol: float = 0.0) -> CorrectorSet:
    return decode_correctors(Path(path).read_bytes(), pot, a, config_hash=config_hash, tol=tol)


# ---------------------------------------------------------------- tables


def versions() -> dict:
    from . import __version__

    out = {"kfphom": __version__}
    for pkg in ("numpy", "scipy", "numba", "click", "gmpy2"):
        out[pkg] = metadata.version(pkg)
    return out


def write_table(path, header, rows, meta: dict):
    """CSV plus a ``.json`` sidecar with the metadata."""
    path = Path(path)
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(_fmt(x) for x in r))
    atomic_write(path, ("\n".join(lines) + "\n").encode())
    atomic_write(path.with_suffix(".json"), (json.dumps(meta, indent=2, sort_keys=True) + "\n").encode())


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)
