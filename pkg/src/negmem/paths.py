"""Exact sampling of stationary Gaussian increments and their price paths.

Three exact samplers are available:

``"circulant"``
    Davies-Harte circulant embedding of ``r(0..T)`` into a circulant of
    size ``2T``, diagonalised by FFT.  ``O(T log T)`` per path.
``"durbin-levinson"``
    Sequential one-step prediction (Hosking).  ``O(T^2)`` per path, works
    for any positive definite Toeplitz covariance.
``"cholesky"``
    Dense Cholesky factor of the Toeplitz matrix.  ``O(T^3)`` setup, capped.

Each path ``i`` draws its normals from its own generator seeded by
``SeedSequence(master_seed, spawn_key=(i,))``, so a batch is a pure function
of ``(model, T, master_seed, path index)`` whatever the block size or the
number of worker threads.
"""
from __future__ import annotations

import csv
import io
import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.fft
import scipy.linalg

from .covariance import CovarianceModel

__all__ = [
    "PathBatch",
    "PathSampler",
    "RNG_ALGORITHM",
    "SAMPLERS",
    "SpectrumDiagnostic",
    "SpectrumError",
    "derive_seed",
    "path_generator",
    "sample_paths",
    "spectrum_check",
]

SAMPLERS = ("circulant", "durbin-levinson", "cholesky")
RNG_ALGORITHM = (
    "numpy PCG64, per-path SeedSequence(master_seed, spawn_key=(path_index,)); "
    "normals from Generator.standard_normal (ziggurat)"
)
CLIP_TOLERANCE = 1e-8
CHOLESKY_MAX_T = 2048
DURBIN_LEVINSON_MAX_T = 8192
BLOCK_SIZE = 256

_MAGIC = b"NEGMEMPB"
_VERSION = 1


class SpectrumError(RuntimeError):
    """Circulant embedding has eigenvalues below the clipping tolerance."""

    def __init__(self, diagnostic: SpectrumDiagnostic):
        self.diagnostic = diagnostic
        super().__init__(
            f"circulant embedding of size {diagnostic.embedding_size} is not "
            f"nonnegative: min eigenvalue {diagnostic.min_eigenvalue:.3e}"
        )


@dataclass(frozen=True)
class SpectrumDiagnostic:
    embedding_size: int
    min_eigenvalue: float
    clipped_mass: float
    accepted: bool

    def to_dict(self) -> dict:
        return {
            "embedding_size": self.embedding_size,
            "min_eigenvalue": self.min_eigenvalue,
            "clipped_mass": self.clipped_mass,
            "accepted": self.accepted,
        }


def _circulant_row(model: CovarianceModel, T: int) -> np.ndarray:
    r = model.sequence(T)
    return np.concatenate([r, r[-2:0:-1]])


def _circulant_eigenvalues(model: CovarianceModel, T: int):
    eig = scipy.fft.fft(_circulant_row(model, T)).real
    tol = CLIP_TOLERANCE * model.variance_scale
    lo = float(eig.min())
    small = (eig < 0) & (eig >= -tol)
    diag = SpectrumDiagnostic(
        embedding_size=int(eig.size),
        min_eigenvalue=lo,
        clipped_mass=float(np.abs(eig[small]).sum()),
        accepted=lo >= -tol,
    )
    return eig, diag


def spectrum_check(model: CovarianceModel, T: int) -> SpectrumDiagnostic:
    """Minimum eigenvalue of the circulant extension of ``r(0), ..., r(T)``.

    Negative eigenvalues are reported in the diagnostic, never raised.
    """
    if T < 1:
        raise ValueError("T must be positive")
    return _circulant_eigenvalues(model, T)[1]


def derive_seed(master_seed: int, *keys: int) -> int:
    """A 64-bit seed mixed from ``master_seed`` and integer ``keys``."""
    ss = np.random.SeedSequence(_check_seed(master_seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"master_seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def path_generator(master_seed: int, index: int) -> np.random.Generator:
    """Generator owning the normals of path ``index``."""
    ss = np.random.SeedSequence(_check_seed(master_seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.PCG64(ss))


def _durbin_levinson(r: np.ndarray):
    """Prediction coefficients and innovation variances for ``r(0..T-1)``.

    Returns ``(coefs, v)`` where ``coefs[t]`` holds ``phi_{t,1..t}`` and
    ``v[t]`` is the one-step prediction variance of ``Z_t`` given its past.
    """
    T = r.size
    v = np.empty(T)
    v[0] = r[0]
    coefs = [np.empty(0)]
    phi = np.empty(0)
    for n in range(1, T):
        k = (r[n] - phi @ r[n - 1 : 0 : -1]) / v[n - 1] if n > 1 else r[1] / r[0]
        phi = np.concatenate([phi - k * phi[::-1], [k]])
        v[n] = v[n - 1] * (1.0 - k * k)
        if not v[n] > 0:
            raise ValueError(f"covariance is not positive definite at order {n}")
        coefs.append(phi)
    return coefs, v


class PathSampler:
    """Prepared sampler for horizon ``T``; draws blocks of paths by index.

    Construction does the per-model work once (FFT of the embedding, the
    Durbin-Levinson recursion or the Cholesky factor).  With
    ``allow_fallback`` a circulant embedding that is not nonnegative falls
    back to Durbin-Levinson instead of raising :class:`SpectrumError`.
    """

    def __init__(
        self,
        model: CovarianceModel,
        T: int,
        sampler: str = "circulant",
        allow_fallback: bool = False,
        cholesky_max_t: int = CHOLESKY_MAX_T,
    ):
        if T < 1:
            raise ValueError("T must be positive")
        if sampler not in SAMPLERS:
            raise ValueError(f"unknown sampler {sampler!r}; choose from {SAMPLERS}")
        self.model = model
        self.T = int(T)
        self.diagnostic = None

        if sampler == "circulant":
            eig, diag = _circulant_eigenvalues(model, self.T)
            self.diagnostic = diag
            if not diag.accepted:
                if not allow_fallback:
                    raise SpectrumError(diag)
                sampler = "durbin-levinson"
            else:
                self._amp = np.sqrt(np.clip(eig, 0.0, None) / eig.size)
        self.sampler = sampler

        if sampler == "durbin-levinson":
            if self.T > DURBIN_LEVINSON_MAX_T:
                raise ValueError(f"durbin-levinson is capped at T <= {DURBIN_LEVINSON_MAX_T}")
            self._coefs, v = _durbin_levinson(model.sequence(self.T - 1))
            self._sd = np.sqrt(v)
        elif sampler == "cholesky":
            if self.T > cholesky_max_t:
                raise ValueError(f"cholesky sampler is capped at T <= {cholesky_max_t}, got {self.T}")
            cov = scipy.linalg.toeplitz(model.sequence(self.T - 1))
            self._chol = scipy.linalg.cholesky(cov, lower=True)

    @property
    def draws_per_path(self) -> int:
        return 4 * self.T if self.sampler == "circulant" else self.T

    def _normals(self, master_seed: int, start: int, stop: int) -> np.ndarray:
        k = self.draws_per_path
        out = np.empty((stop - start, k))
        for row, i in enumerate(range(start, stop)):
            path_generator(master_seed, i).standard_normal(out=out[row])
        return out

    def increments(self, master_seed: int, start: int, stop: int) -> np.ndarray:
        """Increments ``Z`` of paths ``start .. stop-1`` as a ``(stop-start, T)`` array."""
        g = self._normals(master_seed, start, stop)
        T = self.T
        if self.sampler == "circulant":
            n = 2 * T
            w = self._amp * (g[:, :n] + 1j * g[:, n:])
            return np.ascontiguousarray(scipy.fft.fft(w, axis=1).real[:, :T])
        if self.sampler == "cholesky":
            return g @ self._chol.T
        z = np.empty_like(g)
        z[:, 0] = self._sd[0] * g[:, 0]
        for t in range(1, T):
            z[:, t] = z[:, t - 1 :: -1] @ self._coefs[t] + self._sd[t] * g[:, t]
        return z

    def blocks(self, n_paths: int, block: int = BLOCK_SIZE):
        """Path-index ranges of fixed size; independent of worker count."""
        return [(a, min(a + block, n_paths)) for a in range(0, n_paths, block)]


def prices_from_increments(Z: np.ndarray) -> np.ndarray:
    """``S`` with ``S_0 = 0`` and ``S_t = S_{t-1} + Z_t`` along the last axis."""
    S = np.zeros(Z.shape[:-1] + (Z.shape[-1] + 1,))
    np.cumsum(Z, axis=-1, out=S[..., 1:])
    return S


@dataclass(eq=False)
class PathBatch:
    """A batch of sampled increment and price paths.

    ``Z[i, t-1]`` is the increment ``Z_t`` (``t = 1..T``) of path ``i`` and
    ``S[i, t]`` the price ``S_t`` (``t = 0..T``).
    """

    T: int
    n_paths: int
    Z: np.ndarray
    S: np.ndarray
    master_seed: int
    sampler: str
    model: dict
    rng_algorithm: str = RNG_ALGORITHM

    def header(self) -> dict:
        return {
            "model": self.model,
            "T": self.T,
            "n_paths": self.n_paths,
            "seed": self.master_seed,
            "sampler": self.sampler,
            "rng_algorithm": self.rng_algorithm,
            "dtype": "<f8",
            "layout": "columnar: Z[:, t] for t=1..T, then S[:, t] for t=0..T",
        }

    def save(self, path) -> None:
        """Binary columnar file: magic, version, JSON header, then column data."""
        head = json.dumps(self.header(), sort_keys=True).encode()
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<II", _VERSION, len(head)))
            fh.write(head)
            fh.write(np.asfortranarray(self.Z, dtype="<f8").tobytes(order="F"))
            fh.write(np.asfortranarray(self.S, dtype="<f8").tobytes(order="F"))

    @classmethod
    def load(cls, path) -> PathBatch:
        data = Path(path).read_bytes()
        if data[:8] != _MAGIC:
            raise ValueError(f"{path}: not a path batch file")
        version, hlen = struct.unpack_from("<II", data, 8)
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        off = 16 + hlen
        h = json.loads(data[16:off])
        n, T = h["n_paths"], h["T"]
        z = np.frombuffer(data, dtype="<f8", count=n * T, offset=off)
        s = np.frombuffer(data, dtype="<f8", count=n * (T + 1), offset=off + 8 * n * T)
        return cls(
            T=T,
            n_paths=n,
            Z=np.array(z.reshape((n, T), order="F"), order="C"),
            S=np.array(s.reshape((n, T + 1), order="F"), order="C"),
            master_seed=h["seed"],
            sampler=h["sampler"],
            model=h["model"],
            rng_algorithm=h["rng_algorithm"],
        )

    def to_csv(self, path=None, max_rows: int = 1_000_000) -> str | None:
        """One row per (path, t); ``Z`` is blank at ``t = 0``."""
        rows = self.n_paths * (self.T + 1)
        if rows > max_rows:
            raise ValueError(f"batch has {rows} rows; CSV export is limited to {max_rows}")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["path", "t", "Z", "S"])
        for i in range(self.n_paths):
            w.writerow([i, 0, "", repr(float(self.S[i, 0]))])
            for t in range(1, self.T + 1):
                w.writerow([i, t, repr(float(self.Z[i, t - 1])), repr(float(self.S[i, t]))])
        if path is None:
            return buf.getvalue()
        Path(path).write_text(buf.getvalue())
        return None


def sample_paths(
    model: CovarianceModel,
    T: int,
    n_paths: int,
    master_seed: int,
    sampler: str = "circulant",
    allow_fallback: bool = False,
    workers: int = 1,
) -> PathBatch:
    """Sample ``n_paths`` exact Gaussian paths of length ``T``."""
    if n_paths < 1:
        raise ValueError("n_paths must be positive")
    ps = PathSampler(model, T, sampler, allow_fallback=allow_fallback)
    Z = np.empty((n_paths, T))

    def fill(rng):
        a, b = rng
        Z[a:b] = ps.increments(master_seed, a, b)

    blocks = ps.blocks(n_paths)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            list(ex.map(fill, blocks))
    else:
        for b in blocks:
            fill(b)
    return PathBatch(
        T=int(T),
        n_paths=int(n_paths),
        Z=Z,
        S=prices_from_increments(Z),
        master_seed=int(master_seed),
        sampler=ps.sampler,
        model=model.describe(),
    )
