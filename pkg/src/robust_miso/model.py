"""Scenario data model, seeded scenario generation and JSON serialization."""

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

from . import config
from .numerics import as_cmatrix, as_cvector, largest_singular_value

FORMAT_TAG = "robust-miso-scenario/1"


class ScenarioFormatError(ValueError):
    """A scenario file or record violates the schema or a type invariant."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Ellipsoid:
    """Uncertainty region ``{shape @ d : ||d|| <= radius}``."""

    shape: np.ndarray
    radius: float

    def __post_init__(self):
        shape = as_cmatrix(self.shape)
        if shape.shape[0] != shape.shape[1]:
            raise ScenarioFormatError(f"shape must be square, got {shape.shape}")
        radius = float(self.radius)
        if not np.isfinite(radius) or radius < 0:
            raise ScenarioFormatError(f"radius must be finite and >= 0, got {radius}")
        sv = np.linalg.svd(shape, compute_uv=False)
        if sv[0] > 1.0 + config.get().shape_norm:
            raise ScenarioFormatError(
                f"largest singular value of shape is {sv[0]:.6g} > 1")
        if sv[-1] <= config.get().rank_rel * sv[0]:
            raise ScenarioFormatError("shape is rank deficient")
        object.__setattr__(self, "shape", _frozen(shape))
        object.__setattr__(self, "radius", radius)

    @property
    def dim(self) -> int:
        return self.shape.shape[0]

    def contains(self, delta, atol: float = 1e-12) -> bool:
        """Whether an error vector lies in the region."""
        d = np.linalg.solve(self.shape, np.asarray(delta, dtype=complex))
        return bool(np.linalg.norm(d) <= self.radius + atol)

    def __eq__(self, other):
        if not isinstance(other, Ellipsoid):
            return NotImplemented
        return self.radius == other.radius and np.array_equal(self.shape, other.shape)


def spherical_uncertainty(n: int, radius: float) -> Ellipsoid:
    return Ellipsoid(np.eye(n, dtype=complex), radius)


@dataclass(frozen=True, eq=False)
class Link:
    """Transmitter ``k``: its estimates and uncertainty towards every receiver."""

    estimates: Tuple[np.ndarray, ...]
    uncertainty: Tuple[Ellipsoid, ...]
    power_budget: float
    antennas: int

    def __post_init__(self):
        n = int(self.antennas)
        if n < 1:
            raise ScenarioFormatError(f"antennas must be >= 1, got {n}")
        p = float(self.power_budget)
        if not np.isfinite(p) or p <= 0:
            raise ScenarioFormatError(f"power_budget must be > 0, got {p}")
        est = tuple(_frozen(as_cvector(h)) for h in self.estimates)
        unc = tuple(self.uncertainty)
        if len(est) != len(unc):
            raise ScenarioFormatError("estimates and uncertainty differ in length")
        for ell, (h, e) in enumerate(zip(est, unc)):
            if h.shape[0] != n:
                raise ScenarioFormatError(
                    f"estimates[{ell}] has dimension {h.shape[0]}, expected {n}")
            if e.dim != n:
                raise ScenarioFormatError(
                    f"uncertainty[{ell}] has dimension {e.dim}, expected {n}")
        object.__setattr__(self, "estimates", est)
        object.__setattr__(self, "uncertainty", unc)
        object.__setattr__(self, "power_budget", p)
        object.__setattr__(self, "antennas", n)

    def __eq__(self, other):
        if not isinstance(other, Link):
            return NotImplemented
        return (self.antennas == other.antennas
                and self.power_budget == other.power_budget
                and len(self.estimates) == len(other.estimates)
                and all(np.array_equal(a, b) for a, b in zip(self.estimates, other.estimates))
                and self.uncertainty == other.uncertainty)


@dataclass(frozen=True, eq=False)
class Scenario:
    """K-user MISO interference channel as seen by the transmitters.

    ``links[k].estimates[l]`` is the estimate of the channel from transmitter
    ``k`` to receiver ``l`` and ``links[k].uncertainty[l]`` its error region.
    Indices are zero based.
    """

    links: Tuple[Link, ...]
    noise_power: float

    def __post_init__(self):
        links = tuple(self.links)
        if len(links) < 1:
            raise ScenarioFormatError("a scenario needs at least one link")
        for k, link in enumerate(links):
            if len(link.estimates) != len(links):
                raise ScenarioFormatError(
                    f"links[{k}] describes {len(link.estimates)} receivers, expected {len(links)}")
        s2 = float(self.noise_power)
        if not np.isfinite(s2) or s2 <= 0:
            raise ScenarioFormatError(f"noise_power must be > 0, got {s2}")
        object.__setattr__(self, "links", links)
        object.__setattr__(self, "noise_power", s2)

    @property
    def K(self) -> int:
        return len(self.links)

    @property
    def antennas(self) -> List[int]:
        return [link.antennas for link in self.links]

    @property
    def powers(self) -> List[float]:
        return [link.power_budget for link in self.links]

    def estimate(self, k: int, ell: int) -> np.ndarray:
        return self.links[k].estimates[ell]

    def uncertainty(self, k: int, ell: int) -> Ellipsoid:
        return self.links[k].uncertainty[ell]

    def epsilons(self) -> np.ndarray:
        return np.array([[e.radius for e in link.uncertainty] for link in self.links])

    def with_epsilons(self, eps) -> "Scenario":
        """Copy with radii replaced (scalar or K x K)."""
        eps = np.broadcast_to(np.asarray(eps, dtype=float), (self.K, self.K))
        links = tuple(
            Link(link.estimates,
                 tuple(Ellipsoid(u.shape, eps[k, ell]) for ell, u in enumerate(link.uncertainty)),
                 link.power_budget, link.antennas)
            for k, link in enumerate(self.links))
        return Scenario(links, self.noise_power)

    def with_noise_power(self, noise_power: float) -> "Scenario":
        return Scenario(self.links, noise_power)

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_TAG,
            "K": self.K,
            "noise_power": self.noise_power,
            "links": [
                {
                    "antennas": link.antennas,
                    "power_budget": link.power_budget,
                    "estimates": [_encode_vector(h) for h in link.estimates],
                    "ellipsoids": [
                        {"shape": _encode_matrix(u.shape), "radius": u.radius}
                        for u in link.uncertainty
                    ],
                }
                for link in self.links
            ],
        }

    def digest(self) -> str:
        """SHA-256 of the canonical JSON encoding."""
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return self.noise_power == other.noise_power and self.links == other.links


@dataclass(frozen=True, eq=False)
class BeamformerSet:
    """One beamforming vector per transmitter."""

    w: Tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "w", tuple(_frozen(as_cvector(v)) for v in self.w))

    def __len__(self):
        return len(self.w)

    def __getitem__(self, k):
        return self.w[k]

    def check(self, s: Scenario) -> None:
        """Raise ``ValueError`` unless consistent with and feasible for ``s``."""
        if len(self.w) != s.K:
            raise ValueError(f"{len(self.w)} beamformers for {s.K} links")
        tol = config.get().power
        for k, (w, link) in enumerate(zip(self.w, s.links)):
            if w.shape[0] != link.antennas:
                raise ValueError(f"w[{k}] has dimension {w.shape[0]}, expected {link.antennas}")
            pw = float(np.vdot(w, w).real)
            if pw > link.power_budget + tol:
                raise ValueError(f"w[{k}] uses power {pw:.12g} > budget {link.power_budget:.12g}")

    @classmethod
    def zeros(cls, s: Scenario) -> "BeamformerSet":
        return cls(tuple(np.zeros(n, dtype=complex) for n in s.antennas))


# --- random generation -------------------------------------------------------

def complex_gaussian(rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` i.i.d. CN(0, 1) samples by Box-Muller on uniform pairs.

    Each sample consumes two consecutive doubles ``u1, u2`` from
    ``rng.random()``; the sample is ``sqrt(-ln(1 - u1)) * exp(2j*pi*u2)``.
    Its squared modulus is Exp(1) and its phase uniform, so real and
    imaginary parts are independent N(0, 1/2).
    """
    u = rng.random(2 * n)
    r = np.sqrt(-np.log1p(-u[0::2]))
    return r * np.exp(2j * np.pi * u[1::2])


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 stream seeded through ``numpy.random.SeedSequence(seed)``."""
    return np.random.Generator(np.random.PCG64(int(seed)))


def random_shape(rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` CN(0, I) columns, concatenated and scaled to unit spectral norm."""
    cols = [complex_gaussian(rng, n) for _ in range(n)]
    a = np.stack(cols, axis=1)
    return a / largest_singular_value(a)


def generate_scenario(K: int, antennas: Sequence[int], epsilons, powers: Sequence[float],
                      noise_power: float, seed: int) -> Scenario:
    """Draw a scenario with CN(0, I) estimates and random unit-norm shapes.

    Draw order is fixed: for each transmitter ``k`` and receiver ``l`` (both
    ascending) the estimate ``h_kl`` is drawn first, then the columns of the
    shape ``A_kl`` one after another.

    Parameters
    ----------
    K : int
        Number of links.
    antennas, powers : sequence of length K
        Antenna counts and power budgets per transmitter.
    epsilons : float or array_like (K, K)
        Uncertainty radii.
    noise_power : float
        Receiver noise power (``1/SNR`` for unit budgets).
    seed : int
        Seed of the PCG64 stream.
    """
    K = int(K)
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    antennas = [int(n) for n in antennas]
    powers = [float(p) for p in powers]
    if len(antennas) != K or len(powers) != K:
        raise ValueError("antennas and powers must have K entries")
    eps = np.asarray(epsilons, dtype=float)
    if eps.ndim == 0:
        eps = np.full((K, K), float(eps))
    if eps.shape != (K, K):
        raise ValueError(f"epsilons must be scalar or {K}x{K}, got shape {eps.shape}")
    if not np.all(np.isfinite(eps)) or np.any(eps < 0):
        raise ValueError("epsilons must be finite and nonnegative")

    rng = make_rng(seed)
    links = []
    for k in range(K):
        n = antennas[k]
        if n < 1:
            raise ValueError("antenna counts must be >= 1")
        est, unc = [], []
        for ell in range(K):
            est.append(complex_gaussian(rng, n))
            unc.append(Ellipsoid(random_shape(rng, n), eps[k, ell]))
        links.append(Link(tuple(est), tuple(unc), powers[k], n))
    return Scenario(tuple(links), noise_power)


# --- serialization -------------------------------------------------------------

def _encode_vector(v) -> list:
    return [[float(z.real), float(z.imag)] for z in v]


def _encode_matrix(m) -> list:
    return [_encode_vector(row) for row in m]


def _decode_vector(data, where: str) -> np.ndarray:
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioFormatError(f"{where}: not a list of [re, im] pairs") from exc
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ScenarioFormatError(f"{where}: expected a list of [re, im] pairs")
    return arr[:, 0] + 1j * arr[:, 1]


def _decode_matrix(data, where: str) -> np.ndarray:
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioFormatError(f"{where}: not a nested list of [re, im] pairs") from exc
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ScenarioFormatError(f"{where}: expected rows of [re, im] pairs")
    return arr[:, :, 0] + 1j * arr[:, :, 1]


def _field(d: dict, key: str, where: str):
    if not isinstance(d, dict) or key not in d:
        raise ScenarioFormatError(f"{where}.{key}: missing")
    return d[key]


def scenario_from_dict(d: dict) -> Scenario:
    K = _field(d, "K", "scenario")
    if not isinstance(K, int) or K < 1:
        raise ScenarioFormatError(f"scenario.K: must be a positive integer, got {K!r}")
    raw_links = _field(d, "links", "scenario")
    if not isinstance(raw_links, list) or len(raw_links) != K:
        raise ScenarioFormatError(f"scenario.links: expected {K} entries")
    links = []
    for k, raw in enumerate(raw_links):
        where = f"links[{k}]"
        est_raw = _field(raw, "estimates", where)
        ell_raw = _field(raw, "ellipsoids", where)
        if len(est_raw) != K or len(ell_raw) != K:
            raise ScenarioFormatError(f"{where}: expected {K} estimates and ellipsoids")
        est = [_decode_vector(v, f"{where}.estimates[{ell}]") for ell, v in enumerate(est_raw)]
        unc = []
        for ell, e in enumerate(ell_raw):
            w = f"{where}.ellipsoids[{ell}]"
            shape = _decode_matrix(_field(e, "shape", w), f"{w}.shape")
            radius = _field(e, "radius", w)
            try:
                unc.append(Ellipsoid(shape, radius))
            except (ScenarioFormatError, ValueError, TypeError) as exc:
                raise ScenarioFormatError(f"{w}: {exc}") from exc
        try:
            links.append(Link(tuple(est), tuple(unc), _field(raw, "power_budget", where),
                              _field(raw, "antennas", where)))
        except (ScenarioFormatError, ValueError, TypeError) as exc:
            raise ScenarioFormatError(f"{where}: {exc}") from exc
    try:
        return Scenario(tuple(links), _field(d, "noise_power", "scenario"))
    except (ValueError, TypeError) as exc:
        raise ScenarioFormatError(f"scenario.noise_power: {exc}") from exc


def save_scenario(s: Scenario, path) -> None:
    Path(path).write_text(json.dumps(s.to_dict(), indent=1) + "\n")


def load_scenario(path) -> Scenario:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError(f"{path}: not valid JSON ({exc})") from exc
    return scenario_from_dict(data)
