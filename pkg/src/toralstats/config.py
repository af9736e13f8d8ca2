"""Run configuration: TOML schema, defaults, validation, and hashing.

Every numeric default lives in the DEFAULTS table below so a run is
auditable from its metadata alone.  A config round-trips: `to_json_dict`
emits exactly the fields that `from_mapping` consumes, and the SHA-256
hash of the canonical JSON form identifies the run.

TOML schema (all sections optional, defaults fill the gaps)::

    [generators]
    a0 = [[1, 1], [2, 3]]
    a1 = [[1, 1], [1, 2]]

    [observable]
    # term = re * cos(2 pi <k, x>) + im * sin(2 pi <k, x>)
    terms = [{k = [1, 0], re = 1.0, im = 0.0}]

    [params]
    wp = 0.5
    p = 1.0
    q = 3.0
    N = 4096
    M = 20000
    L = 0.2
    k_max = 8
    tol = 1e-10
    depth_cap = 64
    lambda_grid = [0.5, 1.0, 2.0]
    wp_grid = [0.0, 0.25, 0.5, 0.75, 1.0]
    seeds = [1, 2, 3]
    admissible = [0, 1]
    output = "run"
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Mapping, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .lattice import GeneratorPair, IntMatrix, hyperbolicity_constants
from .observable import TrigPoly

# The versioned defaults table.  q is the smallest integer with
# Lambda**p < lambda**(p + q) for the default generator pair (p = 1:
# lambda**4 = 4 > Lambda ~ 3.8643 while lambda**3 < Lambda).
DEFAULTS: dict[str, Any] = {
    "a0": ((1, 1), (2, 3)),
    "a1": ((1, 1), (1, 2)),
    "terms": ({"k": (1, 0), "re": 1.0, "im": 0.0},),
    "wp": 0.5,
    "p": 1.0,
    "q": 3.0,
    "N": 4096,
    "M": 20000,
    "L": 0.2,
    "k_max": 8,
    "tol": 1e-10,
    "depth_cap": 64,
    "lambda_grid": (0.5, 1.0, 2.0),
    "wp_grid": (0.0, 0.25, 0.5, 0.75, 1.0),
    "seeds": tuple(range(1, 21)),
    "admissible": (0, 1),
    "output": "run",
}


class ConfigError(ValueError):
    """Invalid configuration; the message lists every failed condition."""


@dataclass(frozen=True)
class ObservableTerm:
    """One summand re * cos(2 pi <k, x>) + im * sin(2 pi <k, x>)."""

    k: tuple[int, int]
    re: float
    im: float


@dataclass(frozen=True)
class RunConfig:
    generators: GeneratorPair
    terms: tuple[ObservableTerm, ...]
    wp: float
    p: float
    q: float
    n_steps: int
    n_samples: int
    l_threshold: float
    k_max: int
    tol: float
    depth_cap: int
    lambda_grid: tuple[float, ...]
    wp_grid: tuple[float, ...]
    seeds: tuple[int, ...]
    admissible: tuple[int, ...]
    output: str

    def observable(self, allow_mean: bool = False) -> TrigPoly:
        """Build the observable, symmetrized so it is real.

        Terms with im = 0 everywhere produce a rational-mode polynomial
        (floats are exact binary rationals), so anchor configs stay exact
        end to end.

        Args:
            allow_mean: accept a nonzero coefficient at k = 0.  Commands
                whose math needs m(f) = 0 leave this False.
        """
        rational = all(t.im == 0.0 for t in self.terms)
        f = TrigPoly.zero(dim=1)
        for t in self.terms:
            if t.re:
                amp = Fraction(t.re) if rational else t.re
                f = f + TrigPoly.cosine(t.k, amp)
            if t.im:
                f = f + TrigPoly.sine(t.k, t.im)
        mean = f.mean
        if mean != 0 and not allow_mean:
            raise ConfigError(
                f"observable has nonzero mean {mean}; this command needs "
                "m(f) = 0 (drop the k = [0, 0] term)")
        return f

    def warnings(self) -> tuple[str, ...]:
        out = []
        cones = hyperbolicity_constants(self.generators)
        if not cones.lam_max**self.p < cones.lam_min**(self.p + self.q):
            out.append(
                f"norm gap violated: Lambda**p = {cones.lam_max**self.p:.6g}"
                f" >= lambda**(p+q) = {cones.lam_min**(self.p + self.q):.6g};"
                " raise q")
        return tuple(out)

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "a0": [list(r) for r in self.generators.m0.rows],
            "a1": [list(r) for r in self.generators.m1.rows],
            "terms": [{"k": list(t.k), "re": t.re, "im": t.im}
                      for t in self.terms],
            "wp": self.wp,
            "p": self.p,
            "q": self.q,
            "N": self.n_steps,
            "M": self.n_samples,
            "L": self.l_threshold,
            "k_max": self.k_max,
            "tol": self.tol,
            "depth_cap": self.depth_cap,
            "lambda_grid": list(self.lambda_grid),
            "wp_grid": list(self.wp_grid),
            "seeds": list(self.seeds),
            "admissible": list(self.admissible),
            "output": self.output,
        }

    def config_hash(self) -> str:
        """SHA-256 over the canonical JSON form, minus the output prefix.

        The prefix only says where files go; two runs that compute the
        same thing hash the same.
        """
        fields = self.to_json_dict()
        del fields["output"]
        payload = json.dumps(fields, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()


def _as_matrix(raw: Any, name: str, failures: list[str]) -> IntMatrix:
    try:
        (a, b), (c, d) = raw
        return IntMatrix(((int(a), int(b)), (int(c), int(d))))
    except (TypeError, ValueError):
        failures.append(f"{name} must be a 2x2 integer matrix, got {raw!r}")
        return IntMatrix.identity()


def _as_terms(raw: Any, failures: list[str]) -> tuple[ObservableTerm, ...]:
    terms = []
    try:
        for entry in raw:
            k = entry["k"]
            k = (int(k[0]), int(k[1]))
            terms.append(ObservableTerm(k=k,
                                        re=float(entry.get("re", 0.0)),
                                        im=float(entry.get("im", 0.0))))
    except (TypeError, KeyError, ValueError, IndexError):
        failures.append(f"observable terms must be "
                        f"{{k = [k1, k2], re = ..., im = ...}}, got {raw!r}")
    return tuple(terms)


def from_mapping(raw: Mapping[str, Any]) -> RunConfig:
    """Build and validate a RunConfig from a flat mapping over DEFAULTS keys.

    Raises:
        ConfigError: listing every failed validation at once.
    """
    unknown = set(raw) - set(DEFAULTS)
    failures: list[str] = []
    if unknown:
        failures.append(f"unknown config keys: {sorted(unknown)}")
    merged = {**DEFAULTS, **{k: v for k, v in raw.items() if k in DEFAULTS}}

    matrix_failures: list[str] = []
    m0 = _as_matrix(merged["a0"], "a0", matrix_failures)
    m1 = _as_matrix(merged["a1"], "a1", matrix_failures)
    failures.extend(matrix_failures)
    gens = None
    if not matrix_failures:
        try:
            gens = GeneratorPair.of(m0, m1)
        except ValueError as err:
            failures.append(str(err))
    terms = _as_terms(merged["terms"], failures)

    wp = float(merged["wp"])
    if not 0.0 <= wp <= 1.0:
        failures.append(f"wp must lie in [0, 1], got {wp}")
    n_steps = int(merged["N"])
    if n_steps < 1:
        failures.append(f"N must be >= 1, got {n_steps}")
    n_samples = int(merged["M"])
    if n_samples < 1:
        failures.append(f"M must be >= 1, got {n_samples}")
    l_threshold = float(merged["L"])
    if l_threshold <= 0:
        failures.append(f"L must be > 0, got {l_threshold}")
    k_max = int(merged["k_max"])
    if k_max < 1:
        failures.append(f"k_max must be >= 1, got {k_max}")
    tol = float(merged["tol"])
    if tol <= 0:
        failures.append(f"tol must be > 0, got {tol}")
    depth_cap = int(merged["depth_cap"])
    if depth_cap < 1:
        failures.append(f"depth_cap must be >= 1, got {depth_cap}")
    p = float(merged["p"])
    q = float(merged["q"])
    if p < 0 or q <= 0 or p + q < 1:
        failures.append(f"need p >= 0, q > 0, p + q >= 1, got p={p}, q={q}")
    lambda_grid = tuple(float(v) for v in merged["lambda_grid"])
    wp_grid = tuple(float(v) for v in merged["wp_grid"])
    if any(not 0.0 <= v <= 1.0 for v in wp_grid):
        failures.append(f"wp_grid values must lie in [0, 1], got {wp_grid}")
    seeds = tuple(int(s) for s in merged["seeds"])
    if not seeds:
        failures.append("seeds must be nonempty")
    if any(not 0 <= s < 1 << 64 for s in seeds):
        failures.append("seeds must be 64-bit unsigned integers")
    admissible = tuple(sorted({int(s) for s in merged["admissible"]}))
    if not admissible or any(s not in (0, 1) for s in admissible):
        failures.append(
            f"admissible must be a nonempty subset of {{0, 1}}, "
            f"got {merged['admissible']!r}")

    if failures:
        raise ConfigError("invalid config: " + "; ".join(failures))
    assert gens is not None
    return RunConfig(generators=gens, terms=terms, wp=wp, p=p, q=q,
                     n_steps=n_steps, n_samples=n_samples,
                     l_threshold=l_threshold, k_max=k_max, tol=tol,
                     depth_cap=depth_cap, lambda_grid=lambda_grid,
                     wp_grid=wp_grid, seeds=seeds, admissible=admissible,
                     output=str(merged["output"]))


def _flatten_toml(doc: Mapping[str, Any]) -> dict[str, Any]:
    flat: dict[str, Any] = {}
    gen = doc.get("generators", {})
    if "a0" in gen:
        flat["a0"] = gen["a0"]
    if "a1" in gen:
        flat["a1"] = gen["a1"]
    obs = doc.get("observable", {})
    if "terms" in obs:
        flat["terms"] = obs["terms"]
    flat.update(doc.get("params", {}))
    extra = set(doc) - {"generators", "observable", "params"}
    if extra:
        raise ConfigError(f"unknown config sections: {sorted(extra)}")
    return flat


def from_toml(path: str) -> RunConfig:
    """Parse and validate a TOML config file."""
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"config {path} is not valid TOML: {err}") from err
    return from_mapping(_flatten_toml(doc))


def from_json_dict(raw: Mapping[str, Any]) -> RunConfig:
    """Rebuild a RunConfig from to_json_dict output (metadata round-trip)."""
    return from_mapping(dict(raw))


def default_config() -> RunConfig:
    return from_mapping({})
