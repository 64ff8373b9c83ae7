"""Discrete data of the cohomogeneity-one construction and its endpoint conditions."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping


class Topology(str, enum.Enum):
    SPHERE_BUNDLE = "SphereBundle"
    PROJECTIVE_SPACE = "ProjectiveSpace"

    @classmethod
    def parse(cls, value: "Topology | str") -> "Topology":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "").replace("-", "")
        for member in cls:
            if member.value.lower() == key:
                return member
        if key in ("sphere", "p(l+o)", "bundle"):
            return cls.SPHERE_BUNDLE
        if key in ("cpn", "projective"):
            return cls.PROJECTIVE_SPACE
        raise ValueError(f"unknown topology {value!r}")


class Epsilon(enum.IntEnum):
    """Sign of the scalar curvature of the Kähler–Einstein base."""

    NEGATIVE = -1
    FLAT = 0
    POSITIVE = 1


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str


class BundleSpecError(ValueError):
    """Structured rejection: carries every violated constraint, not just the first."""

    def __init__(self, violations: list[Violation]):
        self.violations = list(violations)
        super().__init__("; ".join(f"{v.kind}: {v.detail}" for v in self.violations))

    @property
    def kinds(self) -> list[str]:
        return [v.kind for v in self.violations]


@dataclass(frozen=True)
class BundleSpec:
    n_complex: int
    epsilon: Epsilon
    k: int
    q: int
    topology: Topology = Topology.SPHERE_BUNDLE
    s: Fraction = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "s", Fraction(2 * self.k, self.q))

    @property
    def m(self) -> int:
        """Real dimension."""
        return 2 * self.n_complex

    @property
    def s_float(self) -> float:
        return float(self.s)

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n_complex,
            "epsilon": int(self.epsilon),
            "k": self.k,
            "q": self.q,
            "s": f"{self.s.numerator}/{self.s.denominator}",
            "topology": self.topology.value,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "BundleSpec":
        return validate_bundle_spec(raw)

    def replace(self, **changes) -> "BundleSpec":
        raw = {"n": self.n_complex, "epsilon": int(self.epsilon), "k": self.k,
               "q": self.q, "topology": self.topology.value}
        raw.update(changes)
        return validate_bundle_spec(raw)


_REQUIRED = ("n", "epsilon", "k", "q")


def _as_int(value: Any) -> int | None:
    if isinstance(value, bool):
        return None
    if isinstance(value, int):
        return value
    try:
        frac = Fraction(str(value).strip())
    except (ValueError, ZeroDivisionError):
        return None
    return int(frac) if frac.denominator == 1 else None


def validate_bundle_spec(raw: Mapping[str, Any]) -> BundleSpec:
    """Validate raw integers/rationals into a :class:`BundleSpec`.

    Accepted keys: ``n`` (or ``n_complex``), ``epsilon``, ``k``, ``q``,
    ``topology`` (default SphereBundle) and an optional ``s`` which must
    equal ``2k/q`` exactly.  All violations are collected before raising.
    """
    raw = dict(raw)
    if "n_complex" in raw and "n" not in raw:
        raw["n"] = raw.pop("n_complex")
    violations: list[Violation] = []
    for key in _REQUIRED:
        if key not in raw or raw[key] is None:
            violations.append(Violation("MissingField", f"{key} is required"))
    if violations:
        raise BundleSpecError(violations)

    n = _as_int(raw["n"])
    if n is None or n < 2:
        violations.append(Violation("BadDimension", f"n_complex must be an integer >= 2, got {raw['n']!r}"))

    eps = _as_int(raw["epsilon"])
    if eps not in (-1, 0, 1):
        violations.append(Violation("BadEpsilon", f"epsilon must be -1, 0 or 1, got {raw['epsilon']!r}"))

    k = _as_int(raw["k"])
    q = _as_int(raw["q"])
    if k is None:
        violations.append(Violation("NonIntegralClass", f"k must be an integer, got {raw['k']!r}"))
    if q is None or q <= 0:
        violations.append(Violation("NonIntegralClass", f"q must be a positive integer, got {raw['q']!r}"))
    if k is not None and q is not None and q > 0 and raw.get("s") is not None:
        try:
            s_given = Fraction(str(raw["s"]).strip())
        except (ValueError, ZeroDivisionError):
            s_given = None
        if s_given != Fraction(2 * k, q):
            violations.append(Violation("NonIntegralClass", f"s={raw['s']} differs from 2k/q={Fraction(2 * k, q)}"))

    try:
        topology = Topology.parse(raw.get("topology", Topology.SPHERE_BUNDLE))
    except ValueError as exc:
        violations.append(Violation("BadTopology", str(exc)))
        topology = None

    if violations:
        raise BundleSpecError(violations)
    return BundleSpec(n_complex=n, epsilon=Epsilon(eps), k=k, q=q, topology=topology)


# --- endpoint conditions -----------------------------------------------------

QUANTITIES = ("f", "fp", "g", "gp")


@dataclass(frozen=True)
class BoundaryCondition:
    """``quantity(endpoint) = target``, a linear functional of (f, f', g, g')."""

    endpoint: str  # "0" or "L"
    quantity: str  # one of QUANTITIES
    target: float

    def __post_init__(self):
        if self.endpoint not in ("0", "L"):
            raise ValueError(f"bad endpoint {self.endpoint!r}")
        if self.quantity not in QUANTITIES:
            raise ValueError(f"bad quantity {self.quantity!r}")

    @property
    def weights(self) -> tuple[float, float, float, float]:
        return tuple(1.0 if q == self.quantity else 0.0 for q in QUANTITIES)

    def label(self) -> str:
        name = {"f": "f", "fp": "f'", "g": "g", "gp": "g'"}[self.quantity]
        return f"{name}({self.endpoint})={self.target:g}"


@dataclass(frozen=True)
class BoundaryConditionSet:
    at_zero: tuple[BoundaryCondition, ...]
    at_L: tuple[BoundaryCondition, ...]
    parity: tuple[tuple[str, str, str], ...]  # (function, endpoint, "odd"|"even")

    def __iter__(self):
        yield from self.at_zero
        yield from self.at_L

    def __len__(self):
        return len(self.at_zero) + len(self.at_L)

    def labels(self) -> list[str]:
        return [bc.label() for bc in self]


def boundary_conditions(spec: BundleSpec) -> BoundaryConditionSet:
    """Endpoint constraints under which the ansatz closes up smoothly."""
    at_zero = (
        BoundaryCondition("0", "f", 0.0),
        BoundaryCondition("0", "fp", 1.0),
        BoundaryCondition("0", "gp", 0.0),
    )
    if spec.topology is Topology.SPHERE_BUNDLE:
        at_L = (
            BoundaryCondition("L", "f", 0.0),
            BoundaryCondition("L", "fp", -1.0),
            BoundaryCondition("L", "gp", 0.0),
        )
        parity = (("f", "0", "odd"), ("f", "L", "odd"), ("g", "0", "even"), ("g", "L", "even"))
    else:
        at_L = (
            BoundaryCondition("L", "f", 0.0),
            BoundaryCondition("L", "fp", -1.0),
            BoundaryCondition("L", "g", 0.0),
            BoundaryCondition("L", "gp", -1.0),
        )
        parity = (("f", "0", "odd"), ("f", "L", "odd"), ("g", "0", "even"), ("g", "L", "odd"))
    return BoundaryConditionSet(at_zero=at_zero, at_L=at_L, parity=parity)


# --- flat key-value config ---------------------------------------------------

SPEC_KEYS = ("n", "epsilon", "k", "q", "topology")


def parse_kv_text(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            key, value = line.split("=", 1)
        elif ":" in line:
            key, value = line.split(":", 1)
        else:
            raise ValueError(f"line {lineno}: expected key = value")
        out[key.strip()] = value.strip()
    return out


def load_spec_config(path: str | Path) -> BundleSpec:
    raw = parse_kv_text(Path(path).read_text())
    return validate_bundle_spec({k: raw[k] for k in SPEC_KEYS if k in raw} | ({"s": raw["s"]} if "s" in raw else {}))


def dump_spec_config(spec: BundleSpec) -> str:
    d = spec.to_dict()
    return "".join(f"{key} = {d[key]}\n" for key in SPEC_KEYS)
