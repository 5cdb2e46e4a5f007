"""
Scenario files: one JSON document per experiment, validated through
``ScenarioForm`` before anything is computed.
"""

import copy
import hashlib
import json
import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from django.conf import settings
from django.core.exceptions import ValidationError

from dynamics.hamiltonian import HamiltonianSpec
from hierarchy.correlations import CorrelationFamily, InitialDatum
from tensorcore.operators import LabeledOperator

from .forms import ScenarioForm

logger = logging.getLogger(__name__)

FIXTURE_DIR = Path(__file__).resolve().parent / "fixtures"

DEFAULT_TOLERANCES = {
    "identity": 1e-12,
    "inverse": 1e-10,
    "kce": 1e-9,
    "printed": 1e-11,
    "closed": 1e-10,
    "initial": 1e-12,
    "hierarchy": 1e-6,
    "defect": 1e-8,
    "trace": 1e-10,
    "hermitian": 1e-10,
    "mass": 1e-12,
    "phase": 1e-8,
    "energy": 1e-8,
    "ratio": 0.2,
}


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    experiment: str
    seed: int
    raw: dict = field(repr=False)
    dim: int = None
    kinetic: np.ndarray = field(default=None, repr=False)
    potential: np.ndarray = field(default=None, repr=False)
    epsilon: float = 1.0
    correlation_operators: dict = field(default_factory=dict, repr=False)
    one_particle: np.ndarray = field(default=None, repr=False)
    n_max: int = None
    s_max: int = None
    t_end: float = None
    steps: int = None
    times: tuple = ()
    eps_ladder: tuple = ()
    tolerances: dict = field(default_factory=dict)
    continuum: dict = field(default_factory=dict)

    @property
    def hash(self):
        body = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(body.encode()).hexdigest()

    def rng(self):
        return np.random.default_rng(self.seed)

    def tolerance(self, name):
        return self.tolerances.get(name, DEFAULT_TOLERANCES[name])

    @cached_property
    def spec(self):
        return HamiltonianSpec(self.kinetic, self.potential, self.epsilon)

    @cached_property
    def correlations(self):
        return CorrelationFamily(self.correlation_operators, self.dim)

    @property
    def one_particle_operator(self):
        return LabeledOperator((1,), self.one_particle, self.dim)

    @property
    def datum(self):
        """Initial datum at the scenario's epsilon (F₁⁰ = f₁⁰/ε for limit scenarios)."""
        f1 = self.one_particle_operator
        if "f1_limit" in self.raw:
            f1 = f1 / self.epsilon
        return InitialDatum(f1, self.correlations)

    @property
    def time_grid(self):
        return np.linspace(0.0, self.t_end, self.steps + 1)

    def with_overrides(self, **overrides):
        """A re-validated copy with top-level fields replaced (None values are ignored)."""
        raw = copy.deepcopy(self.raw)
        raw.update({k: v for k, v in overrides.items() if v is not None})
        return load_scenario(raw)


def load_scenario(data):
    form = ScenarioForm(data)
    if not form.is_valid():
        logger.info("scenario %r rejected with %d invalid fields", data.get("name"), len(form.errors))
        raise ValidationError(
            {name: [ValidationError(message) for message in messages] for name, messages in form.errors.items()}
        )
    cleaned = form.cleaned_data
    return Scenario(
        name=cleaned["name"],
        experiment=cleaned["experiment"],
        seed=cleaned["seed"],
        raw=copy.deepcopy(dict(data)),
        dim=cleaned.get("dim"),
        kinetic=cleaned.get("kinetic_matrix"),
        potential=cleaned.get("potential_matrix"),
        epsilon=cleaned.get("epsilon") or 1.0,
        correlation_operators=cleaned.get("correlation_operators", {}),
        one_particle=cleaned.get("one_particle"),
        n_max=cleaned.get("n_max"),
        s_max=cleaned.get("s_max"),
        t_end=cleaned.get("t_end"),
        steps=cleaned.get("steps"),
        times=tuple(cleaned.get("times") or ()),
        eps_ladder=tuple(cleaned.get("eps_ladder") or ()),
        tolerances=cleaned.get("tolerances") or {},
        continuum=cleaned.get("continuum") or {},
    )


def read_scenario(path):
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError({"__all__": [ValidationError(f"{path.name} is not valid JSON: {exc}")]})
    if not isinstance(data, dict):
        raise ValidationError({"__all__": [ValidationError(f"{path.name} must hold a JSON object")]})
    return load_scenario(data)


def load_fixture(name):
    return read_scenario(FIXTURE_DIR / f"{name}.json")


def fixture_names():
    return sorted(p.stem for p in FIXTURE_DIR.glob("*.json"))


def output_dir(override=None):
    path = Path(override) if override else Path(settings.WORKBENCH["OUTPUT_DIR"])
    path.mkdir(parents=True, exist_ok=True)
    return path
