import numpy as np
from django import forms
from django.conf import settings

from tensorcore.operators import LabeledOperator, matrix_from_pairs, permute_slots, symmetry_report, trace_norm

EXPERIMENTS = [
    ("identities", "Cumulant, Möbius and cluster expansion identities"),
    ("hierarchy-equivalence", "Hierarchy versus kinetic equation"),
    ("meanfield-ladder", "Mean-field convergence over an epsilon ladder"),
    ("correlation-propagation", "Propagation of initial correlations"),
    ("continuum", "Pure-state limit equations on a periodic grid"),
]

NEEDS_LIMIT = ("meanfield-ladder", "correlation-propagation")

CONTINUUM_KEYS = ("length", "points", "sigma", "dt", "t_end")


class ScenarioForm(forms.Form):
    name = forms.CharField(max_length=100)
    experiment = forms.ChoiceField(choices=EXPERIMENTS)
    seed = forms.IntegerField(min_value=0, max_value=2 ** 64 - 1)
    dim = forms.IntegerField(min_value=1, required=False)
    kinetic = forms.JSONField(required=False)
    potential = forms.JSONField(required=False)
    epsilon = forms.FloatField(required=False)
    correlations = forms.JSONField(required=False)
    f1_0 = forms.JSONField(required=False)
    f1_limit = forms.JSONField(required=False)
    n_max = forms.IntegerField(min_value=0, required=False)
    s_max = forms.IntegerField(min_value=1, required=False)
    t_end = forms.FloatField(required=False)
    steps = forms.IntegerField(min_value=1, required=False)
    times = forms.JSONField(required=False)
    eps_ladder = forms.JSONField(required=False)
    tolerances = forms.JSONField(required=False)
    continuum = forms.JSONField(required=False)

    def _matrix(self, field, side):
        raw = self.cleaned_data.get(field)
        if raw is None:
            return None
        try:
            matrix = matrix_from_pairs(raw)
        except (TypeError, ValueError):
            self.add_error(field, "Expected a matrix as rows of [re, im] pairs.")
            return None
        if matrix.shape != (side, side):
            self.add_error(field, f"Expected a {side}x{side} matrix, got {matrix.shape}.")
            return None
        return matrix

    def _hermitian(self, field, matrix):
        tol = settings.WORKBENCH["HERMITIAN_TOLERANCE"]
        if np.linalg.norm(matrix - matrix.conj().T, 2) > tol * max(1.0, np.linalg.norm(matrix, 2)):
            self.add_error(field, "Matrix must be Hermitian.")
            return False
        return True

    def clean(self):
        cleaned = super().clean()
        experiment = cleaned.get("experiment")
        if experiment is None:
            return cleaned
        self._clean_tolerances()
        if experiment == "continuum":
            self._clean_continuum()
        else:
            self._clean_operator_scenario(experiment)
        return cleaned

    def _clean_tolerances(self):
        tolerances = self.cleaned_data.get("tolerances") or {}
        if not isinstance(tolerances, dict):
            self.add_error("tolerances", "Tolerances must be a mapping of names to positive numbers.")
            return
        for key, value in tolerances.items():
            if not isinstance(value, (int, float)) or value <= 0:
                self.add_error("tolerances", f"Tolerance {key!r} must be a positive number.")
        self.cleaned_data["tolerances"] = dict(tolerances)

    def _clean_continuum(self):
        config = self.cleaned_data.get("continuum")
        if not isinstance(config, dict):
            self.add_error("continuum", "A continuum experiment needs a continuum block.")
            return
        for key in CONTINUUM_KEYS:
            value = config.get(key)
            if not isinstance(value, (int, float)) or value <= 0:
                self.add_error("continuum", f"{key} must be a positive number.")
        points = config.get("points")
        if isinstance(points, int) and (points < 16 or points & (points - 1)):
            self.add_error("continuum", "points must be a power of two and at least 16.")
        kernel_points = config.get("kernel_points")
        if kernel_points is not None and (
            not isinstance(kernel_points, int)
            or kernel_points & (kernel_points - 1)
            or kernel_points < 16
            or kernel_points > settings.WORKBENCH["MAX_KERNEL_POINTS"]
        ):
            self.add_error(
                "continuum",
                f"kernel_points must be a power of two between 16 and {settings.WORKBENCH['MAX_KERNEL_POINTS']}.",
            )

    def _clean_operator_scenario(self, experiment):
        cleaned = self.cleaned_data
        for field in ("dim", "kinetic", "potential", "epsilon", "n_max", "s_max", "t_end", "steps"):
            if cleaned.get(field) is None and field not in self.errors:
                self.add_error(field, "This field is required for operator experiments.")
        dim = cleaned.get("dim")
        if dim is None:
            return
        if cleaned.get("epsilon") is not None and cleaned["epsilon"] <= 0:
            self.add_error("epsilon", "epsilon must be positive.")
        if cleaned.get("t_end") is not None and cleaned["t_end"] <= 0:
            self.add_error("t_end", "t_end must be positive.")
        n_max = cleaned.get("n_max")
        if n_max is not None and n_max > settings.WORKBENCH["MAX_N_MAX"]:
            self.add_error("n_max", f"n_max may not exceed {settings.WORKBENCH['MAX_N_MAX']}.")
        s_max = cleaned.get("s_max")
        if s_max is not None and experiment in ("hierarchy-equivalence", "correlation-propagation") and s_max < 2:
            self.add_error("s_max", "This experiment needs s_max >= 2.")
        if s_max is not None and dim ** (s_max + (n_max or 0)) > settings.WORKBENCH["MAX_DENSE_SIDE"]:
            self.add_error("s_max", "s_max + n_max particles exceed the dense size ceiling.")

        kinetic = self._matrix("kinetic", dim)
        if kinetic is not None and self._hermitian("kinetic", kinetic):
            cleaned["kinetic_matrix"] = kinetic
        potential = self._matrix("potential", dim * dim)
        if potential is not None and self._hermitian("potential", potential):
            swapped = permute_slots(LabeledOperator((1, 2), potential, dim), (1, 0)).matrix
            if np.linalg.norm(swapped - potential, 2) > 1e-10 * max(1.0, np.linalg.norm(potential, 2)):
                self.add_error("potential", "Potential must be symmetric under exchange of its slots.")
            else:
                cleaned["potential_matrix"] = potential

        self._clean_correlations(dim)
        self._clean_one_particle(experiment, dim)
        self._clean_lists()

    def _clean_correlations(self, dim):
        raw = self.cleaned_data.get("correlations") or {}
        if not isinstance(raw, dict):
            self.add_error("correlations", "Correlations must map orders to matrices.")
            return
        operators = {}
        for key, rows in raw.items():
            try:
                n = int(key)
            except (TypeError, ValueError):
                self.add_error("correlations", f"Correlation order {key!r} is not an integer.")
                continue
            if n < 2:
                self.add_error("correlations", f"Correlation orders start at 2, got {n}.")
                continue
            try:
                matrix = matrix_from_pairs(rows)
            except (TypeError, ValueError):
                self.add_error("correlations", f"g_{n} is not a matrix of [re, im] pairs.")
                continue
            if matrix.shape != (dim ** n, dim ** n):
                self.add_error("correlations", f"g_{n} must be {dim ** n}x{dim ** n}.")
                continue
            op = LabeledOperator(tuple(range(1, n + 1)), matrix, dim)
            if symmetry_report(op).max_deviation > 1e-10 * max(1.0, trace_norm(op)):
                self.add_error("correlations", f"g_{n} must be permutation symmetric.")
                continue
            operators[n] = op
        self.cleaned_data["correlation_operators"] = operators

    def _clean_one_particle(self, experiment, dim):
        field = "f1_limit" if experiment in NEEDS_LIMIT else "f1_0"
        if self.cleaned_data.get(field) is None:
            self.add_error(field, f"This experiment needs {field}.")
            return
        matrix = self._matrix(field, dim)
        if matrix is None or not self._hermitian(field, matrix):
            return
        if np.linalg.eigvalsh(matrix)[0] < -1e-12:
            self.add_error(field, "The one-particle operator must be positive.")
            return
        self.cleaned_data["one_particle"] = matrix

    def _clean_lists(self):
        times = self.cleaned_data.get("times") or []
        if not isinstance(times, list) or any(not isinstance(t, (int, float)) or t < 0 for t in times):
            self.add_error("times", "times must be a list of non-negative numbers.")
        ladder = self.cleaned_data.get("eps_ladder") or []
        if not isinstance(ladder, list) or any(not isinstance(e, (int, float)) or e <= 0 for e in ladder):
            self.add_error("eps_ladder", "eps_ladder must be a list of positive numbers.")
        elif any(b >= a for a, b in zip(ladder, ladder[1:])):
            self.add_error("eps_ladder", "eps_ladder must be strictly decreasing.")
