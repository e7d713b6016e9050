from django import forms
from django.core.exceptions import ValidationError

from multiview.services.evaluation import METHODS, ExperimentConfig
from multiview.services.datasets import SplitSpec
from multiview.services.trainer import RHO_SOLVERS, TrainConfig


class CommaListField(forms.Field):
    """A list given either as a JSON/YAML list or as a comma-separated string."""

    def __init__(self, *, item=str, **kwargs):
        self.item = item
        super().__init__(**kwargs)

    def to_python(self, value):
        if value in self.empty_values:
            return None
        if isinstance(value, str):
            parts = [p.strip() for p in value.split(",") if p.strip()]
        elif isinstance(value, (list, tuple)):
            parts = list(value)
        else:
            parts = [value]
        try:
            return [self.item(p) for p in parts]
        except (TypeError, ValueError):
            raise ValidationError(f"Could not read {value!r} as a list of {self.item.__name__}.")


class StrictForm(forms.Form):
    """
    Base for every command's configuration. Keys the form does not declare
    are rejected instead of being silently ignored.
    """

    def __init__(self, data, *args, **kwargs):
        self.unknown_keys = sorted(set(data) - set(self.base_fields))
        super().__init__(data, *args, **kwargs)

    def clean(self):
        cleaned = super().clean()
        if self.unknown_keys:
            raise ValidationError(f"Unknown configuration keys: {', '.join(self.unknown_keys)}.")
        return cleaned

    def error_text(self) -> str:
        lines = []
        for name, errors in self.errors.items():
            prefix = "" if name == "__all__" else f"{name}: "
            lines.extend(prefix + str(e) for e in errors)
        return "; ".join(lines)

    def resolved(self) -> dict:
        """Cleaned values in a JSON-friendly shape (provenance copy)."""
        return {k: v for k, v in sorted(self.cleaned_data.items())}


class RunConfigForm(StrictForm):
    manifest = forms.CharField(required=True)
    overlap = forms.FloatField(required=False, min_value=0.0)
    n_jobs = forms.IntegerField(required=False, min_value=1)

    def clean_overlap(self):
        overlap = self.cleaned_data.get("overlap")
        if overlap is not None and not overlap < 0.5:
            raise ValidationError("Overlap must be below 0.5.")
        return overlap


class TrainForm(RunConfigForm):
    T = forms.IntegerField(min_value=1)
    epsilon = forms.FloatField(required=False, min_value=0.0)
    rho_solver = forms.ChoiceField(choices=[(s, s) for s in RHO_SOLVERS])
    rho_lambda = forms.FloatField(required=False)
    tolerance = forms.FloatField(min_value=0.0)
    line_search = forms.BooleanField(required=False)
    depths = CommaListField(item=int, required=False)
    seed = forms.IntegerField(required=False)

    def clean_rho_lambda(self):
        lam = self.cleaned_data.get("rho_lambda")
        if lam is not None and not lam > 0:
            raise ValidationError("rho_lambda must be positive.")
        return lam

    def clean_depths(self):
        depths = self.cleaned_data.get("depths")
        if depths is not None and (not depths or any(d < 1 for d in depths)):
            raise ValidationError("Every depth must be an integer >= 1.")
        return depths

    def train_config(self, seed: int = 0, n_jobs: int = 1) -> TrainConfig:
        c = self.cleaned_data
        return TrainConfig(
            T=c["T"],
            epsilon=c["epsilon"],
            rho_solver=c["rho_solver"],
            rho_lambda=c["rho_lambda"],
            seed=seed,
            tolerance=c["tolerance"],
            line_search=c["line_search"],
            n_jobs=n_jobs,
        )


class ExperimentForm(TrainForm):
    # experiment commands must be reproducible, so the seed is mandatory
    seed = forms.IntegerField(required=True)
    baseline_depth = forms.IntegerField(required=False, min_value=1)
    m_train = forms.IntegerField(min_value=1)
    test_fraction = forms.FloatField(min_value=0.0, max_value=1.0)
    repetitions = forms.IntegerField(min_value=1)
    negative_ratio = forms.FloatField()
    methods = CommaListField(item=str)
    classes = CommaListField(item=str, required=False)

    def clean_test_fraction(self):
        fraction = self.cleaned_data.get("test_fraction")
        if fraction is not None and not 0.0 < fraction < 1.0:
            raise ValidationError("test_fraction must lie strictly between 0 and 1.")
        return fraction

    def clean_negative_ratio(self):
        ratio = self.cleaned_data.get("negative_ratio")
        if ratio is not None and not ratio > 0:
            raise ValidationError("negative_ratio must be positive.")
        return ratio

    def clean_methods(self):
        methods = self.cleaned_data.get("methods") or []
        unknown = [m for m in methods if m not in METHODS]
        if unknown:
            raise ValidationError(f"Unknown methods {', '.join(unknown)}; choose from {', '.join(METHODS)}.")
        if not methods:
            raise ValidationError("At least one method is required.")
        return methods

    def split_spec(self) -> SplitSpec:
        c = self.cleaned_data
        return SplitSpec(m_train=c["m_train"], test_fraction=c["test_fraction"], repetitions=c["repetitions"],
                         seed=c["seed"], negative_ratio=c["negative_ratio"])

    def experiment_config(self, n_jobs: int = 1) -> ExperimentConfig:
        c = self.cleaned_data
        return ExperimentConfig(
            train=self.train_config(seed=c["seed"]),
            depths=tuple(c["depths"]) if c["depths"] else None,
            baseline_depth=c["baseline_depth"],
            n_jobs=n_jobs,
        )


class CurveForm(ExperimentForm):
    sizes = CommaListField(item=int)

    def clean_sizes(self):
        sizes = self.cleaned_data.get("sizes")
        if not sizes or any(s < 1 for s in sizes):
            raise ValidationError("sizes must be a non-empty list of integers >= 1.")
        return sizes


class PredictForm(RunConfigForm):
    model = forms.CharField(required=True)


class SynthForm(StrictForm):
    m = forms.IntegerField(min_value=1)
    V = forms.IntegerField(min_value=2)
    d = forms.IntegerField(min_value=1)
    redundancy = forms.FloatField(min_value=0.0, max_value=1.0)
    noise_views = forms.IntegerField(min_value=0)
    class_sep = forms.FloatField()
    seed = forms.IntegerField(required=True)

    def clean(self):
        cleaned = super().clean()
        V, noise = cleaned.get("V"), cleaned.get("noise_views")
        if V is not None and noise is not None and noise >= V:
            raise ValidationError("noise_views must be smaller than V.")
        return cleaned
