"""
Shared plumbing of the multiview management commands.

Configuration is resolved as flags > --config file (JSON or YAML) > the
settings defaults, validated by the command's form, echoed to config.json
in the output directory and recorded as an ExperimentRun.
"""
from __future__ import annotations

import logging
from dataclasses import replace
from pathlib import Path
from typing import Any, Optional

import yaml
from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from multiview.errors import MultiviewError, UsageError
from multiview.services.datasets import DatasetManifest
from multiview.services.runs import record_run
from multiview.utils.utils import dump_json, load_json

logger = logging.getLogger(__name__)


def load_config_file(path: str) -> dict:
    path = Path(path)
    if not path.exists():
        raise UsageError(f"config file not found: {path}")
    if path.suffix.lower() in (".yaml", ".yml"):
        try:
            with open(path, "r", encoding="utf-8") as f:
                payload = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise UsageError(f"{path}: invalid YAML: {e}") from e
    else:
        payload = load_json(path)
    if not isinstance(payload, dict):
        raise UsageError(f"{path}: config file must hold a mapping of option names to values")
    return payload


class MultiviewCommand(BaseCommand):
    form_class = None
    defaults_setting = "MULTIVIEW_DEFAULTS"

    @property
    def command_name(self) -> str:
        return self.__module__.rsplit(".", 1)[-1]

    def add_arguments(self, parser):
        parser.add_argument("--config", help="JSON or YAML file of option values (flags win over it)")
        parser.add_argument("--out", help="output directory (default: MULTIVIEW_OUTPUT_ROOT/<command>)")

    # options that are not configuration values
    plumbing = ("config", "out", "verbosity", "settings", "pythonpath", "traceback", "no_color",
                "force_color", "skip_checks", "stdout", "stderr")

    def resolve_config(self, options: dict) -> Any:
        """Merge the three configuration layers and validate them with the command's form."""
        fields = set(self.form_class.base_fields)
        defaults = {k: v for k, v in getattr(settings, self.defaults_setting, {}).items() if k in fields}
        from_file = load_config_file(options["config"]) if options.get("config") else {}
        flags = {k: v for k, v in options.items() if k not in self.plumbing and v is not None}

        merged = {**defaults, **from_file, **flags}
        form = self.form_class(data=merged)
        if not form.is_valid():
            raise UsageError(form.error_text())
        return form

    def output_dir(self, options: dict) -> Path:
        if options.get("out"):
            return Path(options["out"])
        return Path(settings.MULTIVIEW_OUTPUT_ROOT) / self.command_name

    def n_jobs(self, form) -> int:
        return form.cleaned_data.get("n_jobs") or settings.MULTIVIEW_N_JOBS

    def write_config(self, form, out_dir: Path) -> Path:
        return dump_json({"command": self.command_name, **form.resolved()}, out_dir / "config.json")

    def run(self, form, out_dir: Path, options: dict) -> dict:
        """Do the work; returns the summary stored on the ExperimentRun."""
        raise NotImplementedError

    def handle(self, *args, **options):
        form: Optional[Any] = None
        out_dir: Optional[Path] = None
        try:
            form = self.resolve_config(options)
            out_dir = self.output_dir(options)
            summary = self.run(form, out_dir, options)
        except MultiviewError as e:
            config = form.resolved() if form is not None and hasattr(form, "cleaned_data") else {}
            record_run(self.command_name, config, {"error": str(e), "exit_code": e.exit_code}, out_dir,
                       status="failed")
            if isinstance(e, UsageError):
                self.stderr.write(self.create_parser("manage.py", self.command_name).format_usage())
            raise CommandError(str(e), returncode=e.exit_code) from e

        record_run(self.command_name, form.resolved(), summary, out_dir)


def load_manifest(form) -> DatasetManifest:
    """The manifest named by the config; idx manifests without an overlap take the configured one."""
    path = Path(form.cleaned_data["manifest"])
    if not path.exists():
        raise UsageError(f"manifest not found: {path}")
    manifest = DatasetManifest.from_json(path)
    if manifest.overlap is None and form.cleaned_data.get("overlap") is not None:
        manifest = replace(manifest, overlap=form.cleaned_data["overlap"])
    return manifest


def add_train_arguments(parser):
    parser.add_argument("--manifest", help="dataset manifest (JSON)")
    parser.add_argument("-T", dest="T", type=int, help="number of iterations (default 2)")
    parser.add_argument("--epsilon", type=float, help="smoothing of the delta update (default 1/(2m))")
    parser.add_argument("--rho-solver", dest="rho_solver", help="exact_vertex | entropic | slsqp")
    parser.add_argument("--rho-lambda", dest="rho_lambda", type=float, help="entropic temperature")
    parser.add_argument("--tolerance", type=float, help="stop once the objective decreases by less than this")
    parser.add_argument("--no-line-search", dest="line_search", action="store_const", const=False,
                        help="always take the full update step")
    parser.add_argument("--depths", help="comma-separated tree depths of every view's pool")
    parser.add_argument("--overlap", type=float, help="quarter overlap for idx manifests")
    parser.add_argument("--n-jobs", dest="n_jobs", type=int, help="parallel workers")


def add_experiment_arguments(parser):
    add_train_arguments(parser)
    parser.add_argument("--seed", type=int, help="base seed; repetition r uses seed + r (required)")
    parser.add_argument("--methods", help="comma-separated subset of mono,concat,fusion,mv_uniform,mwmvc2")
    parser.add_argument("--classes", help="comma-separated positive classes (default: the manifest's)")
    parser.add_argument("--m-train", dest="m_train", type=int, help="labelled training examples per repetition")
    parser.add_argument("--test-fraction", dest="test_fraction", type=float, help="share held out for testing")
    parser.add_argument("--repetitions", type=int, help="number of random splits")
    parser.add_argument("--negative-ratio", dest="negative_ratio", type=float,
                        help="negatives kept per positive in the training task")
    parser.add_argument("--baseline-depth", dest="baseline_depth", type=int,
                        help="depth of the mono/concat/fusion trees")
