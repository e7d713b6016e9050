from multiview.core import accuracy
from multiview.errors import NumericalError
from multiview.forms import TrainForm
from multiview.management.base import MultiviewCommand, add_train_arguments, load_manifest
from multiview.services.datasets import load_csv_multiview
from multiview.services.trainer import fit
from multiview.services.weak_learners import build_pool


class Command(MultiviewCommand):
    help = "Train a double-weighted multiview majority vote; writes model.json and trace.jsonl."
    form_class = TrainForm

    def add_arguments(self, parser):
        super().add_arguments(parser)
        add_train_arguments(parser)
        parser.add_argument("--seed", type=int, help="seed of the tree learner (default: the manifest's)")

    def run(self, form, out_dir, options):
        manifest = load_manifest(form)
        data = load_csv_multiview(manifest)
        seed = form.cleaned_data["seed"] if form.cleaned_data["seed"] is not None else manifest.seed
        n_jobs = self.n_jobs(form)

        pool = build_pool(data, form.cleaned_data["depths"], seed=seed, n_jobs=n_jobs)
        cfg = form.train_config(seed=seed, n_jobs=n_jobs)
        out_dir.mkdir(parents=True, exist_ok=True)
        try:
            model, trace = fit(data, pool, cfg)
        except NumericalError as e:
            if e.trace is not None:
                e.trace.save(out_dir / "trace.jsonl")
            raise

        model_path = model.save(out_dir / "model.json")
        trace_path = trace.save(out_dir / "trace.jsonl")
        self.write_config(form, out_dir)
        train_accuracy = accuracy(model, data)

        self.stdout.write(f"final objective: {trace.final_objective!r}")
        self.stdout.write(f"training accuracy: {train_accuracy!r}")
        self.stdout.write(self.style.SUCCESS(f"model written to {model_path}"))
        self.stdout.write(f"trace written to {trace_path}")
        return {
            "final_objective": trace.final_objective,
            "training_accuracy": train_accuracy,
            "iterations": len(trace.records),
            "rho": model.weights.rho.tolist(),
        }
