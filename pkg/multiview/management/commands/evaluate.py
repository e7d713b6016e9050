from multiview.forms import ExperimentForm
from multiview.management.base import MultiviewCommand, add_experiment_arguments, load_manifest
from multiview.services.datasets import load_multiclass
from multiview.services.evaluation import aggregate, evaluate_methods, write_results


class Command(MultiviewCommand):
    help = ("Compare methods over repeated random splits for one or more one-vs-rest tasks; "
            "writes raw.csv, aggregate.csv and summary.json (with macro averages over classes).")
    form_class = ExperimentForm

    def add_arguments(self, parser):
        super().add_arguments(parser)
        add_experiment_arguments(parser)

    def run(self, form, out_dir, options):
        manifest = load_manifest(form)
        data = load_multiclass(manifest)
        classes = form.cleaned_data["classes"] or (
            [manifest.positive_class] if manifest.positive_class is not None else data.class_ids()
        )

        raw, summary = evaluate_methods(
            data, classes, form.cleaned_data["methods"], form.split_spec(),
            form.experiment_config(n_jobs=self.n_jobs(form)),
        )
        paths = write_results(raw, aggregate(raw, ["method", "positive_class"]), out_dir, summary)
        self.write_config(form, out_dir)

        for method, means in summary["macro"].items():
            self.stdout.write(f"{method:<12} accuracy={means['accuracy']:.4f} f1={means['f1']:.4f}")
        self.stdout.write(self.style.SUCCESS(f"results written to {paths['aggregate'].parent}"))
        return {"macro": summary["macro"], "classes": summary["classes"]}
