from multiview.errors import UsageError
from multiview.forms import CurveForm
from multiview.management.base import MultiviewCommand, add_experiment_arguments, load_manifest
from multiview.services.datasets import load_multiclass
from multiview.services.evaluation import aggregate, learning_curve, write_results


class Command(MultiviewCommand):
    help = ("Learning curves: accuracy and F1 of each method per training size; "
            "writes raw.csv (method,m,rep,accuracy,f1) and aggregate.csv.")
    form_class = CurveForm

    def add_arguments(self, parser):
        super().add_arguments(parser)
        add_experiment_arguments(parser)
        parser.add_argument("--sizes", help="comma-separated training sizes")

    def run(self, form, out_dir, options):
        manifest = load_manifest(form)
        classes = form.cleaned_data["classes"]
        if classes and len(classes) > 1:
            raise UsageError("curve takes a single positive class")
        positive = classes[0] if classes else manifest.positive_class
        if positive is None:
            raise UsageError("no positive class: pass --classes or set positive_class in the manifest")

        raw = learning_curve(
            load_multiclass(manifest), positive, form.cleaned_data["sizes"], form.cleaned_data["methods"],
            form.split_spec(), form.experiment_config(n_jobs=self.n_jobs(form)),
        )
        table = aggregate(raw, ["method", "m"])
        paths = write_results(raw, table, out_dir)
        self.write_config(form, out_dir)

        for row in table.itertuples(index=False):
            self.stdout.write(f"{row.method:<12} m={row.m:<5} accuracy={row.accuracy_mean:.4f}±{row.accuracy_std:.4f} "
                              f"f1={row.f1_mean:.4f}±{row.f1_std:.4f}")
        self.stdout.write(self.style.SUCCESS(f"curves written to {paths['raw'].parent}"))
        return {"positive_class": str(positive), "rows": len(table)}
