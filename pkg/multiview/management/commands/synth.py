from multiview.forms import SynthForm
from multiview.management.base import MultiviewCommand
from multiview.services.datasets import save_csv_multiview, synth_multiview


class Command(MultiviewCommand):
    help = "Generate a synthetic multiview dataset (informative views first, then noise views) as CSV + manifest.json."
    form_class = SynthForm
    defaults_setting = "MULTIVIEW_SYNTH_DEFAULTS"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--m", type=int, help="number of observations")
        parser.add_argument("--V", type=int, help="number of views")
        parser.add_argument("--d", type=int, help="features per view")
        parser.add_argument("--redundancy", type=float, help="noise correlation between informative views, in [0, 1]")
        parser.add_argument("--noise-views", dest="noise_views", type=int, help="label-independent views")
        parser.add_argument("--class-sep", dest="class_sep", type=float, help="distance of the class means from 0")
        parser.add_argument("--seed", type=int, help="generator seed (required)")

    def run(self, form, out_dir, options):
        c = form.cleaned_data
        data = synth_multiview(c["m"], c["V"], c["d"], c["redundancy"], c["noise_views"], c["seed"],
                               class_sep=c["class_sep"])
        manifest_path = save_csv_multiview(data, out_dir, positive_class="1", seed=c["seed"])
        self.write_config(form, out_dir)

        self.stdout.write(self.style.SUCCESS(f"manifest written to {manifest_path}"))
        return {"manifest": str(manifest_path), "m": data.m, "V": data.V}
