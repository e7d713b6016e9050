from pathlib import Path

import numpy as np
import pandas as pd

from multiview.core import MvModel, decision_scores, predict_labels
from multiview.errors import UsageError
from multiview.forms import PredictForm
from multiview.management.base import MultiviewCommand, load_manifest
from multiview.services.datasets import load_views


class Command(MultiviewCommand):
    help = "Score the observations of a manifest with a trained model; writes predictions.csv (index,score,label)."
    form_class = PredictForm

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--model", help="model.json written by `train`")
        parser.add_argument("--manifest", help="manifest of the views to score (labels are not read)")
        parser.add_argument("--overlap", type=float, help="quarter overlap for idx manifests")

    def run(self, form, out_dir, options):
        model_path = Path(form.cleaned_data["model"])
        if not model_path.exists():
            raise UsageError(f"model not found: {model_path}")
        model = MvModel.load(model_path)
        views = load_views(load_manifest(form))

        if all(table.shape[0] == 0 for table in views):
            scores = np.empty(0)
        else:
            scores = decision_scores(model, views)

        predictions = pd.DataFrame({
            "index": np.arange(scores.size),
            "score": scores,
            "label": predict_labels(scores),
        })
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "predictions.csv"
        predictions.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
        self.write_config(form, out_dir)

        self.stdout.write(self.style.SUCCESS(f"{scores.size} prediction(s) written to {path}"))
        return {"n": int(scores.size), "positives": int(np.sum(scores >= 0))}
