import json
import shutil
import tempfile
from io import StringIO
from pathlib import Path

import pandas as pd
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import TestCase

from multiview.core import MvModel, predict
from multiview.models import ExperimentRun
from multiview.services.datasets import DatasetManifest, load_csv_multiview

TINY = Path(__file__).resolve().parent.parent / "fixtures" / "tiny" / "manifest.json"


class CommandTestCase(TestCase):
    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.dir = Path(tmp.name)

    def call(self, name, **options):
        out, err = StringIO(), StringIO()
        call_command(name, stdout=out, stderr=err, **options)
        return out.getvalue()

    def assertExitCode(self, code, name, **options):
        with self.assertRaises(CommandError) as ctx:
            self.call(name, **options)
        self.assertEqual(ctx.exception.returncode, code)
        return ctx.exception


class TrainCommandTests(CommandTestCase):
    def test_train_on_the_fixture(self):
        out = self.call("train", manifest=str(TINY), out=str(self.dir))
        self.assertIn("final objective:", out)
        self.assertIn("training accuracy:", out)

        model = MvModel.load(self.dir / "model.json")
        self.assertEqual(model.metadata["T"], 2)
        self.assertEqual(model.view_names, ("left", "right"))

        lines = (self.dir / "trace.jsonl").read_text().splitlines()
        self.assertEqual(len(lines), 2)
        records = [json.loads(line) for line in lines]
        for record in records:
            self.assertLessEqual(record["objective"], record["objective_before"] + 1e-12)

        config = json.loads((self.dir / "config.json").read_text())
        self.assertEqual(config["command"], "train")
        self.assertEqual(config["T"], 2)

        run = ExperimentRun.objects.get()
        self.assertEqual((run.command, run.status), ("train", "ok"))
        self.assertEqual(run.summary["iterations"], 2)

    def test_same_seed_same_files(self):
        first, second = self.dir / "a", self.dir / "b"
        self.call("train", manifest=str(TINY), out=str(first), seed=5)
        self.call("train", manifest=str(TINY), out=str(second), seed=5)
        for name in ("model.json", "trace.jsonl"):
            self.assertEqual((first / name).read_bytes(), (second / name).read_bytes())

    def test_config_file_and_flag_precedence(self):
        config = self.dir / "config.yaml"
        config.write_text("T: 3\nrho_solver: exact_vertex\n")
        self.call("train", manifest=str(TINY), out=str(self.dir / "file"), config=str(config))
        model = MvModel.load(self.dir / "file" / "model.json")
        self.assertEqual((model.metadata["T"], model.metadata["rho_solver"]), (3, "exact_vertex"))

        self.call("train", manifest=str(TINY), out=str(self.dir / "flag"), config=str(config), T=1)
        self.assertEqual(MvModel.load(self.dir / "flag" / "model.json").metadata["T"], 1)

    def test_missing_manifest_is_a_usage_error(self):
        self.assertExitCode(1, "train", out=str(self.dir))
        self.assertExitCode(1, "train", manifest=str(self.dir / "nowhere.json"), out=str(self.dir))
        self.assertEqual(ExperimentRun.objects.filter(status="failed").count(), 2)

    def test_unknown_config_key(self):
        config = self.dir / "config.json"
        config.write_text(json.dumps({"colour": "blue"}))
        error = self.assertExitCode(1, "train", manifest=str(TINY), out=str(self.dir), config=str(config))
        self.assertIn("colour", str(error))

    def test_invalid_value(self):
        self.assertExitCode(1, "train", manifest=str(TINY), out=str(self.dir), rho_solver="simplex")

    def test_bad_data_is_exit_code_two(self):
        data_dir = self.dir / "data"
        shutil.copytree(TINY.parent, data_dir)
        (data_dir / "right.csv").write_text("0.1\n0.2\n")
        self.assertExitCode(2, "train", manifest=str(data_dir / "manifest.json"), out=str(self.dir / "out"))


class PredictCommandTests(CommandTestCase):
    def setUp(self):
        super().setUp()
        self.model_dir = self.dir / "model"
        self.call("train", manifest=str(TINY), out=str(self.model_dir))

    def test_predictions_follow_the_model(self):
        self.call("predict", model=str(self.model_dir / "model.json"), manifest=str(TINY), out=str(self.dir / "p"))
        table = pd.read_csv(self.dir / "p" / "predictions.csv", float_precision="round_trip")
        self.assertEqual(list(table.columns), ["index", "score", "label"])

        model = MvModel.load(self.model_dir / "model.json")
        data = load_csv_multiview(DatasetManifest.from_json(TINY))
        self.assertEqual(table["label"].tolist(), predict(model, data.views).tolist())
        self.assertEqual(table["index"].tolist(), list(range(12)))
        self.assertTrue(((table["score"] >= 0) == (table["label"] == 1)).all())

    def test_empty_input_gives_a_header_only_file(self):
        empty = self.dir / "empty"
        empty.mkdir()
        (empty / "left.csv").write_text("")
        (empty / "right.csv").write_text("")
        (empty / "manifest.json").write_text(json.dumps({
            "views": [{"name": "left", "path": "left.csv"}, {"name": "right", "path": "right.csv"}],
        }))
        self.call("predict", model=str(self.model_dir / "model.json"), manifest=str(empty / "manifest.json"),
                  out=str(self.dir / "p"))
        self.assertEqual((self.dir / "p" / "predictions.csv").read_text(), "index,score,label\n")

    def test_corrupted_model(self):
        broken = self.dir / "broken.json"
        broken.write_text("{ not json")
        self.assertExitCode(2, "predict", model=str(broken), manifest=str(TINY), out=str(self.dir / "p"))

    def test_missing_model(self):
        self.assertExitCode(1, "predict", model=str(self.dir / "none.json"), manifest=str(TINY),
                            out=str(self.dir / "p"))


class ExperimentCommandTests(CommandTestCase):
    common = {"seed": 0, "methods": "mono,mwmvc2", "repetitions": 2, "depths": "1,2"}

    def test_curve(self):
        outputs = []
        for name in ("a", "b"):
            self.call("curve", manifest=str(TINY), out=str(self.dir / name), sizes="4,6", **self.common)
            outputs.append({f: (self.dir / name / f).read_bytes() for f in ("raw.csv", "aggregate.csv")})
        self.assertEqual(outputs[0], outputs[1])

        table = pd.read_csv(self.dir / "a" / "aggregate.csv")
        self.assertEqual(len(table), 2 * 2)
        self.assertEqual(sorted(set(table["m"])), [4, 6])
        self.assertEqual(len(pd.read_csv(self.dir / "a" / "raw.csv")), 2 * 2 * 2)

    def test_curve_needs_sizes(self):
        self.assertExitCode(1, "curve", manifest=str(TINY), out=str(self.dir), **self.common)

    def test_curve_size_beyond_the_pool(self):
        self.assertExitCode(2, "curve", manifest=str(TINY), out=str(self.dir), sizes="4,500", **self.common)

    def test_experiment_needs_a_seed(self):
        options = {**self.common, "seed": None}
        self.assertExitCode(1, "evaluate", manifest=str(TINY), out=str(self.dir), m_train=6, **options)

    def test_evaluate(self):
        self.call("evaluate", manifest=str(TINY), out=str(self.dir), m_train=6, **self.common)
        table = pd.read_csv(self.dir / "aggregate.csv")
        self.assertEqual(table["method"].tolist(), ["mono", "mwmvc2"])
        self.assertEqual(table["repetitions"].tolist(), [2, 2])

        summary = json.loads((self.dir / "summary.json").read_text())
        self.assertEqual(summary["classes"], ["1"])
        self.assertEqual(set(summary["macro"]), {"mono", "mwmvc2"})
        self.assertEqual(ExperimentRun.objects.get(command="evaluate").status, "ok")


class SynthCommandTests(CommandTestCase):
    def test_synth_then_train(self):
        self.call("synth", out=str(self.dir / "data"), seed=3, m=40, V=3, noise_views=1)
        manifest = DatasetManifest.from_json(self.dir / "data" / "manifest.json")
        self.assertEqual([v.name for v in manifest.views], ["informative_1", "informative_2", "noise_1"])
        self.assertEqual(load_csv_multiview(manifest).m, 40)

        self.call("train", manifest=str(self.dir / "data" / "manifest.json"), out=str(self.dir / "model"))
        self.assertTrue((self.dir / "model" / "model.json").exists())

    def test_synth_validation(self):
        self.assertExitCode(1, "synth", out=str(self.dir), m=10)
        self.assertExitCode(1, "synth", out=str(self.dir), seed=0, V=2, noise_views=2)
