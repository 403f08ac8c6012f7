import os

import nbformat
import numpy as np
import pandas as pd
import pytest
import torch

from clfa.common import names as N
from clfa.common.errors import ClfaError, ErrorType
from clfa.common.utils import append_jsonl, make_rng
from clfa.data import ImageDataset, sample_triple_batch
from clfa.evaluation import (
    embedding_frame,
    evaluate,
    export_embeddings,
    export_meta_samples,
    fit_probe,
    leave_one_domain_out,
    linear_probe,
    report,
    run_synthetic_shift_study,
    summarize,
    variant_config,
)
from clfa.model import build_model, dataset_accuracy, load_model, save_checkpoint
from clfa.runs import RUNS
from clfa.runs import run_schema as RS
from clfa.runs.run_schema import MetricsRecord, ProbeReport
from clfa.training import fit
from clfa.transforms import TransformBank


@pytest.fixture
def model(make_config):
    torch.manual_seed(0)
    return build_model(make_config().model)


def _save_metrics(run_dir, protocol, per_target, seed=None, selection=None):
    os.makedirs(run_dir, exist_ok=True)
    RUNS.save_record(run_dir, MetricsRecord(protocol=protocol, per_target=per_target, seed=seed, selection=selection))


class TestEvaluate:

    def test_average_over_targets(self, model, synthetic_splits):
        targets = { "val": synthetic_splits["val"], "test": synthetic_splits["test"] }
        record = evaluate(model, targets, seed=3)
        assert list(record.per_target) == ["val", "test"]
        assert record.per_target["test"] == pytest.approx(dataset_accuracy(model, synthetic_splits["test"]))
        assert record.average == pytest.approx((record.per_target["val"] + record.per_target["test"]) / 2)
        assert record.protocol == N.SINGLE_DG and record.seed == 3

    def test_checkpoint_source_and_workers(self, model, synthetic_splits, tmp_path):
        path = save_checkpoint(os.path.join(tmp_path, "m.pt"), model, iteration=0)
        targets = { "a": synthetic_splits["test"], "b": synthetic_splits["train"] }
        serial = evaluate(path, targets)
        parallel = evaluate(path, targets, workers=2)
        assert serial.per_target == parallel.per_target
        assert serial.checkpoint_ref == path

    def test_class_mismatch(self, make_config, synthetic_splits):
        other = build_model(make_config(model={ "num_classes": 5 }).model)
        with pytest.raises(ClfaError) as e:
            evaluate(other, { "test": synthetic_splits["test"] })
        assert e.value.type == ErrorType.CONFIG

    def test_class_list_mismatch(self, make_config, train_ds, tmp_path):
        out = os.path.join(tmp_path, "run")
        state = fit(make_config(max_iters=1), train_ds, out=out, progress=False)
        assert state.model.class_names == train_ds.class_names
        path = RUNS.final_checkpoint(out)
        loaded, _ = load_model(path)
        assert loaded.class_names == train_ds.class_names
        renamed = ImageDataset(
            images = train_ds.images,
            labels = train_ds.labels,
            sample_ids = train_ds.sample_ids,
            class_names = tuple(reversed(train_ds.class_names)),
            name = "renamed"
        )
        with pytest.raises(ClfaError) as e:
            evaluate(path, { "renamed": renamed })
        assert e.value.type == ErrorType.CONFIG
        assert evaluate(path, { "train": train_ds }).per_target["train"] >= 0.0

    def test_untrained_model_scores_chance(self, model):
        rng, n = make_rng(11), 3000
        noise = ImageDataset(
            images = rng.uniform(0.0, 1.0, size=(n, 16, 16, 3)).astype(np.float32),
            labels = rng.permutation(np.arange(n) % 3).astype(np.int64),
            sample_ids = tuple(f"noise_{i}" for i in range(n)),
            class_names = ("a", "b", "c"),
            name = "noise"
        )
        record = evaluate(model, { "noise": noise })
        assert abs(record.per_target["noise"] - 1.0 / 3.0) <= 0.03

    def test_empty_target(self, model, train_ds):
        with pytest.raises(ClfaError) as e:
            evaluate(model, { "empty": train_ds.subset([]) })
        assert e.value.type == ErrorType.DATA

    def test_no_targets(self, model):
        with pytest.raises(ClfaError) as e:
            evaluate(model, dict())
        assert e.value.type == ErrorType.DATA


class TestProbe:

    def test_informative_features_are_separable(self):
        rng = make_rng(0)
        y = np.repeat(np.arange(3), 40)
        x = np.eye(3)[y] * 3.0 + rng.normal(0.0, 0.3, size=(120, 3))
        train_acc, heldout_acc = fit_probe(x, y)
        assert train_acc >= 0.95 and heldout_acc >= 0.9

    def test_noise_features_stay_near_chance(self):
        rng = make_rng(1)
        y = np.repeat(np.arange(4), 100)
        _, heldout_acc = fit_probe(rng.normal(size=(400, 2)), y)
        assert heldout_acc < 0.45

    def test_too_few_samples(self):
        y = np.repeat(np.arange(3), 5)
        with pytest.raises(ClfaError) as e:
            fit_probe(np.zeros((15, 2)), y)
        assert e.value.type == ErrorType.DATA

    @pytest.mark.parametrize("target", N.PROBE_TARGETS)
    def test_linear_probe_report(self, model, train_ds, target):
        probe = linear_probe(model, train_ds, target)
        assert probe.probe_target == target
        assert probe.chance == pytest.approx(1.0 / 3.0)
        assert 0.0 <= probe.heldout_acc <= 1.0

    def test_unknown_target(self, model, train_ds):
        with pytest.raises(ClfaError) as e:
            linear_probe(model, train_ds, "f_z")
        assert e.value.type == ErrorType.ARGUMENT


class TestExport:

    def test_embedding_columns(self, model, train_ds, tmp_path):
        path = export_embeddings(model, train_ds, os.path.join(tmp_path, "emb.csv"))
        frame = pd.read_csv(path)
        assert frame.shape == (len(train_ds), 3 + 8)
        assert list(frame.columns[:5]) == ["sample_id", "label", "domain_tag", "fc_0", "fc_1"]
        assert frame.columns[-1] == "fb_3"

    def test_embedding_halves_match_model(self, model, train_ds):
        frame = embedding_frame(model, train_ds.subset([0, 1]))
        pair = model.extract(model.to_input(train_ds.images[:2]))
        np.testing.assert_allclose(frame[[f"fc_{i}" for i in range(4)]].to_numpy(), pair.f_c.detach().numpy(), rtol=1e-5, atol=1e-6)

    def test_meta_samples(self, model, train_ds, tmp_path):
        triple = sample_triple_batch(train_ds, 1, make_rng(0), TransformBank(), N.SYNTHETIC)[0]
        frame = pd.read_csv(export_meta_samples(model, triple, os.path.join(tmp_path, "meta.csv"), n_samples=7))
        assert len(frame) == 4 * 7
        assert set(frame["encoder"]) == { N.AG, N.AP }
        assert set(frame["half"]) == { N.CAUSAL, N.NONCAUSAL }
        assert "a_3" in frame.columns and "z_3" in frame.columns

    def test_meta_samples_need_one_sample(self, model, triple_batch, tmp_path):
        with pytest.raises(ClfaError) as e:
            export_meta_samples(model, triple_batch[0], os.path.join(tmp_path, "meta.csv"), n_samples=0)
        assert e.value.type == ErrorType.ARGUMENT


class TestRecords:

    def test_records_are_cast_by_kind(self, tmp_path):
        run_dir = str(tmp_path)
        _save_metrics(run_dir, N.SINGLE_DG, { "a": 0.5, "b": 1.0 }, seed=1)
        RUNS.save_record(run_dir, ProbeReport(probe_target=N.PROBE_FB, train_acc=0.3, heldout_acc=0.26, chance=0.25))
        records = RUNS.records(run_dir)
        assert [r.kind for r in records] == ["MetricsRecord", "ProbeReport"]
        assert records[0].average == pytest.approx(0.75)
        assert records[0].per_target == { "a": 0.5, "b": 1.0 }
        assert [r.probe_target for r in RUNS.records(run_dir, ProbeReport)] == [N.PROBE_FB]

    def test_unknown_kind_is_skipped(self, tmp_path):
        run_dir = str(tmp_path)
        append_jsonl(RUNS.path(run_dir, RS.Files.RECORDS), { "kind": "FutureRecord", "value": 1 })
        _save_metrics(run_dir, N.SINGLE_DG, { "a": 0.5 }, seed=0)
        assert [r.kind for r in RUNS.records(run_dir)] == ["MetricsRecord"]

    @pytest.mark.parametrize("entry", [
        { "kind": "MetricsRecord", "protocol": N.SINGLE_DG, "per_target": { "a": 1.5 } },
        { "kind": "MetricsRecord", "per_target": { "a": 0.5 } },
    ])
    def test_malformed_record_is_data_error(self, tmp_path, entry):
        run_dir = str(tmp_path)
        _save_metrics(run_dir, N.SINGLE_DG, { "a": 0.5 }, seed=0)
        append_jsonl(RUNS.path(run_dir, RS.Files.RECORDS), entry)
        with pytest.raises(ClfaError) as e:
            RUNS.records(run_dir)
        assert e.value.type == ErrorType.DATA
        assert e.value.data["line"] == 2

    def test_inconsistent_average(self):
        with pytest.raises(ClfaError) as e:
            MetricsRecord(protocol=N.SINGLE_DG, per_target={ "a": 0.5 }, average=0.6)
        assert e.value.type == ErrorType.DATA

    def test_accuracy_outside_unit_interval(self):
        with pytest.raises(ClfaError) as e:
            MetricsRecord(protocol=N.SINGLE_DG, per_target={ "a": 1.5 })
        assert e.value.type == ErrorType.DATA

    def test_unknown_protocol(self):
        with pytest.raises(ClfaError) as e:
            MetricsRecord(protocol="oracle", per_target={ "a": 0.5 })
        assert e.value.type == ErrorType.ARGUMENT

    def test_truncate_metrics(self, tmp_path):
        run_dir = str(tmp_path)
        for i in range(1, 6):
            RUNS.log_metrics(run_dir, { "iter": i, N.LOSS_TOTAL: float(i) })
        RUNS.truncate_metrics(run_dir, 3)
        assert [m["iter"] for m in RUNS.metrics(run_dir)] == [1, 2, 3]


class TestReport:

    def test_sample_std(self):
        records = pd.DataFrame({
            "protocol": [N.SINGLE_DG] * 3,
            "target": ["average"] * 3,
            "accuracy": [0.80, 0.82, 0.84],
        })
        row = summarize(records).iloc[0]
        assert row["mean"] == pytest.approx(0.82)
        assert row["std"] == pytest.approx(0.02)
        assert row["n_runs"] == 3

    def test_single_run_has_no_std(self):
        records = pd.DataFrame({ "protocol": [N.SINGLE_DG], "target": ["average"], "accuracy": [0.7] })
        assert pd.isna(summarize(records).iloc[0]["std"])

    def test_unknown_std_mode(self):
        with pytest.raises(ClfaError):
            summarize(pd.DataFrame({ "protocol": [], "target": [], "accuracy": [] }), std_mode="robust")

    def test_artifacts(self, tmp_path):
        runs = []
        for seed, acc in enumerate((0.80, 0.82, 0.84)):
            run_dir = os.path.join(tmp_path, f"seed_{seed}")
            _save_metrics(run_dir, N.SINGLE_DG, { "sketch": acc }, seed=seed, selection="final checkpoint")
            runs.append(run_dir)
        artifacts = report(runs, os.path.join(tmp_path, "report"))
        summary = pd.read_csv(artifacts["csv"])
        assert list(summary.columns) == ["protocol", "target", "mean", "std", "n_runs"]
        assert set(summary["target"]) == { "sketch", "average" }
        with open(artifacts["markdown"], encoding="utf-8") as f:
            markdown = f.read()
        assert "## single_dg" in markdown and "Model selection: final checkpoint." in markdown
        assert len(nbformat.read(artifacts["notebook"], as_version=4).cells) > 0

    def test_run_without_records(self, tmp_path):
        empty = os.path.join(tmp_path, "empty")
        os.makedirs(empty)
        with pytest.raises(ClfaError) as e:
            report([empty], os.path.join(tmp_path, "report"))
        assert e.value.type == ErrorType.DATA


class TestProtocols:

    def test_leave_one_domain_out(self, make_config, synthetic_splits, tmp_path):
        test = synthetic_splits["test"]
        domains = {
            name: test.subset(np.flatnonzero(np.arange(len(test)) % 3 == i), name=name)
            for i, name in enumerate(("art", "photo", "sketch"))
        }
        out = str(tmp_path)
        combined = leave_one_domain_out(make_config(max_iters=2), domains, out, progress=False)
        assert combined.protocol == N.LEAVE_ONE_OUT
        assert list(combined.per_target) == ["art", "photo", "sketch"]
        assert combined.selection == "final checkpoint"
        for name in domains:
            assert RUNS.records(os.path.join(out, name), MetricsRecord)[0].per_target[name] == combined.per_target[name]
        assert RUNS.records(out, MetricsRecord)[0].average == pytest.approx(combined.average)

    def test_leave_one_domain_out_selects_on_validation(self, make_config, synthetic_splits, tmp_path):
        test = synthetic_splits["test"]
        domains = { "a": test.subset(range(0, 60, 2), name="a"), "b": test.subset(range(1, 60, 2), name="b") }
        combined = leave_one_domain_out(make_config(max_iters=2, eval_every=1), domains, str(tmp_path), val_fraction=0.2, progress=False)
        assert combined.selection == "training-domain validation"

    def test_single_domain_rejected(self, make_config, train_ds, tmp_path):
        with pytest.raises(ClfaError) as e:
            leave_one_domain_out(make_config(), { "only": train_ds }, str(tmp_path), progress=False)
        assert e.value.type == ErrorType.DATA

    def test_variant_configs(self, make_config):
        cfg = make_config()
        baseline = variant_config(cfg, "baseline", 4)
        assert baseline.seed == 4 and not baseline.use_image_transforms
        assert (baseline.weights.alpha1, baseline.weights.alpha2, baseline.weights.alpha3) == (0.0, 0.0, 0.0)
        baseline_t = variant_config(cfg, "baseline_t", 4)
        assert baseline_t.use_image_transforms and baseline_t.weights.alpha2 == 0.0
        full = variant_config(cfg, "full", 4)
        assert full.weights == cfg.weights
        with pytest.raises(ClfaError):
            variant_config(cfg, "oracle", 0)

    def test_study_layout(self, make_config, synthetic_spec, tmp_path):
        runs = run_synthetic_shift_study(make_config(max_iters=2), synthetic_spec, [0], str(tmp_path))
        assert list(runs["variant"]) == ["baseline", "baseline_t", "full"]
        assert { "shifted_acc", "probe_f_c", "probe_f_b", "probe_full" } <= set(runs.columns)
        assert os.path.isfile(os.path.join(tmp_path, "study.csv"))
        summary = pd.read_csv(os.path.join(tmp_path, "study_summary.csv"))
        assert "shifted_acc_mean" in summary.columns
        kinds = [r.kind for r in RUNS.records(os.path.join(tmp_path, "full", "seed_0"))]
        assert kinds == ["MetricsRecord", "ProbeReport", "ProbeReport", "ProbeReport"]
