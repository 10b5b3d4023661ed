"""Acceptance gate: ten end-to-end checks, one test per criterion.

Every test validates against an oracle that is independent of the library
code (closed-form values, brute-force reimplementations, or external
fixtures) and prints a single PASS line on success. Criterion 8 runs a
full synthetic study and takes a few minutes; everything else is fast.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest

from takeover import (baselines, cli, dsp, features, hrv, labeling, metrics,
                      nn, sampling, synth)

DATA_DIR = Path(__file__).parent / "data"


def _pass(num: int, detail: str) -> None:
    print(f"ACCEPTANCE {num:02d} PASS - {detail}")


# --------------------------------------------------------------------------
# 1. analytic gradients vs central differences


def _numeric_gradient(net, X, y, h=1e-6):
    w_grads = [np.zeros_like(w) for w in net.weights]
    b_grads = [np.zeros_like(b) for b in net.biases]
    for param, grad in zip(net.weights + net.biases, w_grads + b_grads):
        flat_p = param.ravel()
        flat_g = grad.ravel()
        for i in range(flat_p.size):
            keep = flat_p[i]
            flat_p[i] = keep + h
            up = nn.loss_and_grad(net, X, y)[0]
            flat_p[i] = keep - h
            down = nn.loss_and_grad(net, X, y)[0]
            flat_p[i] = keep
            flat_g[i] = (up - down) / (2.0 * h)
    return w_grads, b_grads


def test_c01_gradient_oracle():
    rng = np.random.default_rng(20260815)
    started = time.perf_counter()
    worst = 0.0
    for trial in range(100):
        in_dim = int(rng.integers(4, 9))
        out_dim = int(rng.integers(2, 5))
        hidden = (int(rng.integers(4, 8)), int(rng.integers(3, 6)))
        cfg = nn.NetworkConfig(input_dim=in_dim, output_dim=out_dim,
                               hidden_dims=hidden, seed=trial)
        net = nn.init_network(cfg)
        # zero biases can park a pre-activation exactly on the ReLU kink
        # (a dead previous layer feeds a zero vector in); nudge them off
        for b in net.biases:
            b += rng.normal(0.0, 0.1, size=b.shape)
        batch = int(rng.integers(3, 7))
        X = rng.normal(0.0, 1.0, size=(batch, in_dim))
        y = rng.integers(0, out_dim, size=batch)
        y[0] = 0
        y[-1] = out_dim - 1
        _, aw, ab = nn.loss_and_grad(net, X, y)
        nw, nb = _numeric_gradient(net, X, y)
        for a, n in zip(aw + ab, nw + nb):
            rel = np.abs(a - n) / np.maximum(1.0, np.maximum(np.abs(a), np.abs(n)))
            worst = max(worst, float(rel.max()))
    elapsed = time.perf_counter() - started
    assert worst < 1e-4, f"max relative gradient error {worst:.3e}"
    assert elapsed < 30.0, f"gradient sweep took {elapsed:.1f}s"
    _pass(1, f"100 networks, max rel err {worst:.2e} in {elapsed:.1f}s")


# --------------------------------------------------------------------------
# 2. classification metrics vs brute-force reimplementations


def _brute_weighted_f1(y_true, y_pred, n_classes):
    n = len(y_true)
    total = 0.0
    for c in range(n_classes):
        tp = sum(1 for t, p in zip(y_true, y_pred) if t == c and p == c)
        fp = sum(1 for t, p in zip(y_true, y_pred) if t != c and p == c)
        fn = sum(1 for t, p in zip(y_true, y_pred) if t == c and p != c)
        support = tp + fn
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / support if support else 0.0
        f1 = (2 * precision * recall / (precision + recall)
              if precision + recall else 0.0)
        total += f1 * support / n
    return total


def _brute_auc(scores, positives):
    pos = [s for s, p in zip(scores, positives) if p]
    neg = [s for s, p in zip(scores, positives) if not p]
    wins = 0.0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                wins += 1.0
            elif sp == sn:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def test_c02_metric_oracles():
    rng = np.random.default_rng(77)
    worst = 0.0
    for trial in range(1000):
        n_classes = int(rng.integers(2, 5))
        n = int(rng.integers(20, 80))
        y_true = np.concatenate([np.arange(n_classes),
                                 rng.integers(0, n_classes, size=n - n_classes)])
        rng.shuffle(y_true)
        y_pred = rng.integers(0, n_classes, size=n)
        scores = rng.random((n, n_classes))
        if trial % 3 == 0:  # induce score ties to exercise the half-count rule
            scores = np.round(scores, 1)
        names = tuple(f"c{i}" for i in range(n_classes))
        preds = metrics.PredictionSet(y_true, y_pred, None, names)

        got_acc = metrics.accuracy(preds)
        want_acc = sum(1 for t, p in zip(y_true, y_pred) if t == p) / n
        worst = max(worst, abs(got_acc - want_acc))

        got_f1 = metrics.weighted_f1(preds)
        want_f1 = _brute_weighted_f1(list(y_true), list(y_pred), n_classes)
        worst = max(worst, abs(got_f1 - want_f1))

        for c in range(n_classes):
            mask = y_true == c
            if 0 < mask.sum() < n:
                got = metrics.binary_auc(scores[:, c], mask)
                want = _brute_auc(list(scores[:, c]), list(mask))
                worst = max(worst, abs(got - want))
    assert worst < 1e-9, f"max metric deviation {worst:.3e}"
    _pass(2, f"1000 prediction sets, max deviation {worst:.2e}")


# --------------------------------------------------------------------------
# 3. filter behavior against closed-form first/second order responses


def test_c03_dsp_oracles():
    rate = 256.0
    t = np.arange(int(60 * rate)) / rate
    settle = slice(int(10 * rate), None)

    const = dsp.TimeSeries("ppg", rate, 0.0, np.ones(t.size))
    hp = dsp.butterworth_filter(const, dsp.PPG_HIGH_PASS)
    dc_leak = float(np.abs(hp.values[settle]).max())
    assert dc_leak < 1e-3, f"high-pass DC leak {dc_leak:.2e}"

    lp = dsp.butterworth_filter(const, dsp.PPG_LOW_PASS)
    dc_gain = float(np.abs(lp.values[settle]).mean())
    assert abs(dc_gain - 1.0) < 1e-3, f"low-pass DC gain {dc_gain:.6f}"

    sine = dsp.TimeSeries("ppg", rate, 0.0, np.sin(2 * np.pi * 10.0 * t))
    out = dsp.butterworth_filter(sine, dsp.PPG_LOW_PASS)
    gain = float(np.sqrt(np.mean(out.values[settle] ** 2)) /
                 np.sqrt(np.mean(sine.values[settle] ** 2)))
    analytic = 1.0 / np.sqrt(1.0 + (10.0 / 6.0) ** 2)  # 0.5145
    assert abs(gain - analytic) / analytic < 0.02, (
        f"10 Hz gain {gain:.4f} vs analytic {analytic:.4f}")

    rng = np.random.default_rng(5)
    x = rng.normal(size=t.size)
    y = rng.normal(size=t.size)
    for spec in (dsp.PPG_HIGH_PASS, dsp.PPG_LOW_PASS):
        mixed = dsp.butterworth_filter(
            dsp.TimeSeries("ppg", rate, 0.0, 2.5 * x - 1.25 * y), spec).values
        parts = (2.5 * dsp.butterworth_filter(dsp.TimeSeries("ppg", rate, 0.0, x), spec).values
                 - 1.25 * dsp.butterworth_filter(dsp.TimeSeries("ppg", rate, 0.0, y), spec).values)
        assert float(np.abs(mixed - parts).max()) < 1e-9
    _pass(3, f"DC leak {dc_leak:.1e}, DC gain {dc_gain:.6f}, "
             f"10 Hz gain {gain:.4f} (analytic {analytic:.4f})")


# --------------------------------------------------------------------------
# 4. HRV formulas on random trains plus a physical pulse recovery


def _reference_hrv(rr_ms):
    n = len(rr_ms)
    mean = sum(rr_ms) / n
    sdnn = (sum((r - mean) ** 2 for r in rr_ms) / (n - 1)) ** 0.5
    diffs = [rr_ms[i + 1] - rr_ms[i] for i in range(n - 1)]
    rmssd = (sum(d * d for d in diffs) / len(diffs)) ** 0.5
    pnn50 = 100.0 * sum(1 for d in diffs if abs(d) > 50.0) / len(diffs)
    return sdnn, rmssd, pnn50


def test_c04_hrv_oracles():
    rng = np.random.default_rng(404)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(3, 40))
        rr = rng.uniform(400.0, 1500.0, size=n)
        beats = hrv.BeatTrain(np.concatenate(([0.0], np.cumsum(rr / 1000.0))))
        got = hrv.hrv_metrics(beats)
        sdnn, rmssd, pnn50 = _reference_hrv(list(rr))
        for a, b in ((got.sdnn_ms, sdnn), (got.rmssd_ms, rmssd),
                     (got.pnn50_pct, pnn50)):
            worst = max(worst, abs(a - b) / max(1.0, abs(b)))
    assert worst < 1e-9, f"max HRV deviation {worst:.3e}"

    rate = 256.0
    period = 0.8  # 75 bpm
    t = np.arange(int(20.0 * rate)) / rate
    pulse = np.zeros(t.size)
    centers = np.arange(0.5, 19.5, period)
    for c in centers:
        pulse += np.exp(-((t - c) / 0.05) ** 2)
    # end right after the last pulse: the envelope threshold is relative,
    # so a long pulse-free tail would promote its own ripple to beats
    last = int((centers[-1] + 0.3) * rate)
    series = dsp.TimeSeries("ppg", rate, 0.0,
                            pulse[:last] + 0.05 * np.sin(2 * np.pi * 1.7 * t[:last]))
    beats = hrv.detect_beats(series)
    mean_rr = float(np.mean(beats.rr_intervals_ms()))
    assert abs(mean_rr - 800.0) <= 1000.0 / rate, f"mean RR {mean_rr:.2f} ms"
    _pass(4, f"1000 RR trains max dev {worst:.2e}; 75 bpm mean RR {mean_rr:.2f} ms")


# --------------------------------------------------------------------------
# 5. exhaustive label sweep with exact boundary semantics


def test_c05_label_boundaries():
    grid = [i / 100 for i in range(2001)]  # 0.00 .. 20.00
    time3 = [labeling.label_time3(v) for v in grid]
    time5 = [labeling.label_time5(v) for v in grid]
    assert set(time3) == {"low", "medium", "high"}
    assert set(time5) == {"lowest", "low", "medium", "high", "highest"}

    coarse_of_fine = {"lowest": "low", "low": "low", "medium": "medium",
                      "high": "medium", "highest": "high"}
    assert all(coarse_of_fine[f] == c for f, c in zip(time5, time3))

    counts3 = {c: time3.count(c) for c in ("low", "medium", "high")}
    assert counts3 == {"low": 260, "medium": 351, "high": 1390}
    counts5 = {c: time5.count(c)
               for c in ("lowest", "low", "medium", "high", "highest")}
    assert counts5 == {"lowest": 150, "low": 110, "medium": 210,
                       "high": 141, "highest": 1390}

    eps = 1e-12
    assert labeling.label_time5(1.5) == "low"
    assert labeling.label_time5(1.5 - eps) == "lowest"
    assert labeling.label_time5(2.6) == "medium"
    assert labeling.label_time5(2.6 - eps) == "low"
    assert labeling.label_time5(4.7) == "high"
    assert labeling.label_time5(4.7 - eps) == "medium"
    assert labeling.label_time5(6.1) == "high"
    assert labeling.label_time5(6.1 + eps) == "highest"
    assert labeling.label_time3(2.6) == "medium"
    assert labeling.label_time3(2.6 - eps) == "low"
    assert labeling.label_time3(6.1) == "medium"
    assert labeling.label_time3(6.1 + eps) == "high"

    quality = [labeling.label_quality(i / 100) for i in range(1201)]
    assert set(quality) == {"low", "high", "medium"}
    assert labeling.label_quality(3.5) == "high"
    assert labeling.label_quality(3.5 - eps) == "low"
    assert labeling.label_quality(7.0) == "high"
    assert labeling.label_quality(7.0 + eps) == "medium"
    _pass(5, "2001-point sweep partitions; boundaries 1.5/2.6/4.7/6.1 and "
             "3.5/7 exact")


# --------------------------------------------------------------------------
# 6. SMOTE balance and segment membership against a brute neighbor oracle


def _segment_membership(synth_row, originals, neighbor_lists):
    for i, neighbors in enumerate(neighbor_lists):
        base = originals[i]
        for j in neighbors:
            d = originals[j] - base
            denom = float(d @ d)
            if denom == 0.0:
                if np.abs(synth_row - base).max() <= 1e-9:
                    return True
                continue
            lam = float((synth_row - base) @ d) / denom
            if -1e-9 <= lam <= 1.0 + 1e-9:
                resid = synth_row - base - lam * d
                if np.abs(resid).max() <= 1e-9:
                    return True
    return False


def test_c06_smote_oracle():
    for seed, counts in ((0, (350, 100, 50)), (1, (300, 150, 50)),
                         (2, (250, 200, 50))):
        rng = np.random.default_rng(seed)
        dim = 8
        X = np.concatenate([rng.normal(c, 1.0, size=(m, dim))
                            for c, m in enumerate(counts)])
        y = np.concatenate([np.full(m, c, dtype=int)
                            for c, m in enumerate(counts)])
        n = int(sum(counts))
        ds = sampling.LabeledDataset(
            X=X, y=y, groups=tuple(f"s{i % 7}" for i in range(n)),
            event_ids=tuple(f"e{i}" for i in range(n)),
            class_names=tuple("abc"), feature_names=tuple(f"f{i}" for i in range(dim)))
        out = sampling.smote(ds, k=5, seed=seed)

        histogram = [int((out.y == c).sum()) for c in range(3)]
        assert histogram == [max(counts)] * 3, histogram

        for c, m in enumerate(counts):
            originals = X[y == c]
            k_eff = min(5, m - 1)
            neighbor_lists = []
            for i in range(m):
                d = np.linalg.norm(originals - originals[i], axis=1)
                order = [j for j in np.argsort(d, kind="stable") if j != i]
                neighbor_lists.append(order[:k_eff])
            synth_rows = out.X[len(ds):][out.y[len(ds):] == c]
            assert len(synth_rows) == max(counts) - m
            for row in synth_rows:
                assert _segment_membership(row, originals, neighbor_lists), (
                    f"seed {seed} class {c}: synthetic off every k-NN segment")
    _pass(6, "3 imbalanced 500-row sets: uniform histograms, every synthetic "
             "on a verified neighbor segment (1e-9)")


# --------------------------------------------------------------------------
# 7. grouped splits: subject exclusivity and exact k-fold partitions


def test_c07_split_exclusivity():
    rng = np.random.default_rng(9)
    groups = []
    for g in range(23):
        groups.extend([f"subj{g:02d}"] * int(rng.integers(3, 9)))
    n = len(groups)
    ds = sampling.LabeledDataset(
        X=rng.normal(size=(n, 4)), y=rng.integers(0, 3, size=n),
        groups=tuple(groups), event_ids=tuple(f"e{i}" for i in range(n)),
        class_names=tuple("abc"), feature_names=("f0", "f1", "f2", "f3"))
    by_id = {f"e{i}": groups[i] for i in range(n)}

    for seed in range(100):
        plan = sampling.grouped_split(ds, seed=seed)
        parts = [set(plan.train_ids), set(plan.val_ids), set(plan.test_ids)]
        assert sum(len(p) for p in parts) == n
        assert set.union(*parts) == set(by_id)
        subject_sets = [{by_id[e] for e in part} for part in parts]
        assert not (subject_sets[0] & subject_sets[1])
        assert not (subject_sets[0] & subject_sets[2])
        assert not (subject_sets[1] & subject_sets[2])

    for seed in range(10):
        plans = sampling.grouped_kfold(ds, folds=10, seed=seed)
        assert len(plans) == 10
        test_ids = [set(p.test_ids) for p in plans]
        for i, a in enumerate(test_ids):
            for b in test_ids[i + 1:]:
                assert not (a & b)
        assert set.union(*test_ids) == set(by_id)
        for plan in plans:
            assert set(plan.train_ids) | set(plan.test_ids) == set(by_id)
            held = {by_id[e] for e in plan.test_ids}
            kept = {by_id[e] for e in plan.train_ids}
            assert not (held & kept)
    _pass(7, "100 seeded splits subject-exclusive; 10-fold partitions exact")


# --------------------------------------------------------------------------
# 8. end-to-end synthetic benchmark


def _benchmark(spec: synth.SessionSpec, task: str, seed: int):
    session = synth.generate(spec)
    events_by_id = {e.event_id: e for e in session.events}
    matrix, _ = features.session_matrix(session.trials, session.events,
                                        session.surveys)
    matrix = features.drop_sparse_columns(matrix)

    classes = labeling.task_classes(task)
    rows, labels, groups = [], [], []
    for i, eid in enumerate(matrix.event_ids):
        event = events_by_id[eid]
        name = labeling.task_label(labeling.label_event(event), task)
        if name is None:
            continue
        rows.append(i)
        labels.append(classes.index(name))
        groups.append(event.subject_id)
    labeled = matrix.subset(rows)
    labels = np.asarray(labels)

    skeleton = sampling.LabeledDataset(
        X=labeled.numeric, y=labels, groups=tuple(groups),
        event_ids=labeled.event_ids, class_names=classes,
        feature_names=labeled.numeric_names)
    plan = sampling.grouped_split(skeleton, seed=seed)
    transform, fused = features.fit_transform(labeled, train_ids=plan.train_ids)
    dataset = sampling.LabeledDataset(
        X=fused, y=labels, groups=tuple(groups), event_ids=labeled.event_ids,
        class_names=classes, feature_names=transform.fused_names,
        indicator_groups=transform.indicator_groups)

    train_set = dataset.subset(sampling.rows_for_ids(dataset, plan.train_ids))
    val_set = dataset.subset(sampling.rows_for_ids(dataset, plan.val_ids))
    test_set = dataset.subset(sampling.rows_for_ids(dataset, plan.test_ids))
    balanced = sampling.smote(train_set, seed=seed)

    cfg = nn.NetworkConfig(input_dim=fused.shape[1], output_dim=len(classes),
                           seed=seed)
    network, _ = nn.train(balanced.X, balanced.y, val_set.X, val_set.y, cfg)
    probs = nn.forward(network, test_set.X)
    dnn_acc = float(np.mean(np.argmax(probs, axis=1) == test_set.y))

    logistic = baselines.fit_logistic(balanced.X, balanced.y, l2=1e-3)
    lr_pred, _ = baselines.predict_logistic(logistic, test_set.X)
    lr_acc = float(np.mean(lr_pred == test_set.y))
    return dnn_acc, lr_acc, len(test_set)


def test_c08_benchmark():
    spec = synth.SessionSpec(n_subjects=17, trials_per_subject=3,
                             tors_per_trial=15, alarm_mix=(6, 3, 6),
                             separability=0.9, seed=42)
    started = time.perf_counter()
    dnn_acc, lr_acc, n_test = _benchmark(spec, "time3", seed=42)
    elapsed = time.perf_counter() - started
    assert dnn_acc >= 0.90, f"network accuracy {dnn_acc:.3f} on {n_test} rows"
    assert dnn_acc >= lr_acc, f"network {dnn_acc:.3f} < logistic {lr_acc:.3f}"
    assert elapsed < 300.0, f"benchmark took {elapsed:.0f}s"

    control_spec = synth.SessionSpec(n_subjects=17, trials_per_subject=2,
                                     tors_per_trial=12, alarm_mix=(5, 2, 5),
                                     separability=0.0, seed=43)
    control_acc, _, n_control = _benchmark(control_spec, "time3", seed=43)
    sigma = np.sqrt((1 / 3) * (2 / 3) / n_control)
    assert abs(control_acc - 1 / 3) <= 3 * sigma, (
        f"control accuracy {control_acc:.3f} outside 1/3 +- {3 * sigma:.3f} "
        f"(n={n_control})")
    _pass(8, f"network {dnn_acc:.3f} >= 0.90 and >= logistic {lr_acc:.3f} "
             f"in {elapsed:.0f}s; separability-0 control {control_acc:.3f} "
             f"within 1/3 +- {3 * sigma:.3f}")


# --------------------------------------------------------------------------
# 9. byte-level determinism of two identical seeded runs


def test_c09_determinism(tmp_path):
    spec_file = tmp_path / "spec.json"
    spec_file.write_text(json.dumps(synth.SessionSpec(
        n_subjects=5, trials_per_subject=1, tors_per_trial=6,
        alarm_mix=(2, 2, 2), separability=0.9, seed=11).to_dict()))
    cfg_file = tmp_path / "train.json"
    cfg_file.write_text(json.dumps({"network": {"max_epochs": 150}}))

    def run(tag: str) -> Path:
        root = tmp_path / tag
        assert cli.main(["generate", "--spec", str(spec_file),
                         "--out", str(root / "session")]) == 0
        assert cli.main(["features", "--data", str(root / "session"),
                         "--out", str(root / "features.csv")]) == 0
        assert cli.main(["train", "--config", str(cfg_file),
                         "--features", str(root / "features.csv"),
                         "--events", str(root / "session" / "events.csv"),
                         "--task", "intention", "--seed", "7",
                         "--out", str(root / "model")]) == 0
        assert cli.main(["eval", "--bundle", str(root / "model" / "bundle.json"),
                         "--features", str(root / "features.csv"),
                         "--events", str(root / "session" / "events.csv"),
                         "--out", str(root / "eval")]) == 0
        return root

    a = run("a")
    b = run("b")
    compared = []
    for rel in ("features.csv", "model/bundle.json", "model/split.json",
                "model/train_report.json", "eval/report.json",
                "eval/predictions.csv", "eval/roc.csv", "eval/confusion.csv",
                "eval/comparison.txt"):
        left = (a / rel).read_bytes()
        right = (b / rel).read_bytes()
        assert left == right, f"{rel} differs between identical runs"
        compared.append(rel)
    _pass(9, f"two seeded runs byte-identical across {len(compared)} artifacts")


# --------------------------------------------------------------------------
# 10. comparison-table rendering of externally published numbers


def test_c10_comparison_table_fixture():
    fixture = json.loads((DATA_DIR / "published_results.json").read_text())
    rows = [metrics.ComparisonRow(r["target"], r["classifier"], r["accuracy"],
                                  r["weighted_f1"], source="transcribed")
            for r in fixture["rows"]]
    text = metrics.comparison_table(rows)
    lines = text.splitlines()

    assert lines[0] == "Classification performance comparison"
    assert set(lines[1]) == {"="}
    header = lines[2].split()
    assert header == ["Target", "value", "Classifier", "Accuracy",
                      "W-F1", "score"]
    body = lines[4:4 + len(rows)]
    assert len(body) == 21

    # each target heads its own group exactly once
    for target in ("Takeover intention", "Takeover time", "Takeover quality"):
        assert sum(1 for line in body if line.startswith(target)) == 1

    for line, row in zip(body, rows):
        assert f"{row.classifier} *" in line, line  # transcribed rows starred
        assert f"{row.accuracy:.2f}" in line
        assert f"{row.weighted_f1:.2f}" in line
    assert lines[-1] == "* transcribed from previously published results"

    dnn = [line for line in body if "DNN *" in line]
    assert len(dnn) == 3
    assert "0.96" in dnn[0] and "0.93" in dnn[0]
    assert "0.93" in dnn[1] and "0.87" in dnn[1]
    assert "0.83" in dnn[2] and "0.78" in dnn[2]
    _pass(10, "21 transcribed rows render grouped, starred, two decimals, "
              "with source footnote")
