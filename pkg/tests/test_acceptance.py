"""Acceptance suite: every release criterion at its stated tolerance.

Each test prints one `ACCEPTANCE <n> (<name>): PASS|FAIL` line (run pytest
with -s or check captured output). Tolerances are pinned here, not shared
with the implementation.
"""

import csv
import json
import math
import time
from contextlib import contextmanager

import numpy as np
import pytest
from scipy import stats

from vgmine.attention import (
    AttentionMap,
    GlimpseStack,
    kl_divergence,
    l1_normalize,
    rank_correlation,
    rasterize,
    vqa_accuracy,
)
from vgmine.cli import main as cli_main
from vgmine.dataset import BoundingBox
from vgmine.miner import MinerConfig, label_to_dict, mine, read_labels
from vgmine.schedule import Schedule
from vgmine.toymodel import ToyConfig

from conftest import ALIASES, FIG3, GOLDEN, WORDNET_DIR
from corpusgen import random_corpus
from oracles import (
    brute_force_rasterize,
    finite_difference_check,
    kl_summation,
    random_toy_pair,
    reference_mine,
)


@contextmanager
def criterion(number, name):
    ok = False
    try:
        yield
        ok = True
    finally:
        print(f"ACCEPTANCE {number} ({name}): {'PASS' if ok else 'FAIL'}")


def _run(*argv) -> int:
    return cli_main([str(a) for a in argv])


MINE_ARGS = [
    "mine",
    "--regions", FIG3 / "regions.json",
    "--objects", FIG3 / "objects.json",
    "--qa", FIG3 / "qa.json",
    "--wordnet-dir", WORDNET_DIR,
    "--aliases", ALIASES,
]


def test_1_fig3_golden(tmp_path):
    with criterion(1, "Fig. 3 golden mini-corpus"):
        labels_path = tmp_path / "labels.ndjson"
        start = time.perf_counter()
        assert _run(*MINE_ARGS, "--out", labels_path) == 0
        elapsed = time.perf_counter() - start
        assert labels_path.read_bytes() == (GOLDEN / "fig3_labels.ndjson").read_bytes()

        labels = {lab.qa_id: lab for lab in read_labels(labels_path)}
        talking = labels["qa1"]
        assert talking.region_match_count == 2
        assert talking.region_boxes == [BoundingBox(100, 150, 420, 360)]
        counting = labels["qa2"]
        assert counting.is_counting
        assert counting.region_boxes == [] and len(counting.object_boxes) == 2

        maps_path = tmp_path / "maps.ndjson"
        assert _run("rasterize", "--labels", labels_path,
                    "--qa", FIG3 / "qa.json", "--out", maps_path) == 0
        rows = {(r["qa_id"], r["glimpse"]): r
                for r in map(json.loads, maps_path.read_text().splitlines())}
        assert rows[("qa2", 0)]["mask"] is True
        assert rows[("qa2", 1)]["mask"] is False
        assert elapsed < 1.0


def test_2_mining_oracle_equivalence(lexicon):
    with criterion(2, "mining equals brute-force reference on 200 corpora"):
        rng = np.random.default_rng(2024)
        cfg = MinerConfig()
        for _ in range(200):
            dataset = random_corpus(rng)
            ours = [label_to_dict(lab) for lab in mine(dataset, lexicon, cfg)]
            assert ours == reference_mine(dataset, lexicon, cfg)


def test_3_rasterization_oracle():
    with criterion(3, "rasterization per-cell oracle on 500 box sets"):
        rng = np.random.default_rng(33)
        for _ in range(500):
            img_w = int(rng.integers(14, 1200))
            img_h = int(rng.integers(14, 1200))
            boxes = []
            for _ in range(int(rng.integers(0, 7))):
                x0 = int(rng.integers(0, img_w))
                y0 = int(rng.integers(0, img_h))
                boxes.append(BoundingBox(
                    x0, y0,
                    x0 + int(rng.integers(1, img_w - x0 + 1)) - 1,
                    y0 + int(rng.integers(1, img_h - y0 + 1)) - 1))

            ours = rasterize(boxes, img_w, img_h, 14, 14)
            assert np.array_equal(
                ours.values, brute_force_rasterize(boxes, img_w, img_h, 14, 14))

            half = len(boxes) // 2
            split_sum = (rasterize(boxes[:half], img_w, img_h, 14, 14).values
                         + rasterize(boxes[half:], img_w, img_h, 14, 14).values)
            assert np.array_equal(ours.values, split_sum)

            shuffled = list(boxes)
            rng.shuffle(shuffled)
            assert np.array_equal(
                ours.values, rasterize(shuffled, img_w, img_h, 14, 14).values)

            if boxes:
                assert abs(l1_normalize(ours).values.sum() - 1.0) <= 1e-9


def test_4_schedule():
    with criterion(4, "cosine decay endpoints and monotonicity"):
        sched = Schedule(t_max=190_000)
        assert abs(sched.alpha(0) - 1.0) <= 1e-12
        assert abs(sched.alpha(190_000) - 0.0) <= 1e-12
        assert abs(sched.alpha(95_000) - 0.5) <= 1e-12
        samples = np.linspace(0, 190_000, 1000).astype(int)
        values = [sched.alpha(int(t)) for t in samples]
        assert all(a >= b for a, b in zip(values, values[1:]))


def test_5_gradient_check():
    with criterion(5, "analytic gradients vs central differences"):
        start = time.perf_counter()
        rng = np.random.default_rng(55)
        cfg = ToyConfig()
        sched = Schedule(t_max=100, mode="fixed", fixed_value=1.0)
        worst_entry = 0.0
        worst_tensor = 0.0
        for i in range(20):
            params, sample = random_toy_pair(rng, cfg, supervised=(i % 4 != 3))
            entry_rel, tensor_rel = finite_difference_check(params, sample, sched, 10)
            worst_entry = max(worst_entry, entry_rel)
            worst_tensor = max(worst_tensor, tensor_rel)
        elapsed = time.perf_counter() - start
        assert worst_entry < 1e-5
        assert worst_tensor < 1e-5
        assert elapsed < 30.0


def _final_metrics(path) -> dict:
    with open(path, newline="") as fp:
        rows = list(csv.DictReader(fp))
    return {k: float(v) for k, v in rows[-1].items()}


def test_6_directional_supervision_claim(tmp_path):
    with criterion(6, "attention supervision raises rank correlation by >= 0.2"):
        finals = {}
        for alpha in ("1", "0"):
            out = tmp_path / f"metrics_{alpha}.csv"
            start = time.perf_counter()
            assert _run("train-toy", "--alpha-mode", "fixed",
                        "--alpha-value", alpha, "--metrics-out", out) == 0
            assert time.perf_counter() - start < 120.0
            finals[alpha] = _final_metrics(out)
        gap = finals["1"]["rank_corr"] - finals["0"]["rank_corr"]
        assert gap >= 0.2


def test_7_metric_kernels():
    with criterion(7, "Spearman matches reference; accuracy is min(k/3, 1)"):
        rng = np.random.default_rng(77)
        for i in range(100):
            a = rng.uniform(0, 1, (14, 14))
            b = rng.uniform(0, 1, (14, 14))
            if i % 2:  # tie-heavy, like rasterized maps
                a = np.round(a * 5)
                b = np.round(b * 5)
            expected = stats.spearmanr(a.ravel(), b.ravel()).statistic
            ours = rank_correlation(AttentionMap(a), AttentionMap(b))
            assert abs(ours - expected) <= 1e-9

        identical = AttentionMap(rng.uniform(0, 1, (14, 14)))
        assert rank_correlation(identical, identical) == pytest.approx(1.0, abs=1e-12)
        reversed_map = AttentionMap(identical.values.max() + 1 - identical.values)
        assert rank_correlation(identical, reversed_map) == pytest.approx(-1.0, abs=1e-12)

        for k in range(11):
            refs = ["ans"] * k + [f"other{i}" for i in range(10 - k)]
            assert vqa_accuracy("ans", refs) == min(k / 3.0, 1.0)


def test_8_kl_divergence():
    with criterion(8, "KL identity, point-mass value, summation oracle"):
        rng = np.random.default_rng(88)

        values = rng.uniform(0.01, 1.0, (14, 14))
        p = GlimpseStack([l1_normalize(AttentionMap(values))], [True])
        assert abs(kl_divergence(p, p)) <= 1e-12

        point = np.zeros((14, 14))
        point[7, 7] = 1.0
        point_stack = GlimpseStack([AttentionMap(point, normalized=True)], [True])
        uniform = GlimpseStack(
            [AttentionMap(np.full((14, 14), 1 / 196.0), normalized=True)], [True])
        assert abs(kl_divergence(point_stack, uniform) - math.log(196)) <= 1e-9

        for _ in range(100):
            pv = rng.uniform(0, 1, (2, 14, 14))
            pv[rng.random((2, 14, 14)) < 0.25] = 0.0
            pv[:, 0, 0] += 0.01
            pv /= pv.sum(axis=(1, 2), keepdims=True)
            qv = rng.uniform(0.001, 1, (2, 14, 14))
            qv /= qv.sum(axis=(1, 2), keepdims=True)
            masks = [True, bool(rng.integers(2))]
            p = GlimpseStack([AttentionMap(pv[0], normalized=True),
                              AttentionMap(pv[1], normalized=True)], masks)
            q = GlimpseStack([AttentionMap(qv[0], normalized=True),
                              AttentionMap(qv[1], normalized=True)], [True, True])
            assert abs(kl_divergence(p, q) - kl_summation(pv, masks, qv)) <= 1e-12


def test_9_determinism(tmp_path):
    with criterion(9, "byte-identical repeated mine and train runs"):
        mine_outputs = []
        for name in ("m1", "m2"):
            out = tmp_path / f"{name}.ndjson"
            assert _run(*MINE_ARGS, "--out", out) == 0
            mine_outputs.append(
                out.read_bytes()
                + out.with_name(out.name + ".manifest.json").read_bytes())
        assert mine_outputs[0] == mine_outputs[1]

        train_outputs = []
        for name in ("t1", "t2"):
            metrics = tmp_path / f"{name}.csv"
            params = tmp_path / f"{name}_params.ndjson"
            assert _run("train-toy", "--seed", 7, "--steps", 120,
                        "--metrics-out", metrics, "--params-out", params) == 0
            train_outputs.append(metrics.read_bytes() + params.read_bytes())
        assert train_outputs[0] == train_outputs[1]
