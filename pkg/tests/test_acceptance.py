"""Acceptance suite: one test per release criterion, at pinned tolerances.

Each test prints a single [ACCEPTANCE] pass/fail line; run with ``pytest -v``
(or ``-s`` to see the lines inline).
"""

import time
from contextlib import contextmanager

import numpy as np

from dbdkit.cli import main, parse_alpha_schedule
from dbdkit.core import (
    FactSet,
    PartitionEntry,
    PartitionManifest,
    SearchConfig,
    SelectionConfig,
    vdot,
)
from dbdkit.diffscore import pairwise_diff
from dbdkit.ingest import BoxAnnotation, RegionAnnotation, position_size_profile
from dbdkit.metrics import DEFAULT_KS, evaluate, plr
from dbdkit.models import ToyModel, greedy_decode, random_toy_spec, save_toy_spec
from dbdkit.presets import PRESETS
from dbdkit.search import alpha_at, search, select_facts, summarize
from dbdkit.selfcheck import terminating_toy_spec

from conftest import make_candidate, random_unit_avoiding_zero


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"[ACCEPTANCE] {name}: FAIL")
        raise
    print(f"[ACCEPTANCE] {name}: PASS")


def normal_equations_plr(a, B, k):
    """Independent oracle: top-k by cosine, projection via pseudo-inverse."""
    a = np.asarray(a, dtype=float)
    B = np.asarray(B, dtype=float)
    cos = (B @ a) / (np.linalg.norm(B, axis=1) * np.linalg.norm(a))
    idx = sorted(range(len(B)), key=lambda i: (-cos[i], i))[: min(k, len(B))]
    bk = B[idx].T
    proj = bk @ (np.linalg.pinv(bk) @ a)
    return float(np.linalg.norm(proj) / np.linalg.norm(a))


def random_matrix(rng, n, dim):
    m = rng.normal(size=(n, dim))
    while np.any(np.linalg.norm(m, axis=1) < 1e-6):
        m = rng.normal(size=(n, dim))
    return m


def test_plr_oracle_equivalence():
    with criterion("PLR oracle equivalence (200 instances, 1e-8, < 5 s)"):
        rng = np.random.default_rng(101)
        start = time.perf_counter()
        for _ in range(200):
            dim = int(rng.integers(2, 9))          # dim <= 8
            nb = int(rng.integers(1, 7))           # |B| <= 6
            k = int(rng.integers(1, 7))            # k in 1..6
            a = random_unit_avoiding_zero(rng, dim)
            B = random_matrix(rng, nb, dim)
            assert abs(plr(a, B, k) - normal_equations_plr(a, B, k)) <= 1e-8
        elapsed = time.perf_counter() - start
        assert elapsed < 5.0, f"took {elapsed:.2f} s"


def test_plr_degenerate_case_is_abs_cosine():
    with criterion("PLR degenerate case: plr(a,{b},1) == |cos| (1000 pairs, 1e-9)"):
        rng = np.random.default_rng(102)
        for _ in range(1000):
            dim = int(rng.integers(2, 9))
            a = random_unit_avoiding_zero(rng, dim)
            b = random_unit_avoiding_zero(rng, dim)
            want = abs(float(a @ b) / (np.linalg.norm(a) * np.linalg.norm(b)))
            assert abs(plr(a, [b], 1) - want) <= 1e-9


def test_plr_monotonicity_and_range():
    with criterion("PLR monotone in k and within [0,1] (200 instances, 1e-12)"):
        rng = np.random.default_rng(103)
        for _ in range(200):
            dim = int(rng.integers(2, 9))
            nb = int(rng.integers(1, 7))
            a = random_unit_avoiding_zero(rng, dim)
            B = random_matrix(rng, nb, dim)
            values = [plr(a, B, k) for k in range(1, nb + 1)]
            for v in values:
                assert -1e-12 <= v <= 1.0 + 1e-12
            for lo, hi in zip(values, values[1:]):
                assert lo <= hi + 1e-12


def _random_candidate(rng, dim):
    n = int(rng.integers(1, 9))
    hiddens = [random_unit_avoiding_zero(rng, dim) * float(rng.uniform(0.1, 5.0))
               for _ in range(n)]
    return make_candidate(hiddens, logprobs=[-0.25] * n)


def test_diffscore_identity_and_symmetry():
    with criterion("Diff-score identity vs brute force (500 pairs, 1e-9; symmetry exact)"):
        rng = np.random.default_rng(104)
        for _ in range(500):
            dim = int(rng.integers(2, 7))
            y1 = _random_candidate(rng, dim)
            y2 = _random_candidate(rng, dim)
            got = pairwise_diff(y1, y2)
            brute = 0.0
            for h in y1.hiddens:
                for g in y2.hiddens:
                    hv, gv = np.asarray(h), np.asarray(g)
                    brute += float(hv @ gv) / (np.linalg.norm(hv) * np.linalg.norm(gv))
            brute = -brute / (len(y1.hiddens) * len(y2.hiddens))
            assert abs(got - brute) <= 1e-9
            assert pairwise_diff(y1, y2) == pairwise_diff(y2, y1)


def test_greedy_reduction_over_random_toy_specs():
    with criterion("Greedy reduction: n=1, alpha=0 equals greedy (50 toy specs)"):
        rng = np.random.default_rng(105)
        for _ in range(50):
            spec = terminating_toy_spec(
                rng,
                max_steps=48,
                vocab_size=int(rng.integers(4, 12)),
                hidden_dim=3,
                order=int(rng.integers(0, 3)),
                eos_floor=0.3,
            )
            model = ToyModel(spec)
            config = SearchConfig(beams=1, top_k=int(rng.integers(1, 5)),
                                  alpha_schedule=((None, 0.0),), max_steps=48)
            greedy = greedy_decode(model, model.open_context("probe"), config.max_steps)
            facts = search(model, config, prompt="probe")
            assert len(facts) >= 1
            assert facts[0].tokens == greedy.tokens
            assert facts[0].logprob == greedy.logprob


def test_argmax_audit_of_recorded_steps():
    with criterion("Argmax audit: >= 50 recorded picks re-verified exactly"):
        rng = np.random.default_rng(106)
        records = []
        while len(records) < 50:
            spec = terminating_toy_spec(rng, vocab_size=8, hidden_dim=3,
                                        order=1, eos_floor=0.2)
            model = ToyModel(spec)
            config = SearchConfig(beams=3, top_k=4,
                                  alpha_schedule=((2, 8.0), (None, 3.0)), max_steps=10)
            search(model, config, trace=records)
        for record in records[:50]:
            remaining = list(record.pool)
            for pos, pick in enumerate(record.picks):
                refs = record.picks[:pos]

                def score(c):
                    if pos == 0 or record.alpha == 0.0:
                        return c.logprob
                    return c.logprob + record.alpha * sum(
                        -vdot(c.norm_mean, r.norm_mean) for r in refs
                    )

                values = [score(c) for c in remaining]
                best = max(values)
                assert score(pick) == best
                first = next(i for i, v in enumerate(values) if v == best)
                assert remaining[first] is pick
                remaining.pop(first)


def test_selection_contract():
    with criterion("Selection: first pick maximizes logprob/len; alpha=0 is a ranking"):
        rng = np.random.default_rng(107)
        for _ in range(30):
            facts = []
            for i in range(int(rng.integers(2, 9))):
                n = int(rng.integers(1, 7))
                hiddens = [random_unit_avoiding_zero(rng, 3) for _ in range(n)]
                lps = [float(-rng.uniform(0.05, 1.5)) for _ in range(n)]
                facts.append(make_candidate(hiddens, logprobs=lps,
                                            tokens=list(range(n)), finish=True))
            fact_set = FactSet(tuple(facts))

            chosen = select_facts(fact_set, SelectionConfig(alpha=5.0, max_facts=10))
            best_norm = max(f.logprob / len(f.tokens) for f in facts)
            assert chosen[0].logprob / len(chosen[0].tokens) == best_norm

            ranked = select_facts(fact_set, SelectionConfig(alpha=0.0, max_facts=4))
            want = sorted(facts, key=lambda f: f.logprob / len(f.tokens), reverse=True)[:4]
            assert list(ranked) == want


def test_decode_determinism_byte_identical(tmp_path):
    with criterion("Determinism: identical decode runs emit byte-identical facts"):
        spec = random_toy_spec(vocab_size=10, hidden_dim=4, order=1,
                               seed=1234, eos_floor=0.2)
        spec_path = tmp_path / "toy.spec.json"
        save_toy_spec(spec, spec_path)
        blobs = []
        for name in ("one", "two"):
            out = tmp_path / name
            code = main([
                "decode", "--model", str(spec_path),
                "--beams", "5", "--topk", "6", "--alpha", "10:3,5",
                "--max-steps", "20", "--seed", "7", "--out", str(out),
            ])
            assert code == 0
            blobs.append((out / "facts.json").read_bytes())
        assert blobs[0] == blobs[1]


def _two_sided_manifest(n_image, n_caption):
    entries = []
    for i in range(n_image):
        kind = "full" if i == n_image - 1 else "region"
        entries.append(PartitionEntry(id=f"img{i}", modality="image", kind=kind,
                                      embedding_index=i, bbox=(0, 0, 10, 10)))
    for i in range(n_caption):
        kind = "full" if i == n_caption - 1 else "sentence"
        entries.append(PartitionEntry(id=f"cap{i}", modality="caption", kind=kind,
                                      embedding_index=i, span=(0, 6)))
    return PartitionManifest(entries=tuple(entries), image_dims=(10, 10))


def test_metric_sanity():
    with criterion("Metric sanity: identical -> 1, orthogonal -> 0, ks {3,5,10}"):
        rng = np.random.default_rng(108)
        same = random_matrix(rng, 5, 32)
        report = evaluate(same, same.copy(), _two_sided_manifest(5, 5))
        assert sorted(report.per_k) == sorted(DEFAULT_KS) == [3, 5, 10]
        for s in report.per_k.values():
            assert abs(s.recall - 1.0) <= 1e-9
            assert abs(s.precision - 1.0) <= 1e-9
            assert abs(s.f1 - 1.0) <= 1e-9

        eye = np.eye(8)
        image, caption = eye[:4], eye[4:]
        report = evaluate(image, caption, _two_sided_manifest(4, 4))
        for s in report.per_k.values():
            assert abs(s.recall) <= 1e-9
            assert abs(s.precision) <= 1e-9
            assert abs(s.f1) <= 1e-9


def test_config_fidelity():
    with criterion("Config fidelity: published decode profiles load exactly"):
        standard = PRESETS["standard"]
        assert standard.search.beams == 5
        assert standard.search.top_k == 6
        assert standard.search.alpha_schedule == ((3, 10.0), (None, 5.0))
        for t in (1, 2, 3):
            assert alpha_at(standard.search, t) == 10.0
        for t in (4, 5, 100):
            assert alpha_at(standard.search, t) == 5.0

        wide = PRESETS["wide"]
        assert wide.search.beams == 7
        assert wide.search.top_k == 7
        assert wide.search.alpha_schedule == ((None, 4.0),)
        for t in (1, 2, 50):
            assert alpha_at(wide.search, t) == 4.0

        for preset in (standard, wide):
            assert preset.selection.alpha == 5.0
            assert preset.selection.max_facts == 10

        # the CLI flag syntax reproduces the stepped schedule exactly
        assert parse_alpha_schedule("10:3,5") == standard.search.alpha_schedule
        assert parse_alpha_schedule("4") == wide.search.alpha_schedule


def test_position_size_fixture_trend():
    with criterion("Position/size fixture: bin means strictly decreasing"):
        n_words, bins = 20, 10
        words, objects = [], []
        for i in range(n_words):
            name = f"item{i}"
            words.append(name)
            width = 100 - 4 * i  # plant early-large, late-small objects
            objects.append(BoxAnnotation(box_id=f"o{i}", bbox=(0, 0, width, 100),
                                         names=(name,)))
        ann = RegionAnnotation(image_id="fixture", width=100, height=100,
                               objects=tuple(objects))
        profile = position_size_profile([" ".join(words)], [ann], bins=bins)
        means = [b.mean_area for b in profile]
        assert all(m is not None for m in means)
        assert all(b.count > 0 for b in profile)
        assert all(later < earlier for earlier, later in zip(means, means[1:]))


def test_desk_scale_performance():
    with criterion("Desk-scale performance: toy pipeline + 50x768 metrics < 2 s"):
        start = time.perf_counter()

        spec = random_toy_spec(vocab_size=32, hidden_dim=16, order=1,
                               seed=999, eos_floor=0.15)
        model = ToyModel(spec)
        config = SearchConfig(beams=5, top_k=6,
                              alpha_schedule=((3, 10.0), (None, 5.0)), max_steps=20)
        facts = search(model, config)
        if len(facts):
            selected = select_facts(facts, SelectionConfig(alpha=5.0, max_facts=10))
            summarize(model, selected)

        rng = np.random.default_rng(109)
        image = random_matrix(rng, 50, 768)
        caption = random_matrix(rng, 50, 768)
        report = evaluate(image, caption, _two_sided_manifest(50, 50))
        assert sorted(report.per_k) == [3, 5, 10]

        elapsed = time.perf_counter() - start
        assert elapsed < 2.0, f"pipeline took {elapsed:.2f} s"
