"""End-to-end handshake with the TypeScript bridge, when it has been built.

Build it first with ``cd bridge && npm install && npm run build``; these
tests are skipped otherwise.
"""

import shutil
import subprocess
from pathlib import Path

import pytest

from dbdkit.bridge_client import BridgeModel
from dbdkit.core import Candidate, SearchConfig, SelectionConfig
from dbdkit.ingest import read_embeddings, read_manifest, segment_caption, write_manifest
from dbdkit.core import PartitionEntry, PartitionManifest
from dbdkit.search import search, select_facts, summarize

BRIDGE_MAIN = Path(__file__).parent.parent / "bridge" / "dist" / "main.js"

pytestmark = pytest.mark.skipif(
    not BRIDGE_MAIN.exists() or shutil.which("node") is None,
    reason="TypeScript bridge not built (cd bridge && npm install && npm run build)",
)


@pytest.fixture
def bridge():
    model = BridgeModel(command=["node", str(BRIDGE_MAIN), "serve"])
    yield model
    model.close()


def test_expand_contract_over_real_bridge(bridge):
    ctx = bridge.open_context("describe the image", image="photo.jpg")
    assert bridge.vocab_size == 32
    exp = bridge.expand(ctx, Candidate(), 32)
    lps = [it.logprob for it in exp]
    assert lps == sorted(lps, reverse=True)
    top = bridge.expand(ctx, Candidate(), 1)
    assert top.items[0] == exp.items[0]


def test_full_decode_pipeline_over_real_bridge(bridge):
    cfg = SearchConfig(beams=3, top_k=4, alpha_schedule=((3, 10.0), (None, 5.0)),
                       max_steps=10)
    facts = search(bridge, cfg, prompt="probe", image=None)
    assert len(facts) >= 1
    selected = select_facts(facts, SelectionConfig(alpha=5.0, max_facts=5))
    summary = summarize(bridge, selected, max_tokens=12)
    assert not summary.used_fallback
    assert summary.tokens is not None
    # reproducible end to end
    assert search(bridge, cfg, prompt="probe", image=None) == facts


def test_caption_export_feeds_the_evaluator(bridge, tmp_path):
    text = "A man rides a horse. A dog watches."
    entries = []
    segments = segment_caption(text)
    for i, (span, _) in enumerate(segments[:-1]):
        entries.append(PartitionEntry(id=f"sentence:{i}", modality="caption",
                                      kind="sentence", embedding_index=i, span=span))
    entries.append(PartitionEntry(id="caption:full", modality="caption", kind="full",
                                  embedding_index=len(segments) - 1, span=(0, len(text))))
    manifest = PartitionManifest(entries=tuple(entries))
    manifest_path = tmp_path / "cap.manifest.json"
    write_manifest(manifest, manifest_path)
    caption_path = tmp_path / "cap.txt"
    caption_path.write_text(text, encoding="utf-8")

    out = tmp_path / "cap.dbde"
    result = subprocess.run(
        ["node", str(BRIDGE_MAIN), "export-caption", "--caption", str(caption_path),
         "--manifest", str(manifest_path), "--out", str(out)],
        capture_output=True, text=True,
    )
    assert result.returncode == 0, result.stderr
    embeddings = read_embeddings(out)
    assert embeddings.shape == (len(segments), 768)
    sidecar = read_manifest(Path(str(out) + ".manifest.json"))
    assert sidecar.dim == 768
