import numpy as np
import pytest

from dbdkit.core import validate_manifest
from dbdkit.errors import EmbeddingFileError, ValidationError
from dbdkit.ingest import (
    BoxAnnotation,
    RegionAnnotation,
    build_partitions,
    caption_partitions,
    load_annotations,
    load_captions,
    position_size_profile,
    read_embeddings,
    read_manifest,
    save_annotations,
    segment_caption,
    sidecar_path,
    write_embeddings,
    write_manifest,
)


class TestEmbeddingFile:
    def test_round_trip_is_bitwise(self, tmp_path):
        rng = np.random.default_rng(0)
        data = rng.normal(size=(3, 768)).astype(np.float32)
        path = tmp_path / "img.dbde"
        write_embeddings(data, path)
        back = read_embeddings(path)
        assert back.dtype == np.float32
        assert back.shape == (3, 768)
        assert back.tobytes() == data.tobytes()

    def test_empty_count_is_valid(self, tmp_path):
        path = tmp_path / "empty.dbde"
        write_embeddings(np.zeros((0, 5), dtype=np.float32), path)
        back = read_embeddings(path)
        assert back.shape == (0, 5)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.dbde"
        write_embeddings(np.ones((1, 2), dtype=np.float32), path)
        raw = bytearray(path.read_bytes())
        raw[:4] = b"NOPE"
        path.write_bytes(bytes(raw))
        with pytest.raises(EmbeddingFileError, match="magic"):
            read_embeddings(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "short.dbde"
        write_embeddings(np.ones((2, 4), dtype=np.float32), path)
        raw = path.read_bytes()
        path.write_bytes(raw[:-3])
        with pytest.raises(EmbeddingFileError, match="payload"):
            read_embeddings(path)

    def test_trailing_garbage_rejected(self, tmp_path):
        path = tmp_path / "long.dbde"
        write_embeddings(np.ones((2, 4), dtype=np.float32), path)
        path.write_bytes(path.read_bytes() + b"xx")
        with pytest.raises(EmbeddingFileError):
            read_embeddings(path)

    def test_unsupported_version(self, tmp_path):
        path = tmp_path / "vers.dbde"
        write_embeddings(np.ones((1, 2), dtype=np.float32), path)
        raw = bytearray(path.read_bytes())
        raw[4] = 99
        path.write_bytes(bytes(raw))
        with pytest.raises(EmbeddingFileError, match="version"):
            read_embeddings(path)

    def test_manifest_file_round_trip(self, tmp_path):
        manifest = caption_partitions("A man. A dog.")
        path = sidecar_path(tmp_path / "cap.dbde")
        write_manifest(manifest, path)
        assert read_manifest(path) == manifest


class TestSegmentCaption:
    def test_two_sentences_plus_full(self):
        text = "A man. A dog."
        segments = segment_caption(text)
        assert [s for _, s in segments] == ["A man.", "A dog.", "A man. A dog."]

    def test_unterminated_text_is_one_segment(self):
        segments = segment_caption("Hello")
        assert [s for _, s in segments] == ["Hello", "Hello"]

    def test_question_and_exclamation(self):
        segments = segment_caption("Is it red? Yes!")
        assert [s for _, s in segments] == ["Is it red?", "Yes!", "Is it red? Yes!"]

    def test_spans_index_the_original_text(self):
        text = "  One.  Two here!  Three?  "
        segments = segment_caption(text)
        for (start, end), piece in segments:
            assert text[start:end] == piece

    def test_sentence_spans_ordered_disjoint_with_whitespace_gaps(self):
        text = "First one.   Second, longer one!  Tail without stop"
        sentence_spans = [span for span, _ in segment_caption(text)[:-1]]
        for (s1, e1), (s2, e2) in zip(sentence_spans, sentence_spans[1:]):
            assert e1 <= s2
            assert text[e1:s2].strip() == ""

    def test_abbreviation_like_runs_do_not_split(self):
        # terminators not followed by whitespace stay inside the segment
        segments = segment_caption("Wow!! Done.")
        assert [s for _, s in segments][:-1] == ["Wow!!", "Done."]

    def test_empty_text_rejected(self):
        with pytest.raises(ValueError):
            segment_caption("")


class TestCaptionPartitions:
    def test_entry_kinds_and_spans(self):
        text = "A man. A dog."
        manifest = caption_partitions(text, item="cap-1")
        kinds = [e.kind for e in manifest.entries]
        assert kinds == ["sentence", "sentence", "full"]
        assert manifest.entries[-1].span == (0, len(text))
        assert [e.embedding_index for e in manifest.entries] == [0, 1, 2]
        assert validate_manifest(manifest) == []


def box(bid, bbox, names):
    return BoxAnnotation(box_id=bid, bbox=bbox, names=names)


class TestRegionAnnotations:
    def test_bbox_must_fit(self):
        with pytest.raises(ValidationError):
            RegionAnnotation(image_id="x", width=10, height=10,
                             objects=(box("o1", (5, 5, 10, 2), ("cat",)),))

    def test_names_required(self):
        with pytest.raises(ValidationError):
            box("o1", (0, 0, 1, 1), ())

    def test_round_trip_via_file(self, tmp_path):
        ann = RegionAnnotation(
            image_id="img-7", width=100, height=80,
            regions=(box("r1", (0, 0, 50, 40), ("table",)),),
            objects=(box("o1", (10, 10, 20, 20), ("cat", "kitten")),),
        )
        path = tmp_path / "ann.json"
        save_annotations([ann], path)
        assert load_annotations(path) == [ann]


class TestBuildPartitions:
    def test_zero_regions_still_has_full_entry(self):
        ann = RegionAnnotation(image_id="i", width=10, height=10)
        manifest = build_partitions(ann)
        assert len(manifest.entries) == 1
        entry = manifest.entries[0]
        assert entry.kind == "full"
        assert entry.bbox == (0.0, 0.0, 10.0, 10.0)

    def test_counts_regions_objects_full(self):
        ann = RegionAnnotation(
            image_id="i", width=100, height=100,
            regions=(box("r1", (0, 0, 10, 10), ("a",)), box("r2", (5, 5, 10, 10), ("b",))),
            objects=(box("o1", (1, 1, 2, 2), ("c",)),),
        )
        manifest = build_partitions(ann)
        assert len(manifest.entries) == 4
        assert validate_manifest(manifest) == []

    def test_order_is_regions_then_objects_then_full(self):
        ann = RegionAnnotation(
            image_id="i", width=100, height=100,
            regions=(box("r1", (0, 0, 10, 10), ("a",)), box("r2", (5, 5, 10, 10), ("b",))),
            objects=(box("o1", (1, 1, 2, 2), ("c",)),),
        )
        manifest = build_partitions(ann)
        assert [e.id for e in manifest.entries] == ["region:r1", "region:r2", "object:o1", "image:full"]
        assert [e.embedding_index for e in manifest.entries] == [0, 1, 2, 3]
        # deterministic and order-stable
        assert build_partitions(ann) == manifest


class TestPositionSizeProfile:
    def test_first_word_full_image_object(self):
        ann = RegionAnnotation(image_id="i", width=100, height=100,
                               objects=(box("o1", (0, 0, 100, 100), ("box",)),))
        profile = position_size_profile(["box here"], [ann], bins=4)
        assert profile[0].count == 1
        assert profile[0].mean_area == pytest.approx(1.0)
        assert all(b.count == 0 and b.mean_area is None for b in profile[1:])

    def test_quarter_area_contribution(self):
        ann = RegionAnnotation(image_id="i", width=100, height=100,
                               objects=(box("o1", (0, 0, 50, 50), ("cat",)),))
        profile = position_size_profile(["cat naps"], [ann], bins=2)
        assert profile[0].mean_area == pytest.approx(0.25)

    def test_plural_and_case_matching(self):
        ann = RegionAnnotation(image_id="i", width=10, height=10,
                               objects=(box("o1", (0, 0, 5, 5), ("dog",)),))
        profile = position_size_profile(["Dogs sleep"], [ann], bins=1)
        assert profile[0].count == 1

    def test_multiple_boxes_same_name_average(self):
        ann = RegionAnnotation(
            image_id="i", width=10, height=10,
            objects=(box("o1", (0, 0, 10, 10), ("cup",)),
                     box("o2", (0, 0, 5, 10), ("cup",))),
        )
        profile = position_size_profile(["cup shown"], [ann], bins=1)
        assert profile[0].mean_area == pytest.approx((1.0 + 0.5) / 2)

    def test_planted_trend_is_strictly_decreasing(self):
        words, objects = [], []
        n = 10
        for i in range(n):
            name = f"thing{i}"
            words.append(name)
            size = 100 - 9 * i
            objects.append(box(f"o{i}", (0, 0, size, 100), (name,)))
        ann = RegionAnnotation(image_id="i", width=100, height=100, objects=tuple(objects))
        profile = position_size_profile([" ".join(words)], [ann], bins=5)
        means = [b.mean_area for b in profile]
        assert all(m is not None for m in means)
        assert all(b < a for a, b in zip(means, means[1:]))

    def test_unmatched_words_report_empty_bins(self):
        ann = RegionAnnotation(image_id="i", width=10, height=10,
                               objects=(box("o1", (0, 0, 5, 5), ("zebra",)),))
        profile = position_size_profile(["nothing matches here"], [ann], bins=3)
        assert all(b.count == 0 for b in profile)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            position_size_profile(["a"], [], bins=2)


class TestLoadCaptions:
    def test_plain_text_lines(self, tmp_path):
        path = tmp_path / "caps.txt"
        path.write_text("first caption\n\nsecond caption\n", encoding="utf-8")
        assert load_captions(path) == ["first caption", "second caption"]

    def test_json_list(self, tmp_path):
        path = tmp_path / "caps.json"
        path.write_text('["one", "two"]', encoding="utf-8")
        assert load_captions(path) == ["one", "two"]
