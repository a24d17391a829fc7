#!/usr/bin/env python3
"""Best-effort converter from Visual Genome exports to dbdkit annotations.

Reads the dataset's native ``image_data.json``, ``region_descriptions.json``
and ``objects.json`` and emits the annotation schema consumed by
``dbdkit analyze-positions`` and ``dbdkit.ingest.load_annotations``.

Boxes are clamped to the image bounds (the raw export contains overshoots)
and degenerate boxes are dropped. Region names come from the region's object
list when present, falling back to the region phrase as a single name.

Usage:
    python scripts/convert_vg_annotations.py \
        --image-data image_data.json \
        --regions region_descriptions.json \
        --objects objects.json \
        --out annotations.json [--limit 500]
"""

import argparse
import json
import sys


def clamp_box(x, y, w, h, width, height):
    x = max(0.0, min(float(x), width))
    y = max(0.0, min(float(y), height))
    w = min(float(w), width - x)
    h = min(float(h), height - y)
    if w <= 0 or h <= 0:
        return None
    return (x, y, w, h)


def convert_regions(record, width, height):
    out = []
    for region in record.get("regions", []):
        bbox = clamp_box(region.get("x", 0), region.get("y", 0),
                         region.get("width", 0), region.get("height", 0),
                         width, height)
        if bbox is None:
            continue
        names = []
        for obj in region.get("objects", []):
            names.extend(obj.get("names", []))
            if obj.get("name"):
                names.append(obj["name"])
        if not names:
            phrase = (region.get("phrase") or "").strip()
            if not phrase:
                continue
            names = [phrase]
        out.append({
            "id": f"r{region.get('region_id', len(out))}",
            "bbox": list(bbox),
            "names": sorted(set(names)),
        })
    return out


def convert_objects(record, width, height):
    out = []
    for obj in record.get("objects", []):
        bbox = clamp_box(obj.get("x", 0), obj.get("y", 0),
                         obj.get("w", 0), obj.get("h", 0), width, height)
        if bbox is None:
            continue
        names = list(obj.get("names", []))
        if not names:
            continue
        out.append({
            "id": f"o{obj.get('object_id', len(out))}",
            "bbox": list(bbox),
            "names": sorted(set(names)),
        })
    return out


def main():
    parser = argparse.ArgumentParser(description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--image-data", required=True)
    parser.add_argument("--regions", required=True)
    parser.add_argument("--objects", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--limit", type=int, default=None,
                        help="convert at most this many images")
    args = parser.parse_args()

    with open(args.image_data, encoding="utf-8") as fh:
        dims = {rec["image_id"]: (rec["width"], rec["height"]) for rec in json.load(fh)}
    with open(args.regions, encoding="utf-8") as fh:
        regions = {rec.get("id", rec.get("image_id")): rec for rec in json.load(fh)}
    with open(args.objects, encoding="utf-8") as fh:
        objects = {rec.get("image_id", rec.get("id")): rec for rec in json.load(fh)}

    converted = []
    for image_id, (width, height) in dims.items():
        record = {
            "image_id": str(image_id),
            "width": int(width),
            "height": int(height),
            "regions": convert_regions(regions.get(image_id, {}), width, height),
            "objects": convert_objects(objects.get(image_id, {}), width, height),
        }
        if not record["regions"] and not record["objects"]:
            continue
        converted.append(record)
        if args.limit and len(converted) >= args.limit:
            break

    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(converted, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {len(converted)} annotations -> {args.out}", file=sys.stderr)


if __name__ == "__main__":
    main()
