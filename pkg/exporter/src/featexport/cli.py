"""Command line front end: export a CUB split (or an image list file)."""

import argparse
import sys
from pathlib import Path

from featexport.datasets import load_cub, load_image_list
from featexport.export import ExportJob, export


def build_parser():
    parser = argparse.ArgumentParser(prog="featexport")
    parser.add_argument("--out", required=True, help="output path stem (.crmf/.crmh/.json)")
    parser.add_argument("--backbone", default="resnet50",
                        choices=["resnet50", "inception_v3", "vgg16"])
    parser.add_argument("--pretrained", action="store_true")
    parser.add_argument("--resolution", type=int, default=0)
    parser.add_argument("--batch-size", type=int, default=8)
    parser.add_argument("--limit", type=int, help="export at most this many images")
    parser.add_argument("--head-weights", help="npz with weights/bias overriding the head")
    parser.add_argument("--seed", type=int, default=0)
    src = parser.add_mutually_exclusive_group(required=True)
    src.add_argument("--cub-root", help="CUB-200-2011 directory")
    src.add_argument("--image-list",
                     help="text file: one 'path label' pair per line")
    parser.add_argument("--split", default="test", choices=["train", "test"])
    parser.add_argument("--num-classes", type=int, default=1000,
                        help="label range for --image-list")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.cub_root:
            dataset = load_cub(args.cub_root, split=args.split, limit=args.limit)
        else:
            entries = []
            for line in Path(args.image_list).read_text().splitlines():
                if line.strip():
                    path, label = line.rsplit(maxsplit=1)
                    entries.append((path, int(label)))
            if args.limit:
                entries = entries[: args.limit]
            dataset = load_image_list(entries, num_classes=args.num_classes)
        job = ExportJob(
            dataset=dataset,
            out=Path(args.out),
            backbone=args.backbone,
            pretrained=args.pretrained,
            resolution=args.resolution,
            batch_size=args.batch_size,
            head_weights=Path(args.head_weights) if args.head_weights else None,
            seed=args.seed,
        )
        for path in export(job):
            print(path)
        return 0
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
