"""``iggy-export``: score a corpus with a pretrained transformer and write
the interchange JSONL.

    iggy-export --model bert --corpus titles.jsonl --out scores.jsonl [--embeddings]

Exit codes: 0 success, 2 bad input or configuration.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from .export import MODEL_TAGS, ExportRequest, export_corpus, validate_interchange

log = logging.getLogger("iggy_export")


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(message)s")
    parser = argparse.ArgumentParser(prog="iggy-export", description=__doc__)
    parser.add_argument("--model", required=True, choices=MODEL_TAGS)
    parser.add_argument("--corpus", required=True, help="JSONL or plain-line titles")
    parser.add_argument("--out", required=True, help="interchange JSONL to write")
    parser.add_argument("--embeddings", action="store_true",
                        help="also export one frozen embedding per title")
    parser.add_argument("--weights", default=None,
                        help="checkpoint path overriding the bundled weights")
    parser.add_argument("--validate-only", metavar="FILE", default=None,
                        help="validate an existing interchange file and exit")
    args = parser.parse_args(argv)

    try:
        if args.validate_only:
            problems = validate_interchange(args.validate_only)
            for problem in problems:
                log.error("%s", problem)
            log.info("%s: %s", args.validate_only,
                     "valid" if not problems else f"{len(problems)} problems")
            return 0 if not problems else 2
        request = ExportRequest(corpus=args.corpus, model_tag=args.model,
                                out_path=args.out, embeddings=args.embeddings,
                                weights=args.weights)
        summary = export_corpus(request)
        log.info("wrote %d records to %s (%d skipped)",
                 summary["written"], args.out, summary["skipped"])
        return 0
    except (OSError, ValueError, KeyError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
