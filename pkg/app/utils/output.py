"""
Writing result files: CSV tables through pandas, JSON documents through the codec.

Every file is written to a temporary sibling first and moved into place with
os.replace, so a failed run never leaves a half-written output behind.
"""
import logging
import os
import sys
import tempfile
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import pandas as pd
from pydantic import BaseModel

from app.services.codec import dumps

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.6g"


def _stage(path: Path, text: str) -> str:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    except BaseException:
        _discard([tmp])
        raise
    return tmp


def _discard(staged: Sequence[str]) -> None:
    for tmp in staged:
        if os.path.exists(tmp):
            os.remove(tmp)


def atomic_write_all(files: Sequence[Tuple[Path, str]]) -> List[Path]:
    """Stage every file before moving any into place; a failed write leaves none of them."""
    staged: List[str] = []
    try:
        for path, text in files:
            staged.append(_stage(path, text))
    except BaseException:
        _discard(staged)
        raise
    for tmp, (path, _) in zip(staged, files):
        os.replace(tmp, path)
        logger.info(f"📄 Wrote {path}")
    return [path for path, _ in files]


def csv_text(rows: List[Dict[str, object]], columns: Sequence[str]) -> str:
    frame = pd.DataFrame(rows, columns=list(columns))
    return frame.to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")


class OutputSink:
    """Result files go to ``out_dir``; without one, the primary table goes to stdout."""

    def __init__(self, out_dir: Optional[Union[str, Path]] = None):
        self.out_dir = Path(out_dir) if out_dir else None
        self.pending: List[tuple] = []

    def table(self, name: str, rows: List[Dict[str, object]], columns: Sequence[str], primary: bool = False) -> None:
        self.pending.append((name, csv_text(rows, columns), primary))

    def document(self, name: str, model: BaseModel, primary: bool = False) -> None:
        self.pending.append((name, dumps(model), primary))

    def flush(self) -> None:
        """Write everything queued; called only after all computation succeeded."""
        if self.out_dir is not None:
            atomic_write_all([(self.out_dir / name, text) for name, text, _ in self.pending])
        else:
            for _, text, primary in self.pending:
                if primary:
                    sys.stdout.write(text)
        self.pending.clear()
