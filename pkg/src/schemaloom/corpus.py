"""Plain-text knowledge base: specification document and paper corpora.

Documents load from ``.txt`` files in filename byte order so runs are
reproducible; operators control iteration order by prefixing filenames.
PDF conversion is delegated to a user-configured external command.
"""

from __future__ import annotations

import shlex
import subprocess
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from schemaloom import SchemaloomError
from schemaloom.prompts import TokenEstimator, estimate_tokens


class CorpusError(SchemaloomError):
    pass


class EmptyCorpus(CorpusError):
    pass


class CuratedSizeViolation(CorpusError):
    pass


class SpecificationSizeViolation(CorpusError):
    pass


class NonUtf8File(CorpusError):
    def __init__(self, path: Path):
        super().__init__(f"{path} is not valid UTF-8")
        self.path = path


class EmptyDocument(CorpusError):
    def __init__(self, path: Path):
        super().__init__(f"{path} is empty")
        self.path = path


class ConverterMissing(CorpusError):
    pass


class ConverterFailed(CorpusError):
    def __init__(self, path: Path, status: int):
        super().__init__(f"converter failed on {path} with exit status {status}")
        self.path = path
        self.status = status


class CorpusRole(Enum):
    SPECIFICATION = "Specification"
    CURATED = "Curated"
    EXTENDED = "Extended"


CURATED_MIN, CURATED_MAX = 1, 10


@dataclass(frozen=True)
class Document:
    id: str
    body: str
    origin: Path
    est_tokens: int


@dataclass(frozen=True)
class Corpus:
    role: CorpusRole
    docs: tuple[Document, ...]

    def __len__(self) -> int:
        return len(self.docs)


def load_corpus(
    directory: Path, role: CorpusRole, estimator: TokenEstimator = estimate_tokens
) -> Corpus:
    """Load every .txt file under ``directory`` in filename byte order."""
    directory = Path(directory)
    if not directory.is_dir():
        raise EmptyCorpus(f"{directory} is not a directory")
    paths = sorted(
        (p for p in directory.iterdir() if p.is_file() and p.suffix == ".txt"),
        key=lambda p: p.name.encode("utf-8"),
    )
    if not paths:
        raise EmptyCorpus(f"no .txt documents in {directory}")
    if role is CorpusRole.CURATED and not CURATED_MIN <= len(paths) <= CURATED_MAX:
        raise CuratedSizeViolation(
            f"curated corpus must hold {CURATED_MIN}..{CURATED_MAX} papers, found {len(paths)}"
        )
    if role is CorpusRole.SPECIFICATION and len(paths) != 1:
        raise SpecificationSizeViolation(
            f"specification corpus must hold exactly 1 document, found {len(paths)}"
        )
    docs = []
    for path in paths:
        try:
            body = path.read_text(encoding="utf-8")
        except UnicodeDecodeError as exc:
            raise NonUtf8File(path) from exc
        if not body.strip():
            raise EmptyDocument(path)
        docs.append(Document(id=path.stem, body=body, origin=path, est_tokens=estimator(body)))
    return Corpus(role=role, docs=tuple(docs))


def convert_pdfs(directory: Path, converter_cmd: str | None) -> int:
    """Convert each PDF lacking a same-stem .txt file; returns the count.

    ``converter_cmd`` is a command template with {input} and {output}
    placeholders, e.g. ``pdftotext {input} {output}``. Existing .txt files
    are never overwritten, so a second invocation converts nothing.
    """
    if not converter_cmd or not converter_cmd.strip():
        raise ConverterMissing("no PDF converter command configured")
    directory = Path(directory)
    pdfs = sorted(directory.glob("*.pdf"), key=lambda p: p.name.encode("utf-8"))
    converted = 0
    for pdf in pdfs:
        target = pdf.with_suffix(".txt")
        if target.exists():
            continue
        argv = [
            arg.replace("{input}", str(pdf)).replace("{output}", str(target))
            for arg in shlex.split(converter_cmd)
        ]
        try:
            proc = subprocess.run(argv, capture_output=True)
        except FileNotFoundError as exc:
            raise ConverterMissing(f"converter executable not found: {argv[0]}") from exc
        if proc.returncode != 0:
            raise ConverterFailed(pdf, proc.returncode)
        if not target.exists():
            raise ConverterFailed(pdf, 0)
        converted += 1
    return converted
