"""Principle-guided multi-step answer generation.

Step 1 renders a two-exemplar prompt for the first principle; each later step
appends a fresh instruction to the full transcript so far (all prior prompts
and answers), so the backend conditions on everything previously generated.
Segments are concatenated with blank lines and the result is wrapped with the
precautionary disclaimer at the presentation boundary.

Templates are data, not code: they ship as versioned text files with named
slots in braces. Slot filling is literal -- braces inside values are never
re-interpreted.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .corpus import Principle, Quandary
from .llm import BackendError, CompletionClient, CompletionRequest
from .scoring import PrincipleSelection, selection_from_record, selection_to_record

DISCLAIMER = "The answer is generated by an AI algorithm, please proceed with caution"

# Each quandary block in a prompt starts with this line; it doubles as the
# stop sequence so the backend halts instead of hallucinating a new quandary.
BLOCK_DELIMITER = "=== Ethical Quandary ==="
ANSWER_MARKER = "Answer:"

SLOT_NAMES = ("context", "question", "principle", "prior")
_SLOT_PATTERN = re.compile(r"\{(" + "|".join(SLOT_NAMES) + r")\}")

DEFAULT_TEMPLATE_VERSION = "v1"


class GenerationError(Exception):
    """Generation failed; segments and trace hold whatever completed first."""

    def __init__(self, message: str, segments: tuple = (), trace: tuple = ()):
        super().__init__(message)
        self.segments = tuple(segments)
        self.trace = tuple(trace)


@dataclass(frozen=True)
class PromptTemplate:
    step: int
    text: str
    tag_open: str = "<p>"
    tag_close: str = "</p>"

    def __post_init__(self):
        if self.step not in (1, 2, 3):
            raise ValueError("template step must be 1, 2 or 3")
        counts = {name: 0 for name in SLOT_NAMES}
        for match in _SLOT_PATTERN.finditer(self.text):
            counts[match.group(1)] += 1
        for name, n in counts.items():
            if n > 1:
                raise ValueError(f"slot {{{name}}} appears {n} times; each slot may appear once")
        if self.step == 1:
            if counts["prior"]:
                raise ValueError("step-1 template must not declare a {prior} slot")
            required = ("context", "question", "principle")
        else:
            required = ("prior", "principle")
        for name in required:
            if not counts[name]:
                raise ValueError(f"step-{self.step} template is missing its {{{name}}} slot")

    def fill(self, **values: str) -> str:
        """Replace each declared slot with its value, literally.

        The template is split on slot placeholders first, so braces inside
        values are never treated as slots.
        """
        pieces = _SLOT_PATTERN.split(self.text)
        out = []
        for i, piece in enumerate(pieces):
            if i % 2 == 0:
                out.append(piece)
            else:
                if piece not in values:
                    raise ValueError(f"no value supplied for slot {{{piece}}}")
                out.append(values[piece])
        return "".join(out)


@dataclass(frozen=True)
class TemplateSet:
    version: str
    step1: PromptTemplate
    step_j: str  # shared text for steps 2 and 3

    def for_step(self, step: int) -> PromptTemplate:
        if step == 1:
            return self.step1
        return PromptTemplate(step=step, text=self.step_j)


def load_templates(version: str = DEFAULT_TEMPLATE_VERSION) -> TemplateSet:
    base = resources.files("quandary").joinpath("data", "templates", version)
    step1_text = base.joinpath("step1.txt").read_text(encoding="utf-8")
    step_j_text = base.joinpath("step_j.txt").read_text(encoding="utf-8")
    return TemplateSet(version=version, step1=PromptTemplate(step=1, text=step1_text), step_j=step_j_text)


@dataclass(frozen=True)
class FewShotExemplar:
    quandary: Quandary
    principle: Principle
    answer: str  # paragraph-tagged

    def __post_init__(self):
        if not re.search(r"<p>.*?</p>", self.answer, re.DOTALL):
            raise ValueError("exemplar answer must contain at least one well-formed paragraph-tag pair")


def load_exemplars(path: Path | str | None = None) -> list[FewShotExemplar]:
    """Load the shipped (or a user-supplied) exemplar file."""
    if path is None:
        text = resources.files("quandary").joinpath("data", "exemplars", "exemplars.jsonl").read_text(
            encoding="utf-8"
        )
    else:
        text = Path(path).read_text(encoding="utf-8")
    exemplars = []
    for line in text.splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        exemplars.append(
            FewShotExemplar(
                quandary=Quandary(**obj["quandary"]),
                principle=Principle(**obj["principle"]),
                answer=obj["answer"],
            )
        )
    return exemplars


@dataclass(frozen=True)
class AnswerSegment:
    index: int
    principle_id: str
    text: str  # raw with tags stripped
    raw: str
    finish_reason: str

    def __post_init__(self):
        if not 1 <= self.index <= 3:
            raise ValueError("segment index must be in [1, 3]")


@dataclass(frozen=True)
class TraceStep:
    step: int
    prompt: str
    raw_response: str
    finish_reason: str
    backend_id: str
    latency: float
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class GeneratedAnswer:
    quandary_id: str
    selection: PrincipleSelection
    segments: tuple[AnswerSegment, ...]
    concatenated: str
    disclaimer_wrapped: str
    trace: tuple[TraceStep, ...]
    template_version: str = DEFAULT_TEMPLATE_VERSION

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "trace", tuple(self.trace))
        if len(self.segments) != len(self.selection.principles):
            raise ValueError("segment count must equal selected principle count")
        if self.concatenated != "\n\n".join(s.text for s in self.segments):
            raise ValueError("concatenated must be the segments joined by blank lines")
        lines = [ln for ln in self.disclaimer_wrapped.splitlines() if ln.strip()]
        if not lines or lines[0] != DISCLAIMER or lines[-1] != DISCLAIMER:
            raise ValueError("disclaimer_wrapped must start and end with the disclaimer sentence")


def tag_paragraphs(paragraphs, tag_open: str = "<p>", tag_close: str = "</p>") -> str:
    return "\n".join(f"{tag_open}{p}{tag_close}" for p in paragraphs)


def parse_paragraphs(raw: str, tag_open: str = "<p>", tag_close: str = "</p>") -> tuple[list[str], list[str]]:
    """Lenient paragraph-tag parse.

    Well-formed pairs yield their contents in order; text outside tags is kept
    as its own paragraph; an unterminated open tag runs to end of text and is
    reported as a warning.
    """
    paragraphs: list[str] = []
    warnings: list[str] = []
    pos = 0
    while True:
        start = raw.find(tag_open, pos)
        if start == -1:
            tail = raw[pos:].strip()
            if tail:
                paragraphs.append(tail)
            break
        outside = raw[pos:start].strip()
        if outside:
            paragraphs.append(outside)
        end = raw.find(tag_close, start + len(tag_open))
        if end == -1:
            content = raw[start + len(tag_open) :].strip()
            if content:
                paragraphs.append(content)
            warnings.append("unterminated paragraph tag; content taken to end of text")
            break
        content = raw[start + len(tag_open) : end].strip()
        if content:
            paragraphs.append(content)
        pos = end + len(tag_close)
    return paragraphs, warnings


def strip_paragraph_tags(raw: str, tag_open: str = "<p>", tag_close: str = "</p>") -> list[str]:
    return parse_paragraphs(raw, tag_open, tag_close)[0]


def wrap_disclaimer(text: str) -> str:
    """Prepend and append the exact disclaimer sentence, blank-line separated.

    Deliberately not idempotent: callers wrap exactly once at the
    presentation boundary so the stored answer stays canonical.
    """
    if not text or not text.strip():
        raise ValueError("cannot wrap empty text")
    return f"{DISCLAIMER}\n\n{text}\n\n{DISCLAIMER}"


def render_prompt1(
    exemplars: list[FewShotExemplar],
    quandary: Quandary,
    p1: Principle,
    template: PromptTemplate,
) -> str:
    """Two exemplar blocks (with answers) followed by the test block."""
    if len(exemplars) != 2:
        raise ValueError(f"exactly 2 exemplars are required, got {len(exemplars)}")
    if template.step != 1:
        raise ValueError("render_prompt1 requires the step-1 template")

    def block(q: Quandary, p: Principle) -> str:
        return template.fill(
            context=tag_paragraphs(q.context, template.tag_open, template.tag_close),
            question=q.question,
            principle=p.text,
        )

    parts = []
    for ex in exemplars:
        parts.append(block(ex.quandary, ex.principle) + ex.answer + "\n\n")
    parts.append(block(quandary, p1))
    return "".join(parts)


def render_prompt_j(prior_transcript: str, p_j: Principle, template: PromptTemplate) -> str:
    """Append the step-j instruction after the full transcript so far."""
    if template.step not in (2, 3):
        raise ValueError("render_prompt_j requires a step-2 or step-3 template")
    if not prior_transcript.strip():
        raise ValueError("prior transcript must be non-empty")
    marker = prior_transcript.rfind(ANSWER_MARKER)
    if marker == -1 or not prior_transcript[marker + len(ANSWER_MARKER) :].strip():
        raise ValueError("prior transcript holds no answer text to condition on")
    return template.fill(prior=prior_transcript, principle=p_j.text)


def generate_answer(
    quandary: Quandary,
    selection: PrincipleSelection,
    client: CompletionClient,
    templates: TemplateSet | None = None,
    exemplars: list[FewShotExemplar] | None = None,
    max_tokens: int = 512,
    temperature: float = 0.7,
    seed: int | None = None,
) -> GeneratedAnswer:
    """Run the k-step loop over the selected principles.

    The loop is strictly sequential: step j's prompt contains everything from
    steps 1..j-1 as a prefix. On backend failure the exception carries the
    partial segments and trace so callers can persist them.
    """
    templates = templates or load_templates()
    exemplars = exemplars if exemplars is not None else load_exemplars()

    segments: list[AnswerSegment] = []
    trace: list[TraceStep] = []
    transcript = ""
    for k, principle in enumerate(selection.principles, start=1):
        if k == 1:
            prompt = render_prompt1(exemplars, quandary, principle, templates.for_step(1))
        else:
            prompt = render_prompt_j(transcript, principle, templates.for_step(k))

        request = CompletionRequest(
            prompt=prompt,
            max_tokens=max_tokens,
            temperature=temperature,
            stop_sequences=(BLOCK_DELIMITER,),
            seed=seed,
        )
        try:
            response = client.complete(request)
        except BackendError as exc:
            raise GenerationError(
                f"backend failed at step {k}/{len(selection.principles)}: {exc}",
                segments=tuple(segments),
                trace=tuple(trace),
            ) from exc

        paragraphs, warnings = parse_paragraphs(response.text, "<p>", "</p>")
        text = "\n\n".join(paragraphs)
        trace.append(
            TraceStep(
                step=k,
                prompt=prompt,
                raw_response=response.text,
                finish_reason=response.finish_reason,
                backend_id=response.backend_id,
                latency=response.latency,
                warnings=tuple(warnings),
            )
        )
        if not text.strip():
            raise GenerationError(
                f"step {k} produced an empty segment after tag stripping",
                segments=tuple(segments),
                trace=tuple(trace),
            )
        segments.append(
            AnswerSegment(
                index=k,
                principle_id=principle.id,
                text=text,
                raw=response.text,
                finish_reason=response.finish_reason,
            )
        )
        transcript = prompt + response.text

    concatenated = "\n\n".join(s.text for s in segments)
    return GeneratedAnswer(
        quandary_id=quandary.id,
        selection=selection,
        segments=tuple(segments),
        concatenated=concatenated,
        disclaimer_wrapped=wrap_disclaimer(concatenated),
        trace=tuple(trace),
        template_version=templates.version,
    )


def answer_to_record(answer: GeneratedAnswer) -> dict:
    """JSON-serializable form with the full trace; stable key order."""
    return {
        "quandary_id": answer.quandary_id,
        "template_version": answer.template_version,
        "selection": selection_to_record(answer.selection),
        "segments": [
            {
                "index": s.index,
                "principle_id": s.principle_id,
                "text": s.text,
                "raw": s.raw,
                "finish_reason": s.finish_reason,
            }
            for s in answer.segments
        ],
        "concatenated": answer.concatenated,
        "disclaimer_wrapped": answer.disclaimer_wrapped,
        "trace": [
            {
                "step": t.step,
                "prompt": t.prompt,
                "raw_response": t.raw_response,
                "finish_reason": t.finish_reason,
                "backend_id": t.backend_id,
                "latency": t.latency,
                "warnings": list(t.warnings),
            }
            for t in answer.trace
        ],
    }


def answer_from_record(record: dict) -> GeneratedAnswer:
    return GeneratedAnswer(
        quandary_id=record["quandary_id"],
        selection=selection_from_record(record["selection"]),
        segments=tuple(
            AnswerSegment(
                index=s["index"],
                principle_id=s["principle_id"],
                text=s["text"],
                raw=s["raw"],
                finish_reason=s["finish_reason"],
            )
            for s in record["segments"]
        ),
        concatenated=record["concatenated"],
        disclaimer_wrapped=record["disclaimer_wrapped"],
        trace=tuple(
            TraceStep(
                step=t["step"],
                prompt=t["prompt"],
                raw_response=t["raw_response"],
                finish_reason=t["finish_reason"],
                backend_id=t["backend_id"],
                latency=t["latency"],
                warnings=tuple(t.get("warnings", ())),
            )
            for t in record.get("trace", [])
        ),
        template_version=record.get("template_version", DEFAULT_TEMPLATE_VERSION),
    )
