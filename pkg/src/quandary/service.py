"""HTTP facade over the pipeline and the annotation workflows.

A plain WSGI application (stdlib only) with append-only JSONL journals under
a data directory; every state transition is persisted before the response is
sent, so a crash after a response never loses the transition. Blinding maps
are journaled server-side and never appear in any session payload.

Endpoints (JSON over HTTP):
    POST /quandaries                      store a quandary
    GET  /quandaries/{id}                 fetch it back
    GET  /quandaries/{id}/candidates      ranked principle candidates + token
    POST /quandaries/{id}/selection       finalize a human selection
    POST /quandaries/{id}/answer          generate the guided answer
    GET  /quandaries/{id}/answers         list generated answers
    POST /sessions                        open an annotation/review session
    GET  /sessions/{id}                   progress summary
    GET  /sessions/{id}/next              current head of the queue (idempotent)
    POST /sessions/{id}/votes             record one pair's votes, advance
    GET  /healthz                         liveness
    GET  /ui/...                          static bundle, when configured

Candidates are computed on first request and cached (eager computation at
quandary creation is deliberately off: scorer calls may be remote). When the
remote scorer is unreachable the endpoint answers 503 but the body carries a
lexically scored fallback flagged with "scorer_fallback": true.
"""

from __future__ import annotations

import json
import mimetypes
import re
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from wsgiref.simple_server import WSGIServer, WSGIRequestHandler, make_server
from socketserver import ThreadingMixIn

from . import analysis, corpus, generation, retrieval, scoring
from .llm import BackendConfig, CompletionClient
from .scoring import ScorerConfig

SERVICE_TOKEN_ENV = "QUANDARY_SERVICE_TOKEN"


class HttpError(Exception):
    def __init__(self, status: int, message: str, **extra):
        super().__init__(message)
        self.status = status
        self.payload = {"error": {"status": status, "message": message, **extra}}


@dataclass
class ServiceConfig:
    data_dir: Path
    principles_path: Path | None = None
    handcrafted_path: Path | None = None
    scorer: str = "lexical"
    scorer_endpoint: str | None = None
    threshold: float | None = None
    top_k: int = 10
    backend: BackendConfig = field(default_factory=lambda: BackendConfig(kind="mock"))
    seed: int = 0
    static_dir: Path | None = None
    pending_ttl: float = 86400.0
    auth_token: str | None = None
    generated_count: int = 2

    def __post_init__(self):
        self.data_dir = Path(self.data_dir)
        if self.principles_path is not None:
            self.principles_path = Path(self.principles_path)
        if self.static_dir is not None:
            self.static_dir = Path(self.static_dir)


def _load_handcrafted(path: Path | None) -> list[corpus.Principle]:
    if path is not None:
        return corpus.load_principles(path)
    from importlib import resources

    text = resources.files("quandary").joinpath("data", "principles", "handcrafted.jsonl").read_text("utf-8")
    out = []
    for line in text.splitlines():
        if line.strip():
            obj = json.loads(line)
            out.append(corpus.Principle(id=obj["id"], text=obj["text"], provenance=obj["provenance"]))
    return out


@dataclass
class Session:
    session_id: str
    kind: str  # "annotation" | "principle_review"
    queue: list[str]
    payloads: dict  # pair_id -> pair payload (annotation) / quandary ids (review)
    voted: set = field(default_factory=set)

    @property
    def pending(self) -> list[str]:
        return [item for item in self.queue if item not in self.voted]


class QuandaryService:
    """All state behind the WSGI app; journals under config.data_dir."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        config.data_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()

        self.quandaries = corpus.QuandaryStore()
        self.selections: dict[str, list[dict]] = {}
        self.answers: dict[str, list[dict]] = {}
        self.sessions: dict[str, Session] = {}
        self.blinding: dict[str, analysis.BlindedPair] = {}
        self.votes: list[dict] = []
        self.pending: dict[str, scoring.PendingSelection] = {}
        self.finalized_tokens: dict[str, dict] = {}
        self.candidate_cache: dict[tuple, dict] = {}
        self.answer_counter = 0

        self.handcrafted = _load_handcrafted(config.handcrafted_path)
        self.index = None
        if config.principles_path is not None:
            self.index = retrieval.build_index(corpus.load_principles(config.principles_path))

        self.templates = generation.load_templates()
        self.exemplars = generation.load_exemplars()
        self._replay_journals()

    # -- persistence ---------------------------------------------------------

    def _journal(self, name: str) -> Path:
        return self.config.data_dir / f"{name}.jsonl"

    def _append(self, name: str, record: dict) -> None:
        with self._journal(name).open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
            fh.flush()

    def _replay(self, name: str):
        path = self._journal(name)
        if not path.exists():
            return
        with path.open("r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    yield json.loads(line)

    def _replay_journals(self) -> None:
        for rec in self._replay("quandaries"):
            self.quandaries.add(corpus.Quandary(**rec))
        for rec in self._replay("selections"):
            self.selections.setdefault(rec["quandary_id"], []).append(rec)
            if rec.get("token"):
                self.finalized_tokens[rec["token"]] = rec
        for rec in self._replay("answers"):
            self.answers.setdefault(rec["quandary_id"], []).append(rec)
            self.answer_counter += 1
        for rec in self._replay("blinding"):
            self.blinding[rec["pair_id"]] = analysis.BlindedPair(
                pair_id=rec["pair_id"],
                quandary_id=rec["quandary_id"],
                label_A=rec["label_A"],
                label_B=rec["label_B"],
                seed=rec["seed"],
            )
        for rec in self._replay("sessions"):
            self.sessions[rec["session_id"]] = Session(
                session_id=rec["session_id"],
                kind=rec["kind"],
                queue=list(rec["queue"]),
                payloads=rec["payloads"],
            )
        for rec in self._replay("votes"):
            self.votes.append(rec)
            session = self.sessions.get(rec["session_id"])
            if session:
                session.voted.add(rec["pair_id"])

    # -- quandaries ----------------------------------------------------------

    def create_quandary(self, body: dict) -> dict:
        for name in ("id", "context", "question"):
            if name not in body:
                raise HttpError(400, f"missing field {name!r}", field=name)
        if not isinstance(body["context"], list) or not body["context"]:
            raise HttpError(400, "context must be a non-empty list of paragraphs", field="context")
        with self._lock:
            if body["id"] in self.quandaries:
                raise HttpError(409, f"quandary {body['id']!r} already exists")
            try:
                quandary = corpus.Quandary(
                    id=str(body["id"]),
                    context=tuple(str(p) for p in body["context"]),
                    question=str(body["question"]),
                    source=str(body.get("source", "")),
                )
            except ValueError as exc:
                raise HttpError(400, str(exc)) from exc
            self._append("quandaries", corpus.quandary_to_record(quandary))
            self.quandaries.add(quandary)
        return {"id": quandary.id}

    def get_quandary(self, quandary_id: str) -> corpus.Quandary:
        if quandary_id not in self.quandaries:
            raise HttpError(404, f"no quandary {quandary_id!r}")
        return self.quandaries.get(quandary_id)

    # -- candidates & selection ----------------------------------------------

    def _scorer_config(self, scorer: str, threshold: float | None) -> ScorerConfig:
        try:
            return scoring.default_scorer_config(
                scorer,
                endpoint=self.config.scorer_endpoint,
                threshold=self.config.threshold if threshold is None else threshold,
            )
        except ValueError as exc:
            raise HttpError(400, str(exc)) from exc

    def _compute_candidates(self, quandary, config: ScorerConfig, top_k: int) -> dict:
        client = CompletionClient(self.config.backend)
        pool = scoring.build_candidate_pool(
            quandary,
            index=self.index,
            client=client,
            handcrafted=self.handcrafted,
            top_k=top_k,
            generated_count=self.config.generated_count,
            seed=self.config.seed,
        )
        scored, dropped = scoring.score_pool(quandary, pool, config)
        pending = scoring.select_principles(quandary, scored, config, mode="human")
        with self._lock:
            self.pending[pending.token] = pending
        return {
            "quandary_id": quandary.id,
            "scorer_id": config.scorer_id,
            "polarity": config.polarity,
            "threshold": config.threshold,
            "top_k": top_k,
            "token": pending.token,
            "scorer_fallback": False,
            "candidates": [
                {
                    "id": s.principle.id,
                    "text": s.principle.text,
                    "provenance": s.principle.provenance,
                    "score": s.score,
                }
                for s in pending.candidates
            ],
            "dropped": [{"id": d.principle.id, "reason": d.reason} for d in dropped],
        }

    def get_candidates(self, quandary_id: str, query: dict) -> tuple[int, dict]:
        quandary = self.get_quandary(quandary_id)
        scorer = query.get("scorer", self.config.scorer)
        top_k = int(query.get("top_k", self.config.top_k))
        threshold = float(query["threshold"]) if "threshold" in query else None
        config = self._scorer_config(scorer, threshold)

        cache_key = (quandary_id, config.scorer_id, config.threshold, top_k)
        with self._lock:
            cached = self.candidate_cache.get(cache_key)
        if cached is not None:
            pending = self.pending.get(cached["token"])
            if pending is not None and time.time() - pending.created_at < self.config.pending_ttl:
                return 200, cached

        try:
            payload = self._compute_candidates(quandary, config, top_k)
        except scoring.ScorerUnreachableError as exc:
            fallback_config = self._scorer_config("lexical", None)
            payload = self._compute_candidates(quandary, fallback_config, top_k)
            payload["scorer_fallback"] = True
            payload["requested_scorer"] = config.scorer_id
            payload["error"] = {"status": 503, "message": str(exc)}
            return 503, payload
        with self._lock:
            self.candidate_cache[cache_key] = payload
        return 200, payload

    def post_selection(self, quandary_id: str, body: dict) -> dict:
        self.get_quandary(quandary_id)
        token = body.get("token")
        chosen = body.get("chosen")
        annotator = body.get("annotator")
        if not token:
            raise HttpError(422, "missing pending-selection token", field="token")
        if not isinstance(chosen, list) or not chosen:
            raise HttpError(422, "chosen must be a non-empty list", field="chosen")
        if len(chosen) > scoring.MAX_SELECTED:
            raise HttpError(422, f"choose at most {scoring.MAX_SELECTED} principles", field="chosen")
        if not annotator:
            raise HttpError(422, "missing annotator id", field="annotator")

        chosen_key = json.dumps(chosen, sort_keys=True)
        with self._lock:
            finalized = self.finalized_tokens.get(token)
            if finalized is not None:
                if finalized.get("chosen_key") == chosen_key:
                    return finalized["record"]
                raise HttpError(409, "selection already finalized for this token")
            pending = self.pending.get(token)
            if pending is None:
                raise HttpError(409, "unknown or expired pending-selection token")
            if time.time() - pending.created_at >= self.config.pending_ttl:
                raise HttpError(409, "pending-selection token expired; re-fetch candidates")
            try:
                selection = scoring.confirm_selection(pending, chosen, annotator=annotator)
            except scoring.AlreadyFinalizedError as exc:
                raise HttpError(409, str(exc)) from exc
            except ValueError as exc:
                raise HttpError(422, str(exc)) from exc
            record = scoring.selection_to_record(selection)
            journal_record = {**record, "token": token, "chosen_key": chosen_key}
            self._append("selections", journal_record)
            self.selections.setdefault(quandary_id, []).append(journal_record)
            self.finalized_tokens[token] = {"chosen_key": chosen_key, "record": record}
        return record

    # -- generation ------------------------------------------------------------

    def post_answer(self, quandary_id: str, body: dict) -> dict:
        quandary = self.get_quandary(quandary_id)
        with self._lock:
            selections = self.selections.get(quandary_id, [])
        if not selections:
            raise HttpError(409, f"no finalized selection for quandary {quandary_id!r}")
        selection = scoring.selection_from_record(selections[-1])

        backend_kind = body.get("backend", self.config.backend.kind)
        if backend_kind == self.config.backend.kind:
            backend = self.config.backend
        elif backend_kind == "mock":
            backend = BackendConfig(kind="mock")
        else:
            raise HttpError(400, f"backend {backend_kind!r} is not configured")
        seed = int(body.get("seed", self.config.seed))
        client = CompletionClient(backend)

        try:
            answer = generation.generate_answer(
                quandary,
                selection,
                client,
                templates=self.templates,
                exemplars=self.exemplars,
                max_tokens=int(body.get("max_tokens", 512)),
                temperature=float(body.get("temperature", 0.7)),
                seed=seed,
            )
        except generation.GenerationError as exc:
            with self._lock:
                self.answer_counter += 1
                partial = {
                    "answer_id": f"ans-{self.answer_counter:06d}",
                    "quandary_id": quandary_id,
                    "complete": False,
                    "error": str(exc),
                    "seed": seed,
                    "partial_trace": [
                        {"step": t.step, "prompt": t.prompt, "raw_response": t.raw_response}
                        for t in exc.trace
                    ],
                }
                self._append("answers", partial)
                self.answers.setdefault(quandary_id, []).append(partial)
            raise HttpError(502, f"backend failure, partial trace retained: {exc}") from exc

        with self._lock:
            self.answer_counter += 1
            record = {
                "answer_id": f"ans-{self.answer_counter:06d}",
                "complete": True,
                "seed": seed,
                **generation.answer_to_record(answer),
            }
            self._append("answers", record)
            self.answers.setdefault(quandary_id, []).append(record)
        return record

    def list_answers(self, quandary_id: str) -> dict:
        self.get_quandary(quandary_id)
        with self._lock:
            return {"quandary_id": quandary_id, "answers": list(self.answers.get(quandary_id, []))}

    # -- annotation sessions ---------------------------------------------------

    def create_session(self, body: dict) -> dict:
        kind = body.get("kind", "annotation")
        if kind not in ("annotation", "principle_review"):
            raise HttpError(422, "session kind must be 'annotation' or 'principle_review'", field="kind")

        session_id = uuid.uuid4().hex[:12]
        if kind == "principle_review":
            ids = body.get("quandary_ids") or self.quandaries.ids()
            if not ids:
                raise HttpError(422, "no quandaries to review", field="quandary_ids")
            session = Session(session_id=session_id, kind=kind, queue=list(ids), payloads={})
        else:
            pairs = body.get("pairs")
            if not isinstance(pairs, list) or not pairs:
                raise HttpError(422, "pairs must be a non-empty list", field="pairs")
            seed = int(body.get("seed", self.config.seed))
            payloads = {}
            blinded = {}
            for i, pair in enumerate(pairs):
                for name in ("pair_id", "systems"):
                    if name not in pair:
                        raise HttpError(400, f"pairs[{i}] missing {name!r}", field=f"pairs[{i}].{name}")
                systems = pair["systems"]
                if len(systems) != 2 or systems[0]["id"] == systems[1]["id"]:
                    raise HttpError(422, f"pairs[{i}] must name two distinct systems")
                pair_id = str(pair["pair_id"])
                quandary_id = str(pair.get("quandary_id", pair_id))
                bp = analysis.assign_blinding(
                    pair_id, (systems[0]["id"], systems[1]["id"]), seed, quandary_id=quandary_id
                )
                text_by_system = {systems[0]["id"]: systems[0]["text"], systems[1]["id"]: systems[1]["text"]}
                payloads[pair_id] = {
                    "pair_id": pair_id,
                    "quandary_id": quandary_id,
                    "context": pair.get("context"),
                    "question": pair.get("question"),
                    # Texts keyed by blinded label only; system ids never leave
                    # the blinding journal.
                    "answer_a": text_by_system[bp.label_A],
                    "answer_b": text_by_system[bp.label_B],
                }
                blinded[pair_id] = bp
            session = Session(
                session_id=session_id, kind=kind, queue=[str(p["pair_id"]) for p in pairs], payloads=payloads
            )
            with self._lock:
                for pair_id, bp in blinded.items():
                    self._append(
                        "blinding",
                        {
                            "pair_id": pair_id,
                            "quandary_id": bp.quandary_id,
                            "label_A": bp.label_A,
                            "label_B": bp.label_B,
                            "seed": bp.seed,
                        },
                    )
                    self.blinding[pair_id] = bp

        with self._lock:
            self._append(
                "sessions",
                {
                    "session_id": session.session_id,
                    "kind": session.kind,
                    "queue": session.queue,
                    "payloads": session.payloads,
                },
            )
            self.sessions[session_id] = session
        return {"session_id": session_id, "kind": kind, "total": len(session.queue)}

    def _get_session(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise HttpError(404, f"no session {session_id!r}")
        return session

    def session_summary(self, session_id: str) -> dict:
        session = self._get_session(session_id)
        done = len(session.queue) - len(session.pending)
        return {
            "session_id": session_id,
            "kind": session.kind,
            "total": len(session.queue),
            "completed": done,
            "done": not session.pending,
        }

    def session_next(self, session_id: str) -> dict:
        session = self._get_session(session_id)
        pending = session.pending
        if not pending:
            return {"done": True, "completed": len(session.queue)}
        head = pending[0]
        position = len(session.queue) - len(pending) + 1

        if session.kind == "principle_review":
            quandary = self.get_quandary(head)
            return {
                "done": False,
                "position": position,
                "total": len(session.queue),
                "quandary_id": head,
                "quandary": corpus.quandary_to_record(quandary),
            }

        payload = session.payloads[head]
        quandary_block = None
        if payload.get("context") and payload.get("question"):
            quandary_block = {"context": payload["context"], "question": payload["question"]}
        elif payload["quandary_id"] in self.quandaries:
            q = self.quandaries.get(payload["quandary_id"])
            quandary_block = {"context": list(q.context), "question": q.question}
        return {
            "done": False,
            "position": position,
            "total": len(session.queue),
            "pair_id": head,
            "quandary": quandary_block,
            "answers": {"A": payload["answer_a"], "B": payload["answer_b"]},
            "questions": analysis.CRITERION_QUESTIONS,
            "choices": list(analysis.CHOICES),
        }

    def post_vote(self, session_id: str, body: dict) -> dict:
        session = self._get_session(session_id)
        if session.kind != "annotation":
            raise HttpError(409, "votes apply to annotation sessions only")
        pair_id = body.get("pair_id")
        annotator = body.get("annotator")
        choices = body.get("choices")
        if not annotator:
            raise HttpError(422, "missing annotator id", field="annotator")
        if not isinstance(choices, dict) or not choices:
            raise HttpError(422, "choices must map criterion -> choice", field="choices")
        for criterion, choice in choices.items():
            if criterion not in analysis.CRITERIA:
                raise HttpError(422, f"unknown criterion {criterion!r}", field="choices")
            if choice not in analysis.CHOICES:
                raise HttpError(422, f"invalid choice {choice!r} for {criterion}", field="choices")

        with self._lock:
            pending = session.pending
            if not pending:
                raise HttpError(409, "session is already complete")
            if pair_id != pending[0]:
                raise HttpError(409, f"pair {pair_id!r} is not the served pair ({pending[0]!r})")
            record = {
                "session_id": session_id,
                "pair_id": pair_id,
                "annotator": annotator,
                "choices": choices,
            }
            self._append("votes", record)
            self.votes.append(record)
            session.voted.add(pair_id)
            remaining = len(session.pending)
        return {"recorded": len(choices), "remaining": remaining, "done": remaining == 0}

    # -- export -----------------------------------------------------------------

    def export_annotations(self) -> list[analysis.AnnotationRecord]:
        records = []
        for vote in self.votes:
            for criterion, choice in vote["choices"].items():
                records.append(
                    analysis.AnnotationRecord(
                        pair_id=vote["pair_id"],
                        annotator=vote["annotator"],
                        criterion=criterion,
                        choice=choice,
                    )
                )
        return records

    # -- WSGI ---------------------------------------------------------------------

    ROUTES = [
        ("POST", re.compile(r"^/quandaries$"), "route_create_quandary"),
        ("GET", re.compile(r"^/quandaries/(?P<qid>[^/]+)$"), "route_get_quandary"),
        ("GET", re.compile(r"^/quandaries/(?P<qid>[^/]+)/candidates$"), "route_candidates"),
        ("POST", re.compile(r"^/quandaries/(?P<qid>[^/]+)/selection$"), "route_selection"),
        ("POST", re.compile(r"^/quandaries/(?P<qid>[^/]+)/answer$"), "route_answer"),
        ("GET", re.compile(r"^/quandaries/(?P<qid>[^/]+)/answers$"), "route_list_answers"),
        ("POST", re.compile(r"^/sessions$"), "route_create_session"),
        ("GET", re.compile(r"^/sessions/(?P<sid>[^/]+)$"), "route_session_summary"),
        ("GET", re.compile(r"^/sessions/(?P<sid>[^/]+)/next$"), "route_session_next"),
        ("POST", re.compile(r"^/sessions/(?P<sid>[^/]+)/votes$"), "route_vote"),
        ("GET", re.compile(r"^/healthz$"), "route_health"),
    ]

    def route_create_quandary(self, body, query, **kw):
        return 201, self.create_quandary(body)

    def route_get_quandary(self, body, query, qid):
        return 200, corpus.quandary_to_record(self.get_quandary(qid))

    def route_candidates(self, body, query, qid):
        return self.get_candidates(qid, query)

    def route_selection(self, body, query, qid):
        return 200, self.post_selection(qid, body)

    def route_answer(self, body, query, qid):
        return 200, self.post_answer(qid, body)

    def route_list_answers(self, body, query, qid):
        return 200, self.list_answers(qid)

    def route_create_session(self, body, query):
        return 201, self.create_session(body)

    def route_session_summary(self, body, query, sid):
        return 200, self.session_summary(sid)

    def route_session_next(self, body, query, sid):
        return 200, self.session_next(sid)

    def route_vote(self, body, query, sid):
        return 200, self.post_vote(sid, body)

    def route_health(self, body, query):
        return 200, {"ok": True}

    def _serve_static(self, path: str, start_response):
        root = self.config.static_dir
        if root is None:
            raise HttpError(404, "no static bundle configured")
        rel = path[len("/ui/") :] if path.startswith("/ui/") else ""
        rel = rel or "index.html"
        target = (root / rel).resolve()
        if not str(target).startswith(str(root.resolve())) or not target.is_file():
            raise HttpError(404, f"no static file {rel!r}")
        content_type = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        data = target.read_bytes()
        start_response("200 OK", [("Content-Type", content_type), ("Content-Length", str(len(data)))])
        return [data]

    def wsgi(self, environ, start_response):
        method = environ["REQUEST_METHOD"]
        path = environ.get("PATH_INFO", "/")

        try:
            if method == "GET" and (path == "/" or path.startswith("/ui")):
                if path in ("/", "/ui"):
                    path = "/ui/"
                return self._serve_static(path, start_response)

            if self.config.auth_token:
                header = environ.get("HTTP_AUTHORIZATION", "")
                if header != f"Bearer {self.config.auth_token}" and path != "/healthz":
                    raise HttpError(401, "missing or invalid bearer token")

            body = {}
            if method in ("POST", "PUT"):
                try:
                    length = int(environ.get("CONTENT_LENGTH") or 0)
                except ValueError:
                    length = 0
                raw = environ["wsgi.input"].read(length) if length else b""
                if raw:
                    try:
                        body = json.loads(raw)
                    except json.JSONDecodeError as exc:
                        raise HttpError(400, f"request body is not valid JSON: {exc}") from exc

            query = {}
            for part in (environ.get("QUERY_STRING") or "").split("&"):
                if "=" in part:
                    k, v = part.split("=", 1)
                    query[k] = v

            for route_method, pattern, handler_name in self.ROUTES:
                if route_method != method:
                    continue
                match = pattern.match(path)
                if match:
                    status, payload = getattr(self, handler_name)(body, query, **match.groupdict())
                    return _respond(start_response, status, payload)
            raise HttpError(404, f"no route {method} {path}")
        except HttpError as exc:
            return _respond(start_response, exc.status, exc.payload)

    __call__ = wsgi


_STATUS_TEXT = {
    200: "OK", 201: "Created", 400: "Bad Request", 401: "Unauthorized", 404: "Not Found",
    409: "Conflict", 422: "Unprocessable Entity", 502: "Bad Gateway", 503: "Service Unavailable",
}


def _respond(start_response, status: int, payload: dict):
    data = json.dumps(payload, ensure_ascii=False).encode("utf-8")
    start_response(
        f"{status} {_STATUS_TEXT.get(status, 'OK')}",
        [("Content-Type", "application/json; charset=utf-8"), ("Content-Length", str(len(data)))],
    )
    return [data]


class _ThreadingWSGIServer(ThreadingMixIn, WSGIServer):
    daemon_threads = True


class _QuietHandler(WSGIRequestHandler):
    def log_message(self, format, *args):  # request logging off; journals are the audit trail
        pass


def serve(config: ServiceConfig, host: str = "127.0.0.1", port: int = 8080):
    """Run the threaded WSGI server until interrupted; returns the server for
    callers that want to shut it down programmatically."""
    app = QuandaryService(config)
    server = make_server(host, port, app.wsgi, server_class=_ThreadingWSGIServer, handler_class=_QuietHandler)
    return app, server
