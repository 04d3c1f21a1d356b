#!/usr/bin/env python3
"""The HTTP facade end to end, in process: store a quandary, review and
confirm principles, generate the disclaimer-wrapped answer, then run a
blinded annotation session against the reference answer."""

import io
import json
import tempfile
from pathlib import Path

from quandary.service import QuandaryService, ServiceConfig

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def call(app, method, path, body=None, query=""):
    raw = json.dumps(body).encode() if body is not None else b""
    environ = {
        "REQUEST_METHOD": method,
        "PATH_INFO": path,
        "QUERY_STRING": query,
        "CONTENT_LENGTH": str(len(raw)),
        "wsgi.input": io.BytesIO(raw),
    }
    status = {}
    chunks = app.wsgi(environ, lambda s, h: status.update(code=int(s.split()[0])))
    return status["code"], json.loads(b"".join(chunks))


data_dir = Path(tempfile.mkdtemp(prefix="quandary-demo-"))
app = QuandaryService(ServiceConfig(data_dir=data_dir, principles_path=FIXTURES / "principles_100.jsonl", seed=3))
print("journals under", data_dir)

code, _ = call(app, "POST", "/quandaries", {
    "id": "demo-1",
    "context": ["A friend asked me to be a reference for a job she cannot do safely."],
    "question": "Do I exaggerate for my friend or tell the employer the truth?",
    "source": "demo",
})
print("create quandary ->", code)

code, cands = call(app, "GET", "/quandaries/demo-1/candidates")
print(f"candidates -> {code}: {len(cands['candidates'])} ranked, threshold {cands['threshold']}")
for c in cands["candidates"][:3]:
    print(f"   {c['score']:.3f} [{c['provenance']}] {c['text']}")

code, selection = call(app, "POST", "/quandaries/demo-1/selection", {
    "token": cands["token"],
    "chosen": [cands["candidates"][0]["id"], cands["candidates"][1]["id"]],
    "annotator": "demo-reviewer",
})
print("confirm selection ->", code, [p["id"] for p in selection["principles"]])

code, answer = call(app, "POST", "/quandaries/demo-1/answer", {"backend": "mock", "seed": 3})
wrapped = answer["disclaimer_wrapped"].splitlines()
print("generate ->", code, f"({len(answer['segments'])} segments)")
print("   first line:", wrapped[0])
print("   last line: ", wrapped[-1])

# Blinded annotation: the payload shows answers only under A/B labels.
code, session = call(app, "POST", "/sessions", {
    "kind": "annotation",
    "seed": 3,
    "pairs": [{
        "pair_id": "demo-pair",
        "quandary_id": "demo-1",
        "systems": [
            {"id": "pipeline", "text": answer["concatenated"]},
            {"id": "ethicist", "text": "Tell the truth, including what she does well."},
        ],
    }],
})
sid = session["session_id"]
code, nxt = call(app, "GET", f"/sessions/{sid}/next")
print("\nannotation /next keys:", sorted(nxt.keys()))
print("   questions served:", len(nxt["questions"]), "| labels only:", sorted(nxt["answers"].keys()))
code, vote = call(app, "POST", f"/sessions/{sid}/votes", {
    "pair_id": "demo-pair",
    "annotator": "demo-annotator",
    "choices": {"multi_perspective": "A", "coherence": "Both", "justification": "None"},
})
print("vote ->", code, vote)
