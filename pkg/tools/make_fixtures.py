#!/usr/bin/env python3
"""Regenerate the deterministic fixture files under fixtures/.

The annotation fixture encodes engineered counts so the shipped analysis
numbers come out exactly:
  multi-perspective: 30 system-only + 51 Both of 130  -> 62.31%
  coherence:         56 successes of 130              -> 43.08% (43.07 +/- 0.01)
  justification:     84 successes of 130              -> 64.62% (64.61 +/- 0.01)
  coherent pairs justified: 51 of 56                  -> 91.07%
  low/high score strata (37/43 pairs): 19/37 and 30/43 multi-perspective
  successes -> 51.35% / 69.77%.

Every constraint is asserted before anything is written; the script is safe
to re-run and always produces byte-identical output.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"

sys.path.insert(0, str(ROOT / "src"))

from quandary.analysis import assign_blinding, save_blinding  # noqa: E402

SYSTEM = "pipeline"
REFERENCE = "ethicist"
BLINDING_SEED = 20
ANNOTATOR = "ann-1"

N = 130
LOW = range(1, 38)  # 37 pairs
MID = range(38, 88)  # 50 pairs
HIGH = range(88, 131)  # 43 pairs

# Success index sets per criterion (1-based pair numbers).
MULTI_SUCCESS = set(range(1, 20)) | set(range(38, 70)) | set(range(88, 118))  # 19 + 32 + 30 = 81
COH_SUCCESS = set(range(1, 16)) | set(range(38, 56)) | set(range(88, 111))  # 15 + 18 + 23 = 56
JUST_SUCCESS = (
    set(range(1, 14)) | set(range(16, 26))  # low: 13 coherent + 10 non-coherent = 23
    | set(range(38, 55)) | set(range(56, 69))  # mid: 17 + 13 = 30
    | set(range(88, 109)) | set(range(111, 121))  # high: 21 + 10 = 31
)  # 84 total, 51 of them coherent

# How successes split into system-only vs Both, and failures into
# reference-only vs None (success splits beyond multi-perspective are free
# choices; the multi-perspective split is the published 30/51).
SPLITS = {
    "multi_perspective": {"system_only": 30, "both": 51, "reference_only": 36, "none": 13},
    "coherence": {"system_only": 26, "both": 30, "reference_only": 50, "none": 24},
    "justification": {"system_only": 40, "both": 44, "reference_only": 30, "none": 16},
}

SUCCESS_SETS = {
    "multi_perspective": MULTI_SUCCESS,
    "coherence": COH_SUCCESS,
    "justification": JUST_SUCCESS,
}

STRATUM_SCORES = {"low": 10.0, "mid": 50.0, "high": 90.0}


def pair_id(i: int) -> str:
    return f"pair-{i:03d}"


def quandary_id(i: int) -> str:
    return f"fq-{i:03d}"


def check_engineering() -> None:
    assert len(MULTI_SUCCESS) == 81 and len(COH_SUCCESS) == 56 and len(JUST_SUCCESS) == 84
    assert len(MULTI_SUCCESS & set(LOW)) == 19
    assert len(MULTI_SUCCESS & set(HIGH)) == 30
    assert len(COH_SUCCESS & JUST_SUCCESS) == 51
    for criterion, split in SPLITS.items():
        successes = len(SUCCESS_SETS[criterion])
        assert split["system_only"] + split["both"] == successes, criterion
        assert sum(split.values()) == N, criterion
    # Rates the fixture must reproduce.
    assert abs(100 * 81 / N - 62.31) < 0.01
    assert abs(100 * 56 / N - 43.07) < 0.01
    assert abs(100 * 84 / N - 64.61) < 0.01
    assert abs(100 * 51 / 56 - 91.07) < 0.01
    assert abs(100 * 19 / 37 - 51.35) < 0.01
    assert abs(100 * 30 / 43 - 69.77) < 0.01


def build_annotation_fixture() -> None:
    blinding = {
        pair_id(i): assign_blinding(pair_id(i), (SYSTEM, REFERENCE), BLINDING_SEED, quandary_id=quandary_id(i))
        for i in range(1, N + 1)
    }

    records = []
    for criterion in ("multi_perspective", "coherence", "justification"):
        successes = sorted(SUCCESS_SETS[criterion])
        failures = sorted(set(range(1, N + 1)) - SUCCESS_SETS[criterion])
        split = SPLITS[criterion]
        outcome_by_pair: dict[int, str] = {}
        for rank, i in enumerate(successes):
            outcome_by_pair[i] = "system_only" if rank < split["system_only"] else "both"
        for rank, i in enumerate(failures):
            outcome_by_pair[i] = "reference_only" if rank < split["reference_only"] else "none"

        for i in range(1, N + 1):
            outcome = outcome_by_pair[i]
            pair = blinding[pair_id(i)]
            if outcome == "both":
                choice = "Both"
            elif outcome == "none":
                choice = "None"
            elif outcome == "system_only":
                choice = "A" if pair.label_A == SYSTEM else "B"
            else:
                choice = "A" if pair.label_A == REFERENCE else "B"
            records.append(
                {"pair_id": pair_id(i), "annotator": ANNOTATOR, "criterion": criterion, "choice": choice}
            )

    with (FIXTURES / "annotations_130.jsonl").open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    save_blinding(blinding, FIXTURES / "blinding_130.json")

    scores = {}
    for i in range(1, N + 1):
        stratum = "low" if i in LOW else ("mid" if i in MID else "high")
        scores[quandary_id(i)] = STRATUM_SCORES[stratum]
    (FIXTURES / "scores_bertscore_130.json").write_text(
        json.dumps(scores, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


VERBS = [
    "lie to", "betray", "report", "abandon", "undermine",
    "deceive", "shortchange", "ignore", "pressure", "exploit",
]
OBJECTS = [
    "your friends", "your family", "a colleague", "your employer", "a stranger",
    "your community", "someone vulnerable", "a client", "your partner", "a neighbor",
]
FRAMES = [
    "It is wrong to {v} {o}.",
    "You should never {v} {o}.",
    "No good comes from choosing to {v} {o}.",
    "Decent people refuse to {v} {o}.",
    "Nothing justifies a plan to {v} {o}.",
]


def build_principles_fixture() -> None:
    lines = []
    for vi, verb in enumerate(VERBS):
        for oi, obj in enumerate(OBJECTS):
            idx = vi * len(OBJECTS) + oi
            frame = FRAMES[(vi + oi) % len(FRAMES)]
            text = frame.format(v=verb, o=obj)
            lines.append({"id": f"rot-{idx:03d}", "text": text, "provenance": "retrieved"})
    assert len({l["text"] for l in lines}) == 100
    with (FIXTURES / "principles_100.jsonl").open("w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(json.dumps(line) + "\n")


PIPELINE_QUANDARIES = [
    {
        "id": "pq-01",
        "context": [
            "My manager asked me to shade the numbers in a client report so our quarter looks stronger.",
            "The client trusts me personally and has sent business to my colleagues for years.",
        ],
        "question": "Do I lie to the client to protect my employer, or refuse and risk my job?",
    },
    {
        "id": "pq-02",
        "context": [
            "I discovered a colleague quietly billing hours he never worked.",
            "He is the only earner for a family that includes a chronically ill partner.",
        ],
        "question": "Should I report the colleague or pressure him privately to stop?",
    },
    {
        "id": "pq-03",
        "context": [
            "A stranger left a wallet full of cash on the bus seat beside me.",
            "My family is behind on rent and no one saw me pick it up.",
        ],
        "question": "Is it ever acceptable to keep the money and return the empty wallet?",
    },
    {
        "id": "pq-04",
        "context": [
            "My neighbor runs an unlicensed daycare that half the street depends on.",
            "A licensing inspector asked me directly whether children are cared for there.",
        ],
        "question": "Do I deceive the inspector to protect my neighbor and community?",
    },
    {
        "id": "pq-05",
        "context": [
            "My partner asked me to hide a lapsed insurance policy from her parents, who co-signed our mortgage.",
        ],
        "question": "Is keeping the secret a betrayal of the people sharing our risk?",
    },
    {
        "id": "pq-06",
        "context": [
            "Our firm won a contract by promising a vulnerable client features we cannot deliver this year.",
            "The sales team wants me to stay quiet through renewal season.",
        ],
        "question": "Must I tell the client now, or is silence until renewal defensible?",
    },
    {
        "id": "pq-07",
        "context": [
            "A friend asked me to be a reference for a job she is plainly unqualified to do safely.",
        ],
        "question": "Do I exaggerate for my friend or tell the employer the truth?",
    },
    {
        "id": "pq-08",
        "context": [
            "I manage a team where one junior employee is carrying a senior who has quietly stopped working.",
            "The senior is three years from retirement and mentored me when I started.",
        ],
        "question": "Do I report the senior, reassign the junior, or ignore what I know?",
    },
    {
        "id": "pq-09",
        "context": [
            "My brother wants to exploit a loophole that shifts our late mother's care debts onto a public fund.",
        ],
        "question": "Is using the loophole theft from the community or prudent care for family?",
    },
    {
        "id": "pq-10",
        "context": [
            "A client offered me tickets to a playoff game the week before I score their bid.",
        ],
        "question": "Can I accept the gift, or does it pressure my judgment no matter what I intend?",
    },
    {
        "id": "pq-11",
        "context": [
            "My elderly neighbor asks me to buy her groceries and refuses to repay me, calling it a neighborly duty.",
            "My own budget is stretched and my partner resents the arrangement.",
        ],
        "question": "May I stop helping, or does abandoning her make the street worse for everyone?",
    },
    {
        "id": "pq-12",
        "context": [
            "I overheard two strangers planning to shortchange a street vendor who barely speaks English.",
        ],
        "question": "Am I obliged to warn the vendor, or is ignoring strangers' schemes acceptable?",
    },
]

PIPELINE_ANSWERS = {
    "pq-01": "Refuse, and say why in writing. A report shaded for one quarter becomes the standard for every quarter after it, and the client you deceive today is the reference you need tomorrow. Offer your manager an honest framing of the numbers instead; if the job survives only on the lie, the job was already gone.",
    "pq-02": "Speak to him first, once, with a deadline. The family's need is real, but it does not transfer to your silence; every padded hour is billed to people who trusted both of you. If he will not correct it himself, report it and help him find the support the family actually needs.",
    "pq-03": "Return the wallet whole. Your rent trouble is an argument for asking for help, not for taking a stranger's. The test is simple: if the wallet were yours, no one would call your need a license to keep it.",
    "pq-04": "Do not lie to the inspector, and warn your neighbor before the visit. The street depends on the daycare precisely because children are in it, which is exactly why licensing exists. Help her get licensed; a community built on one inspection dodge is one complaint from collapse.",
    "pq-05": "The policy lapse is not yours to hide. Her parents signed for a risk they believe is insured, and silence spends their trust without consent. Tell your partner the secret has a one-week shelf life, then fix the policy together.",
    "pq-06": "Tell the client now, with a recovery plan attached. Every silent week converts a sales error into your personal deception, and vulnerable clients pay the difference. Renewal season rewards vendors who surface bad news before it costs them.",
    "pq-07": "Be the reference and tell the truth, including what she does well. An exaggeration that lands her an unsafe job helps no one, least of all her. Friendship owes honest praise, not a borrowed credential.",
    "pq-08": "You owe the junior an honest workload and the senior an honest conversation, in that order. Gratitude for old mentorship is a reason to speak to him directly, not a reason to spend the junior's career on his last three years. If nothing changes, escalate with records.",
    "pq-09": "The loophole is legal leverage aimed at a fund meant for people with no brothers to call. Care for family cannot mean billing the community for what you can cover. Split the debt fairly and leave the fund for those without the choice.",
    "pq-10": "Decline the tickets until the bid is scored. The gift may be innocent, but the pressure it creates is not something you can intend away, and the other bidders never got the seat beside you. Accept gladly after the decision, if offered again.",
    "pq-11": "You may renegotiate without abandoning her. Set a sum you can give freely, tell her what it is, and ask the street to share the rest. Duty to a neighbor is real, but it is the street's duty, not your budget's alone.",
    "pq-12": "Warn the vendor. You are the only person present who knows and can speak, which makes the duty yours, not some stranger's. It costs you a sentence; it costs him a day's earnings.",
}


def build_pipeline_corpus() -> None:
    with (FIXTURES / "corpus_pipeline.jsonl").open("w", encoding="utf-8") as fh:
        for q in PIPELINE_QUANDARIES:
            fh.write(json.dumps({**q, "source": "synthetic"}) + "\n")
        for qid, text in PIPELINE_ANSWERS.items():
            fh.write(json.dumps({"quandary_id": qid, "text": text, "author": "ethicist"}) + "\n")


def build_bleu_fixture() -> None:
    pairs = [
        {
            "quandary_id": "bleu-1",
            "candidate": "the cat sat on the mat .",
            "reference": "the cat sat on the red mat .",
        },
        {
            "quandary_id": "bleu-2",
            "candidate": "it is raining hard",
            "reference": "it is raining heavily today",
        },
    ]
    with (FIXTURES / "bleu_pairs.jsonl").open("w", encoding="utf-8") as fh:
        for p in pairs:
            fh.write(json.dumps(p) + "\n")


def main() -> None:
    FIXTURES.mkdir(exist_ok=True)
    check_engineering()
    build_annotation_fixture()
    build_principles_fixture()
    build_pipeline_corpus()
    build_bleu_fixture()
    print("fixtures written to", FIXTURES)


if __name__ == "__main__":
    main()
