"""Regenerate the bundled synthetic fixtures under src/harlex/data/.

The 240-tweet corpus mirrors the per-type class balance of a real
harassment-annotated Twitter corpus in miniature and plants separable
vocabulary: each type has its own topic tokens (present in harassing and
non-harassing tweets of that type) and all harassing tweets draw from a
shared pool of mild insult markers.  Every planted token recurs often
enough to clear an embedding min_count of 10.

Deterministic: fixed seed, stable iteration order.  Run from the repo
root: python3 tools/make_fixture.py
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

DATA = Path(__file__).resolve().parents[1] / "src" / "harlex" / "data"

# (type, total, harassing) per row; totals scale a 24k-tweet corpus by ~1%
PLAN = [
    ("sexual", 38, 4),
    ("racial", 50, 7),
    ("appearance", 48, 7),
    ("intellectual", 49, 7),
    ("political", 55, 6),
]

TOPICS = {
    "sexual": ["dating", "flirting", "selfies", "crush", "romance", "single"],
    "racial": ["heritage", "accent", "immigrants", "culture", "foreign", "border"],
    "appearance": ["haircut", "outfit", "weight", "mirror", "fashion", "makeup"],
    "intellectual": ["grades", "homework", "quiz", "logic", "lecture", "essay"],
    "political": ["senate", "ballot", "rally", "policy", "debate", "votes"],
}

INSULTS = ["loser", "idiot", "pathetic", "trash", "clown"]
BENIGN = ["friend", "lovely", "thanks", "awesome", "weekend"]
FILLER = ["the", "a", "to", "is", "my", "you", "so", "just", "really", "today"]
DECOR = ["@someone", "#monday", "https://t.co/abc123", "!!!", ":)"]


def make_text(rng: np.random.Generator, topic_pool: list[str], markers: list[str]) -> str:
    words = []
    words += list(rng.choice(topic_pool, size=4, replace=True))
    words += list(rng.choice(markers, size=3, replace=True))
    words += list(rng.choice(FILLER, size=int(rng.integers(2, 5)), replace=True))
    if rng.random() < 0.3:
        words.append(str(rng.choice(DECOR)))
    perm = rng.permutation(len(words))
    return " ".join(words[i] for i in perm)


def build_corpus() -> tuple[list[dict], dict]:
    rng = np.random.default_rng(20240811)
    rows = []
    counts = {}
    i = 0
    for type_name, total, harassing in PLAN:
        counts[type_name] = {"total": total, "harassing": harassing,
                             "nonharassing": total - harassing}
        for j in range(total):
            is_h = j < harassing
            markers = INSULTS if is_h else BENIGN
            rows.append({
                "id": f"t{i:04d}",
                "text": make_text(rng, TOPICS[type_name], markers),
                "type": type_name,
                "label": "harassing" if is_h else "nonharassing",
            })
            i += 1
    order = rng.permutation(len(rows))
    rows = [rows[k] for k in order]
    counts["combined"] = {
        "total": sum(p[1] for p in PLAN),
        "harassing": sum(p[2] for p in PLAN),
        "nonharassing": sum(p[1] - p[2] for p in PLAN),
    }
    return rows, counts


# 24 annotated rows with a fixed vote table: slight disagreement so that
# kappa lands strictly between 0 and 1, plus one undecidable row (dropped
# on load) and one all-other row paired with an explicit label.
VOTE_ROWS = [
    ("yes", "yes", "yes"), ("yes", "yes", "yes"), ("yes", "yes", "no"),
    ("yes", "no", "yes"), ("no", "yes", "yes"), ("yes", "yes", "other"),
    ("no", "no", "no"), ("no", "no", "no"), ("no", "no", "no"),
    ("no", "no", "yes"), ("no", "yes", "no"), ("yes", "no", "no"),
    ("no", "no", "other"), ("no", "other", "no"), ("other", "no", "no"),
    ("yes", "yes", "yes"), ("no", "no", "no"), ("no", "no", "no"),
    ("yes", "yes", "no"), ("no", "no", "yes"), ("no", "no", "no"),
    ("yes", "other", "no"),   # undecidable: dropped at load time
    ("other", "other", "other"),  # undecidable: dropped at load time
    ("no", "no", "no"),
]


def build_votes() -> list[dict]:
    rng = np.random.default_rng(7)
    types = list(TOPICS)
    rows = []
    for i, votes in enumerate(VOTE_ROWS):
        yes = votes.count("yes")
        no = votes.count("no")
        label = "harassing" if yes >= 2 else "nonharassing" if no >= 2 else ""
        type_name = types[i % len(types)]
        markers = INSULTS if label == "harassing" else BENIGN
        rows.append({
            "id": f"v{i:03d}",
            "text": make_text(rng, TOPICS[type_name], markers),
            "type": type_name,
            "label": label,
            "votes": "|".join(votes),
        })
    return rows


LEXICON = """\
# Demo category lexicon: trailing * matches any token with that prefix.
[insults]
loser
idiot*
pathetic
trash
clown

[social]
friend*
thanks
awesome
lovely

[negations]
no
not
never

[pronouns_you]
you
your
yours

[pronouns_i]
i
me
my
mine

[politics]
senate
ballot*
rally
policy
debate
votes

[school]
grades
homework
quiz
lecture
essay
logic

[looks]
haircut
outfit
weight
mirror
fashion
makeup

[origin]
heritage
accent
immigrant*
culture
foreign
border

[courtship]
dating
flirt*
selfies
crush
romance
single

[time]
today
weekend
monday

[emphasis]
so
just
really
"""


def main() -> None:
    DATA.mkdir(parents=True, exist_ok=True)
    rows, counts = build_corpus()
    with open(DATA / "fixture_240.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["id", "text", "type", "label"])
        writer.writeheader()
        writer.writerows(rows)
    with open(DATA / "fixture_240_manifest.json", "w", encoding="utf-8") as fh:
        json.dump({"counts": counts, "rows": len(rows)}, fh, indent=1, sort_keys=True)
        fh.write("\n")

    votes = build_votes()
    with open(DATA / "fixture_votes.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["id", "text", "type", "label", "votes"])
        writer.writeheader()
        writer.writerows(votes)
    loadable = sum(1 for r in votes if r["label"])
    with open(DATA / "fixture_votes_manifest.json", "w", encoding="utf-8") as fh:
        json.dump({"rows_written": len(votes), "rows_loadable": loadable},
                  fh, indent=1, sort_keys=True)
        fh.write("\n")

    (DATA / "demo_categories.txt").write_text(LEXICON, encoding="utf-8")
    (DATA / "stopwords.txt").write_text(
        "\n".join(FILLER + ["<url>", "<usr>", "monday"]) + "\n", encoding="utf-8")
    print(f"wrote fixtures to {DATA}")


if __name__ == "__main__":
    main()
