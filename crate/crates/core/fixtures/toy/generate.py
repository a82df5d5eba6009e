"""Regenerates the toy passage corpus and the toy generator training set.

    python3 fixtures/toy/generate.py
"""
import json
import random
from pathlib import Path

HERE = Path(__file__).parent
rng = random.Random(20)

RIVERS = [
    "Alder", "Birch", "Cedar", "Dunmore", "Elvet", "Fallow", "Garrow", "Hollin",
    "Ivel", "Jessop", "Kennet", "Lossie", "Marden", "Nadder", "Ouzel", "Pendle",
    "Quarrel", "Rother", "Sowe", "Tavy", "Ure", "Vyrnwy", "Wissey", "Yarrow",
    "Axe", "Brue", "Colne", "Dove", "Erme", "Frome", "Glaven", "Hamble",
    "Irwell", "Kent", "Leadon", "Meon", "Nene", "Otter", "Parrett", "Roding",
    "Sid", "Teme", "Usk", "Wear", "Witham", "Yeo", "Allen", "Bain",
    "Calder", "Derwent", "Eden", "Fowey", "Gipping", "Hodder", "Idle", "Lune",
    "Mole", "Nidd", "Ock", "Pang", "Rea", "Swale", "Tees", "Waveney",
    "Wey", "Wharfe", "Bure", "Chess", "Darent", "Exe",
]
JOINS = ["Ostra", "Vell", "Marn", "Tolle", "Sund"]
YEARS = ["1788", "1803", "1821", "1834", "1850", "1867", "1879", "1892"]
NAMES = ["Anna Holm", "Felix Brunot", "Ida Marsh", "Tomas Reyes", "Clara Voss", "Jonas Pike"]
TOWNS = ["Westby", "Harlow", "Kettering", "Amblecote", "Riverton", "Stoke Ferry"]
LENGTHS = ["12", "18", "25", "31", "40", "57"]
FEATURES = [
    "orchards and old stone mills",
    "trout fishing and water meadows",
    "its limestone bridges and weirs",
    "wading birds and reed beds",
]


def passage(river, join, year, name, town, length, feature):
    return (
        f"The {river} River rises in the hills above {town} and flows north for "
        f"{length} kilometres before it joins the {join} River. It was first mapped "
        f"in {year} by the surveyor {name}, who named it after a local family. "
        f"The valley is known for {feature}. References External links"
    )


def draw():
    return (
        rng.choice(JOINS), rng.choice(YEARS), rng.choice(NAMES),
        rng.choice(TOWNS), rng.choice(LENGTHS), rng.choice(FEATURES),
    )


rivers = RIVERS[:]
rng.shuffle(rivers)
train_rivers, toy_rivers = rivers[:20], rivers[20:70]

paragraphs = []
for i, river in enumerate(train_rivers):
    join, year, name, town, length, feature = draw()
    context = passage(river, join, year, name, town, length, feature)
    kind = i % 4
    if kind == 0:
        q, a = f"When was the {river} River first mapped?", year
    elif kind == 1:
        q, a = f"Who first mapped the {river} River?", name
    elif kind == 2:
        q, a = f"Which river does the {river} River join?", f"{join} River"
    else:
        q, a = f"How long is the {river} River?", f"{length} kilometres"
    start = context.index(a)
    paragraphs.append({
        "title": f"train-{i:02}",
        "paragraphs": [{
            "context": context,
            "qas": [{"id": f"train-{i:02}-q", "question": q,
                     "answers": [{"text": a, "answer_start": start}]}],
        }],
    })

with open(HERE / "train.json", "w", encoding="utf-8") as f:
    json.dump({"version": "1.1", "data": paragraphs}, f, ensure_ascii=False, indent=1)
    f.write("\n")

with open(HERE / "passages.jsonl", "w", encoding="utf-8") as f:
    for i, river in enumerate(toy_rivers):
        text = passage(river, *draw())
        rec = {"id": f"toy-{i:02}", "text": text, "language": "en"}
        f.write(json.dumps(rec, ensure_ascii=False) + "\n")
