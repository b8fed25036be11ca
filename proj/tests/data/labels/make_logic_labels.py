"""Regenerates logic_labels.jsonl.

Each line pairs a furniture object with a realized feature bundle. The label
is 1 when every feature named by the bundle matches the object, else 0. Half
of the objects are drawn to satisfy the bundle so both labels are common.
"""
import itertools
import json
import random

ATTRS = [
    ("type", ["chair", "sofa", "desk", "fan"]),
    ("colour", ["blue", "red", "green", "grey"]),
    ("size", ["large", "small"]),
    ("orientation", ["left", "right", "front", "back"]),
]


def realize(b):
    words = ["a"]
    if b["size"] and b["colour"]:
        words += [b["size"] + ",", b["colour"]]
    elif b["size"] or b["colour"]:
        words.append(b["size"] or b["colour"])
    words.append(b["type"] or "thing")
    if b["orientation"]:
        words += ["facing", b["orientation"]]
    return " ".join(words)


def main():
    rng = random.Random(20240611)
    bundles = [dict(zip([a for a, _ in ATTRS], combo))
               for combo in itertools.product(*[values + [None] for _, values in ATTRS])]
    assert len(bundles) == 375
    lines = []
    for i in range(640):
        b = rng.choice(bundles)
        obj = {a: rng.choice(values) for a, values in ATTRS}
        if i % 2 == 0:
            obj.update({a: v for a, v in b.items() if v is not None})
        label = int(all(v is None or obj[a] == v for a, v in b.items()))
        lines.append(json.dumps({"object": obj, "utterance": realize(b), "label": label}))
    with open("logic_labels.jsonl", "w") as f:
        f.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
