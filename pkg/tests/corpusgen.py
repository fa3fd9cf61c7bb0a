"""Seeded random mini-corpus generator for miner/oracle equivalence tests.

Vocabulary is drawn from the committed WordNet fixture subset plus inflected
forms, stopwords, and out-of-vocabulary junk, so generated corpora exercise
raw/lemma/synset/alias matching, the counting prefixes, containment, and the
IoU filter.
"""

from __future__ import annotations

import numpy as np

from vgmine.dataset import BoundingBox, Dataset, ObjectAnnotation, QaTriplet, RegionAnnotation

NOUNS = [
    "man", "men", "person", "people", "woman", "women", "child", "children",
    "kid", "boy", "girl", "dog", "dogs", "cat", "cats", "horse", "bird",
    "fish", "car", "cars", "automobile", "auto", "bus", "train", "bicycle",
    "bike", "bench", "benches", "tree", "trees", "table", "chair", "street",
    "house", "ball", "book", "books", "water", "hand", "hands", "head",
    "shirt", "hat", "hats", "apple", "apples", "banana", "food", "plate",
    "cup", "glass", "window", "door", "sign", "light", "game", "player",
    "players", "phone", "telephone", "grass", "sky", "computer", "two",
]
VERBS = [
    "talk", "talking", "walk", "walking", "run", "ran", "eat", "ate",
    "eating", "drink", "drank", "play", "playing", "sit", "sat", "sitting",
    "stand", "stood", "ride", "riding", "rode", "hold", "held", "wear",
    "wearing", "wore", "look", "looking", "watch", "watching", "read",
    "throw", "threw", "catch", "caught", "jump", "jumping", "fly", "flying",
    "swim", "swam", "drive", "driving", "drove", "speak", "doing",
]
STOPS = ["a", "an", "the", "is", "are", "was", "were", "what", "how",
         "where", "there", "of", "on", "in", "to"]
JUNK = ["qzxv", "blorp", "zzyx", "grlb", "many"]


def _word(rng: np.random.Generator) -> str:
    roll = rng.random()
    if roll < 0.5:
        return NOUNS[rng.integers(len(NOUNS))]
    if roll < 0.7:
        return VERBS[rng.integers(len(VERBS))]
    if roll < 0.9:
        return STOPS[rng.integers(len(STOPS))]
    return JUNK[rng.integers(len(JUNK))]


def _phrase(rng: np.random.Generator, n_lo: int = 2, n_hi: int = 6) -> str:
    n = int(rng.integers(n_lo, n_hi + 1))
    return " ".join(_word(rng) for _ in range(n))


def _box(rng: np.random.Generator, width: int, height: int) -> BoundingBox:
    x0 = int(rng.integers(0, width))
    y0 = int(rng.integers(0, height))
    bw = int(rng.integers(1, width - x0 + 1))
    bh = int(rng.integers(1, height - y0 + 1))
    return BoundingBox(x0, y0, x0 + bw - 1, y0 + bh - 1)


def _question(rng: np.random.Generator) -> str:
    noun = NOUNS[rng.integers(len(NOUNS))]
    verb = VERBS[rng.integers(len(VERBS))]
    forms = [
        f"what is the {noun} doing?",
        f"how many {noun} are there?",
        f"what number of {noun}?",
        f"count the {noun}",
        f"where is the {noun}?",
        f"what are the {noun} {verb}?",
        _phrase(rng, 3, 7) + "?",
    ]
    return forms[rng.integers(len(forms))]


def random_corpus(rng: np.random.Generator) -> Dataset:
    """A dataset of 1-3 images with at most 20 annotations each."""
    dataset = Dataset()
    next_id = [1000]

    def fresh_id() -> int:
        next_id[0] += 1
        return next_id[0]

    n_images = int(rng.integers(1, 4))
    image_ids = []
    dims = {}
    for i in range(n_images):
        image_id = 10 + i
        image_ids.append(image_id)
        width = int(rng.integers(200, 801))
        height = int(rng.integers(200, 801))
        dims[image_id] = (width, height)
        n_regions = int(rng.integers(0, 9))
        n_objects = int(rng.integers(0, min(13, 21 - n_regions)))
        dataset.regions_by_image[image_id] = [
            RegionAnnotation(fresh_id(), _phrase(rng), _box(rng, width, height))
            for _ in range(n_regions)
        ]
        objects = []
        for _ in range(n_objects):
            n_names = int(rng.integers(1, 3))
            names = tuple(
                NOUNS[rng.integers(len(NOUNS))] if rng.random() < 0.85
                else JUNK[rng.integers(len(JUNK))]
                for _ in range(n_names)
            )
            objects.append(ObjectAnnotation(fresh_id(), names, _box(rng, width, height)))
        dataset.objects_by_image[image_id] = objects

    for _ in range(int(rng.integers(1, 5))):
        image_id = image_ids[rng.integers(len(image_ids))]
        width, height = dims[image_id]
        answer = _word(rng)
        dataset.triplets.append(QaTriplet(
            fresh_id(), image_id, _question(rng), answer, width, height))
    return dataset
