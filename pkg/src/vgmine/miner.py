"""Grounding-label mining: score region descriptions and object annotations
against each (image, question, answer) triplet and emit the selected boxes.

Pipeline per triplet:
  1. extract informative words (nouns/verbs surviving the stopword filter)
     from the question and answer;
  2. keep the region descriptions sharing the most informative words
     (ties kept, at least ``min_region_matches`` required);
  3. keep objects whose name matches an informative noun, restricted to the
     selected regions when any exist, then deduplicate overlapping boxes
     with a greedy IoU filter;
  4. for counting questions, drop the region boxes after the object boxes
     have been extracted under their containment constraint.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .dataset import BoundingBox, Dataset, ObjectAnnotation, QaTriplet, RegionAnnotation
from .lexicon import Lexicon, MatchCondition, Pos, normalize_token, tokenize

DEFAULT_STOPWORDS = frozenset({
    "a", "an", "the", "is", "are", "was", "were", "be", "been", "do", "does",
    "what", "which", "who", "how", "where", "there", "of", "on", "in", "to",
})

DEFAULT_COUNTING_PREFIXES = ("how many", "what number of", "count")

# (query word, annotation word, condition name)
MatchedWord = tuple[str, str, str]


@dataclass(frozen=True)
class MinerConfig:
    iou_threshold: float = 0.5
    min_region_matches: int = 2
    stopwords: frozenset[str] = DEFAULT_STOPWORDS
    counting_prefixes: tuple[str, ...] = DEFAULT_COUNTING_PREFIXES
    center_containment: bool = True  # False demands full box containment

    def __post_init__(self) -> None:
        if not 0.0 < self.iou_threshold <= 1.0:
            raise ValueError("iou_threshold must be in (0, 1]")
        if self.min_region_matches < 1:
            raise ValueError("min_region_matches must be >= 1")


@dataclass
class GroundingLabel:
    qa_id: int | str
    region_boxes: list[BoundingBox]
    object_boxes: list[BoundingBox]
    is_counting: bool
    region_match_count: int
    matched_words: list[MatchedWord] = field(default_factory=list)


def informative_words(text: str, lexicon: Lexicon,
                      stopwords: frozenset[str] = DEFAULT_STOPWORDS,
                      pos: Pos | None = None) -> list[str]:
    """Deduplicated tokens that pass the stopword filter and have a noun or
    verb lexicon entry (directly or via morphy); order of first appearance."""
    words: list[str] = []
    seen: set[str] = set()
    for token in tokenize(text):
        token = normalize_token(token)
        if not token or token in seen or token in stopwords:
            continue
        seen.add(token)
        if lexicon.has_entry(token, pos):
            words.append(token)
    return words


def match_count(annotation_text: str, question: str, answer: str,
                lexicon: Lexicon, cfg: MinerConfig) -> tuple[int, list[MatchedWord]]:
    """Count distinct informative annotation words matching any informative
    word of question or answer; each annotation word counts at most once."""
    query_words = _query_words(question, answer, lexicon, cfg)
    return _match_against(annotation_text, query_words, lexicon, cfg)


def _query_words(question: str, answer: str, lexicon: Lexicon,
                 cfg: MinerConfig, pos: Pos | None = None) -> list[str]:
    words = informative_words(question, lexicon, cfg.stopwords, pos)
    for w in informative_words(answer, lexicon, cfg.stopwords, pos):
        if w not in words:
            words.append(w)
    return words


def _match_against(annotation_text: str, query_words: list[str],
                   lexicon: Lexicon, cfg: MinerConfig) -> tuple[int, list[MatchedWord]]:
    matches: list[MatchedWord] = []
    for ann_word in informative_words(annotation_text, lexicon, cfg.stopwords):
        for query_word in query_words:
            result = lexicon.words_match(query_word, ann_word)
            if result.matched:
                matches.append((query_word, ann_word, result.condition.name.lower()))
                break
    return len(matches), matches


def select_regions(triplet: QaTriplet, regions: list[RegionAnnotation],
                   lexicon: Lexicon, cfg: MinerConfig) -> list[RegionAnnotation]:
    """All regions achieving the maximum match count, when that count
    reaches ``min_region_matches``; empty list otherwise."""
    selected, _, _ = _score_regions(triplet, regions, lexicon, cfg)
    return selected


def _score_regions(triplet: QaTriplet, regions: list[RegionAnnotation],
                   lexicon: Lexicon, cfg: MinerConfig
                   ) -> tuple[list[RegionAnnotation], int, list[MatchedWord]]:
    query_words = _query_words(triplet.question, triplet.answer, lexicon, cfg)
    best = 0
    scored: list[tuple[RegionAnnotation, int, list[MatchedWord]]] = []
    for region in regions:
        count, matches = _match_against(region.phrase, query_words, lexicon, cfg)
        scored.append((region, count, matches))
        best = max(best, count)
    if best < cfg.min_region_matches:
        return [], best, []
    selected = [region for region, count, _ in scored if count == best]
    matched: list[MatchedWord] = []
    for _, count, matches in scored:
        if count == best:
            matched.extend(matches)
    return selected, best, matched


def is_counting_question(question: str, cfg: MinerConfig) -> bool:
    normalized = " ".join(question.lower().split())
    return normalized.startswith(cfg.counting_prefixes)


def select_objects(triplet: QaTriplet, objects: list[ObjectAnnotation],
                   selected_regions: list[RegionAnnotation],
                   lexicon: Lexicon, cfg: MinerConfig
                   ) -> list[ObjectAnnotation]:
    kept, _ = _score_objects(triplet, objects, selected_regions, lexicon, cfg)
    return kept


def _score_objects(triplet: QaTriplet, objects: list[ObjectAnnotation],
                   selected_regions: list[RegionAnnotation],
                   lexicon: Lexicon, cfg: MinerConfig
                   ) -> tuple[list[ObjectAnnotation], list[MatchedWord]]:
    query_nouns = _query_words(triplet.question, triplet.answer, lexicon, cfg,
                               pos=Pos.NOUN)
    candidates: list[tuple[ObjectAnnotation, MatchCondition, MatchedWord]] = []
    for obj in objects:
        best: tuple[MatchCondition, MatchedWord] | None = None
        for name in obj.names:
            for query_word in query_nouns:
                result = lexicon.words_match(query_word, normalize_token(name))
                if result.matched and (best is None or result.condition.value < best[0].value):
                    best = (result.condition, (query_word, normalize_token(name),
                                               result.condition.name.lower()))
        if best is None:
            continue
        if selected_regions and not _inside_some_region(obj.box, selected_regions, cfg):
            continue
        candidates.append((obj, best[0], best[1]))

    candidates.sort(key=lambda item: (item[1].value, -item[0].box.area()))
    kept: list[ObjectAnnotation] = []
    matched: list[MatchedWord] = []
    for obj, _, match in candidates:
        if any(obj.box.iou(k.box) >= cfg.iou_threshold for k in kept):
            continue
        kept.append(obj)
        matched.append(match)
    return kept, matched


def _inside_some_region(box: BoundingBox, regions: list[RegionAnnotation],
                        cfg: MinerConfig) -> bool:
    if cfg.center_containment:
        cx, cy = box.center()
        return any(r.box.contains_point(cx, cy) for r in regions)
    return any(r.box.contains_box(box) for r in regions)


def mine(dataset: Dataset, lexicon: Lexicon, cfg: MinerConfig | None = None
         ) -> list[GroundingLabel]:
    """One GroundingLabel per triplet that yields region or object boxes,
    in input triplet order. Counting questions keep only object boxes."""
    cfg = cfg or MinerConfig()
    labels: list[GroundingLabel] = []
    for triplet in dataset.triplets:
        regions = dataset.regions_by_image.get(triplet.image_id, [])
        objects = dataset.objects_by_image.get(triplet.image_id, [])
        selected_regions, best, region_matches = _score_regions(
            triplet, regions, lexicon, cfg)
        selected_objects, object_matches = _score_objects(
            triplet, objects, selected_regions, lexicon, cfg)
        counting = is_counting_question(triplet.question, cfg)
        region_boxes = [] if counting else [r.box for r in selected_regions]
        object_boxes = [o.box for o in selected_objects]
        if not region_boxes and not object_boxes:
            continue
        matched: list[MatchedWord] = []
        for m in region_matches + object_matches:
            if m not in matched:
                matched.append(m)
        labels.append(GroundingLabel(
            qa_id=triplet.qa_id,
            region_boxes=region_boxes,
            object_boxes=object_boxes,
            is_counting=counting,
            region_match_count=best,
            matched_words=matched,
        ))
    return labels


def label_to_dict(label: GroundingLabel) -> dict:
    return {
        "qa_id": label.qa_id,
        "region_boxes": [b.as_list() for b in label.region_boxes],
        "object_boxes": [b.as_list() for b in label.object_boxes],
        "is_counting": label.is_counting,
        "region_match_count": label.region_match_count,
        "matched_words": [list(m) for m in label.matched_words],
    }


def label_from_dict(data: dict) -> GroundingLabel:
    return GroundingLabel(
        qa_id=data["qa_id"],
        region_boxes=[BoundingBox(*b) for b in data["region_boxes"]],
        object_boxes=[BoundingBox(*b) for b in data["object_boxes"]],
        is_counting=data["is_counting"],
        region_match_count=data["region_match_count"],
        matched_words=[tuple(m) for m in data["matched_words"]],
    )


def write_labels(labels: list[GroundingLabel], path: str | Path) -> None:
    """NDJSON, one label per line, stable field order."""
    with open(path, "w", encoding="utf-8") as fp:
        for label in labels:
            fp.write(json.dumps(label_to_dict(label), separators=(", ", ": ")))
            fp.write("\n")


def read_labels(path: str | Path) -> list[GroundingLabel]:
    labels = []
    with open(path, encoding="utf-8") as fp:
        for line in fp:
            if line.strip():
                labels.append(label_from_dict(json.loads(line)))
    return labels
