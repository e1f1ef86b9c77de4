"""Bundled sample data: a small demo meeting and a background parse corpus."""
from __future__ import annotations

import json
from importlib import resources

from ..corpus import Meeting, RelationStats, build_relation_stats, meeting_from_dict


def _load_json(name: str) -> dict:
    path = resources.files(__package__).joinpath(name)
    with path.open("r", encoding="utf-8") as fh:
        return json.load(fh)


def load_kickoff_meeting() -> Meeting:
    """Three-utterance demo meeting used by the docs and the smoke tests."""
    return meeting_from_dict(_load_json("kickoff_meeting.json"))


def load_background_corpus() -> Meeting:
    """Parsed background sentences for relation statistics and word frequencies."""
    return meeting_from_dict(_load_json("background_corpus.json"))


def default_stats(floor_prob: float = 1e-3) -> RelationStats:
    return build_relation_stats([load_background_corpus()], floor_prob=floor_prob)
