"""Versioned JSON schemas for the files written by the benchmark."""

import json
from importlib import resources

RUN_RECORD = "run_record.v1.json"
SUMMARY = "summary.v1.json"


def load_schema(name: str) -> dict:
    return json.loads(resources.files(__name__).joinpath(name).read_text())
