"""Validates bbayes output files against the shipped JSON schemas.

usage: validate_outputs.py SCHEMA_DIR FILE...
"""

import json
import pathlib
import sys

import jsonschema
from referencing import Registry, Resource

SCHEMA_FOR = {
    "draws.json": "draws",
    "scaler.json": "scaler",
    "imputation.json": "imputation",
    "summary.json": "summary",
    "evaluation.json": "evaluation",
    "baselines.json": "baselines",
    "compare.json": "compare",
}


def schema_name(path: pathlib.Path) -> str:
    if path.name.endswith("manifest.json"):
        return "manifest"
    return SCHEMA_FOR[path.name]


def load_registry(schema_dir: pathlib.Path) -> tuple[Registry, dict]:
    schemas = {}
    resources = []
    for f in sorted(schema_dir.glob("*.schema.json")):
        doc = json.loads(f.read_text())
        schemas[f.name.removesuffix(".schema.json")] = doc
        resources.append((doc["$id"], Resource.from_contents(doc)))
    return Registry().with_resources(resources), schemas


def main(argv: list[str]) -> int:
    schema_dir = pathlib.Path(argv[1])
    registry, schemas = load_registry(schema_dir)
    failures = 0
    for name in argv[2:]:
        path = pathlib.Path(name)
        schema = schemas[schema_name(path)]
        validator = jsonschema.Draft202012Validator(schema, registry=registry)
        errors = list(validator.iter_errors(json.loads(path.read_text())))
        for e in errors[:5]:
            print(f"{path}: {e.json_path}: {e.message}")
        failures += bool(errors)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
