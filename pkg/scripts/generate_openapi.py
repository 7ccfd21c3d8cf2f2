#!/usr/bin/env python3
"""
Generate the OpenAPI document of the Sampling Discretization API.

The schema is checked for the expected endpoints and tags before it is written,
so a stale or incomplete openapi.json is never produced.
"""

import argparse
import json
import os
import sys
from typing import Dict, List

# Add parent directory to path to import from src
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.main import app

EXPECTED_PATHS = ["/", "/health", "/rules/build", "/rules/quality", "/er/eval", "/er/batch",
                  "/er/bound", "/witness", "/fool", "/mc-experiment", "/rate-fit", "/run"]
EXPECTED_TAGS = ["general", "rules", "discretization", "lower-bounds", "experiments"]


def build_openapi_spec() -> Dict:
    return app.openapi()


def schema_problems(schema: Dict) -> List[str]:
    """Missing fields, paths or tags; empty when the schema is complete."""
    problems = [f"missing field '{name}'" for name in ("openapi", "info", "paths") if name not in schema]
    if problems:
        return problems
    if not str(schema["openapi"]).startswith("3."):
        problems.append(f"expected OpenAPI 3.x, got {schema['openapi']}")
    problems += [f"missing path '{path}'" for path in EXPECTED_PATHS if path not in schema["paths"]]
    tag_names = {tag["name"] for tag in schema.get("tags", [])}
    problems += [f"missing tag '{tag}'" for tag in EXPECTED_TAGS if tag not in tag_names]
    return problems


def write_openapi_spec(path: str) -> Dict:
    schema = build_openapi_spec()
    problems = schema_problems(schema)
    if problems:
        raise RuntimeError("incomplete OpenAPI schema: " + "; ".join(problems))
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps(schema, indent=2, sort_keys=True))
    return schema


def main() -> None:
    project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    parser = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
    parser.add_argument("--output", default=os.path.join(project_root, "openapi.json"))
    args = parser.parse_args()

    schema = write_openapi_spec(args.output)
    print("✅ OpenAPI specification generated successfully!")
    print(f"📁 Saved to: {args.output}")
    print(f"📊 API Title: {schema['info']['title']}")
    print(f"🔢 API Version: {schema['info']['version']}")
    print(f"🎯 Total Endpoints: {len(schema['paths'])}")

    print("\n📋 Available Endpoints:")
    for path, methods in schema["paths"].items():
        for method, details in methods.items():
            print(f"   {method.upper():6} {path:20} - {details.get('summary', 'No summary')}")


if __name__ == "__main__":
    main()
