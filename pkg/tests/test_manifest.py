import json

import pytest

from radonbl.core.errors import ManifestError
from radonbl.core.manifest import Command, Manifest, load_manifest


def test_manifest_round_trip(tmp_path):
    manifest = Manifest("poly", "vandermonde", {"n": 3, "t": "0,1,2"}, seed=7)
    assert manifest.command is Command.POLY
    path = tmp_path / "m.json"
    path.write_text(json.dumps(manifest.to_dict()), encoding="utf-8")
    loaded = load_manifest(path)
    assert loaded == manifest


def test_manifest_get_defaults():
    manifest = Manifest(Command.BL, "compute", {"datum": "parabola", "tol": None})
    assert manifest.get("tol", 1e-6) == 1e-6
    assert manifest.get("datum") == "parabola"


@pytest.mark.parametrize(
    "payload",
    [
        {"command": "nope", "action": "eval"},
        {"command": "poly", "action": "nope"},
        {"command": "poly", "action": "eval", "parameters": {"bogus": 1}},
        {"command": "poly", "action": "eval", "seed": -1},
        {"command": "poly", "action": "eval", "seed": 2**64},
        {"command": "poly", "action": "eval", "extra": True},
        {"action": "eval"},
        {"command": "poly", "action": "eval", "parameters": [1, 2]},
    ],
)
def test_invalid_manifests(payload):
    with pytest.raises(ManifestError):
        Manifest.from_dict(payload)


def test_load_manifest_errors(tmp_path):
    with pytest.raises(ManifestError):
        load_manifest(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ManifestError):
        load_manifest(bad)
