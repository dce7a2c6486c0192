import copy
import json

import pytest

from drre.cases import (CaseError, case_from_dict, case_to_dict, parse_case,
                        validate_case, write_case)
from drre.generator import make_ieee33_case, random_small_case


def test_roundtrip_through_dict(small_case):
    doc = case_to_dict(small_case)
    again = case_from_dict(doc)
    assert case_to_dict(again) == doc


def test_roundtrip_through_file(tmp_path, small_case):
    path = tmp_path / "case.json"
    write_case(small_case, str(path))
    again = parse_case(str(path))
    assert case_to_dict(again) == case_to_dict(small_case)


def test_bundled_case_parses_and_validates():
    import drre.cli as cli
    case = parse_case(cli._BUNDLED)
    assert validate_case(case).ok
    assert len(case.nodes) == 33
    assert len(case.lines) == 37
    assert case_to_dict(case) == case_to_dict(make_ieee33_case())


def test_missing_key_is_schema_error(small_case):
    doc = case_to_dict(small_case)
    del doc["nodes"][0]["id"]
    with pytest.raises(CaseError):
        case_from_dict(doc)


def test_dangling_line_endpoint(small_case):
    doc = copy.deepcopy(case_to_dict(small_case))
    doc["lines"][0]["to"] = 999
    with pytest.raises(CaseError):
        case_from_dict(doc)


def test_duplicate_node_id(small_case):
    doc = copy.deepcopy(case_to_dict(small_case))
    doc["nodes"].append(dict(doc["nodes"][-1]))
    with pytest.raises(CaseError):
        case_from_dict(doc)


def test_track_probabilities_validation(small_case):
    doc = copy.deepcopy(case_to_dict(small_case))
    for tr in doc["tracks"]:
        tr["probability"] = 0.9
    if len(doc["tracks"]) == 1:
        pytest.skip("single-track fixture always sums to its own value")
    with pytest.raises(CaseError):
        case = case_from_dict(doc)
        report = validate_case(case)
        if not report.ok:
            raise CaseError("; ".join(str(v) for v in report.violations))


def test_generated_fixtures_are_valid():
    for seed in range(1, 12):
        case = random_small_case(seed)
        assert validate_case(case).ok
        assert 3 <= len(case.nodes) <= 6
        assert 2 <= len(case.lines) <= 5
        assert case.periods <= 3
        assert 1 <= len(case.tracks) <= 2


def test_json_file_is_plain_json(tmp_path, small_case):
    path = tmp_path / "case.json"
    write_case(small_case, str(path))
    with open(path) as f:
        json.load(f)
