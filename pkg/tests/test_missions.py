from dataclasses import replace

import pytest
from hypothesis import given, strategies as st

from sagin_bdo.errors import ConfigError, GenerationError
from sagin_bdo.missions import (
    DEFAULT_CATALOG,
    GeneratorConfig,
    MissionClass,
    VnfType,
    generate_missions,
    mission_digest,
    missions_from_csv,
    missions_to_csv,
    validate_mission,
)
from sagin_bdo.network import Segment, build_case_study_network

from instances import make_network

NET = build_case_study_network(0)


def test_chain_lengths():
    ms = generate_missions(7, NET, GeneratorConfig(mission_count=10))
    assert len(ms) == 10
    assert all(3 <= len(m.chain) <= 6 for m in ms)


def test_deterministic():
    cfg = GeneratorConfig(mission_count=25)
    assert generate_missions(3, NET, cfg) == generate_missions(3, NET, cfg)
    assert generate_missions(3, NET, cfg) != generate_missions(4, NET, cfg)


def test_count_prefix():
    short = generate_missions(11, NET, GeneratorConfig(mission_count=10))
    long = generate_missions(11, NET, GeneratorConfig(mission_count=30))
    assert long[:10] == short


def test_all_ground_origin():
    ms = generate_missions(2, NET, GeneratorConfig(mission_count=40, origin_mix=1.0))
    assert all(m.origin is Segment.GROUND for m in ms)
    assert all(m.src in range(7) and m.dst in range(7) for m in ms)


def test_all_air_origin():
    ms = generate_missions(2, NET, GeneratorConfig(mission_count=20, origin_mix=0.0))
    assert all({m.src, m.dst} == {7, 8} for m in ms)


def test_class_ranges():
    cfg = GeneratorConfig(mission_count=200)
    for m in generate_missions(9, NET, cfg):
        prof = cfg.profiles[m.mclass]
        assert prof.bandwidth_range[0] <= m.bandwidth_demand <= prof.bandwidth_range[1]
        assert all(prof.compute_range[0] <= c <= prof.compute_range[1] for c in m.compute_demands)
        assert prof.delay_budget_range[0] <= m.delay_budget <= prof.delay_budget_range[1]
    ds = cfg.profiles[MissionClass.DELAY_SENSITIVE]
    ci = cfg.profiles[MissionClass.COMPUTATION_INTENSIVE]
    assert ds.delay_budget_range[1] < ci.delay_budget_range[0]
    assert ci.compute_range[0] > ds.compute_range[1]


def test_chain_no_repeat_until_catalog_exhausted():
    ms = generate_missions(1, NET, GeneratorConfig(mission_count=300))
    k = len(DEFAULT_CATALOG)
    for m in ms:
        head = m.chain[:k]
        assert len(set(head)) == len(head)
        assert all(a != b for a, b in zip(m.chain, m.chain[1:]))


def test_long_chains_with_small_catalog():
    cfg = GeneratorConfig(mission_count=20, chain_length_range=(5, 6),
                          catalog=(VnfType("X"), VnfType("Y")))
    for m in generate_missions(0, NET, cfg):
        assert set(m.chain) <= {"X", "Y"}
        assert all(a != b for a, b in zip(m.chain, m.chain[1:]))


def test_segment_too_small():
    net = make_network("agg", [(0, 1), (0, 2), (1, 2)], 100, 50)
    with pytest.raises(GenerationError, match="air"):
        generate_missions(0, net, GeneratorConfig(mission_count=3))
    assert len(generate_missions(0, net, GeneratorConfig(mission_count=3, origin_mix=1.0))) == 3


def test_config_validation():
    with pytest.raises(ConfigError):
        GeneratorConfig(class_mix=1.5).validate()
    with pytest.raises(ConfigError):
        GeneratorConfig(chain_length_range=(4, 2)).validate()
    with pytest.raises(ConfigError):
        GeneratorConfig(catalog=(VnfType("A"), VnfType("A"))).validate()


def test_validate_well_formed():
    for m in generate_missions(5, NET, GeneratorConfig(mission_count=30)):
        assert validate_mission(m, NET) == []


def test_validate_violations():
    m = generate_missions(5, NET, GeneratorConfig(mission_count=1, origin_mix=1.0))[0]
    short = replace(m, chain=m.chain[:2], compute_demands=m.compute_demands[:2])
    assert any("chain length" in p for p in validate_mission(short, NET))
    air_src = replace(m, src=7)
    assert any(p.startswith("origin segment") for p in validate_mission(air_src, NET))
    unknown = replace(m, chain=("Z",) + m.chain[1:])
    assert any("unknown VNF" in p for p in validate_mission(unknown, NET))
    same = replace(m, dst=m.src)
    assert "src equals dst" in validate_mission(same, NET)


@given(st.integers(0, 2**32 - 1), st.integers(0, 30))
def test_csv_round_trip(seed, count):
    ms = generate_missions(seed, NET, GeneratorConfig(mission_count=count))
    back = missions_from_csv(missions_to_csv(ms))
    assert back == ms
    assert mission_digest(back) == mission_digest(ms)
