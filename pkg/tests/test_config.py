import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kinopt import config
from kinopt.config import SCHEMA, ConfigError, RunConfig, emit, parse
from kinopt.kinetic import CollisionMode


def test_empty_file_gives_defaults():
    rc = parse("")
    assert rc == RunConfig()
    cfg = rc.experiment()
    assert cfg.dims == (5, 50, 1) and cfg.kinetic is None and cfg.epochs == 100
    assert rc.dsmc().n_particles == 10_000


def test_round_trip_defaults():
    rc = RunConfig()
    assert parse(emit(rc)) == rc


@settings(max_examples=50, deadline=None)
@given(lr=st.floats(1e-9, 10), coef=st.floats(0, 1), seeds=st.lists(st.integers(0, 2**64 - 1), min_size=1, max_size=4),
       zero=st.booleans(), box=st.tuples(*[st.floats(0.1, 100)] * 3), mode=st.sampled_from(["none", "soft", "hard"]))
def test_round_trip(lr, coef, seeds, zero, box, mode):
    rc = RunConfig().with_values(optimizer__learning_rate=lr, kinetic__coll_coef=coef, run__seeds=tuple(seeds),
                                 kinetic__soft_zero_diagonal=zero, dsmc__box=box, kinetic__mode=mode)
    assert parse(emit(rc)) == rc


def test_every_key_is_emitted():
    text = emit(RunConfig())
    for sec, keys in SCHEMA.items():
        assert f"[{sec}]" in text
        for key in keys:
            assert f"\n{key} = " in text


def test_kinetic_section():
    rc = parse("[kinetic]\nmode = hard\ncoll_coef = 0.25\nhard_max_one_collision_per_neuron = yes\n")
    k = rc.experiment().kinetic
    assert k.mode is CollisionMode.HARD and k.coll_coef == 0.25 and k.hard_max_one_collision_per_neuron


@pytest.mark.parametrize("text,key", [
    ("[kinetic]\ncolcoef = 0.1\n", "kinetic.colcoef"),
    ("[network]\nwidth = 3\n", "network.width"),
    ("[extra]\na = 1\n", "extra"),
    ("[run]\nepochs = ten\n", "run.epochs"),
    ("[kinetic]\nsoft_zero_diagonal = maybe\n", "kinetic.soft_zero_diagonal"),
])
def test_parse_errors_name_key(text, key):
    with pytest.raises(ConfigError) as info:
        parse(text)
    assert info.value.key == key
    assert key in str(info.value)


@pytest.mark.parametrize("text,key", [
    ("[kinetic]\nmode = soft\ncoll_coef = 1.5\n", "kinetic.coll_coef"),
    ("[kinetic]\nmode = elastic\n", "kinetic.mode"),
    ("[optimizer]\nlearning_rate = 0\n", "optimizer.learning_rate"),
    ("[optimizer]\nkind = lamb\n", "optimizer.kind"),
    ("[network]\nactivation = relu\n", "network.activation"),
    ("[network]\ndims = 4,50,1\n", "network.dims"),
    ("[run]\nepochs = 0\n", "run.epochs"),
    ("[run]\nseeds =\n", "run.seeds"),
    ("[data]\nlow = 3\n", "data.low"),
    ("[kinetic]\nmode = soft\ntarget_layers = 0,7\n", "kinetic.target_layers"),
])
def test_semantic_errors_name_key(text, key):
    with pytest.raises(ConfigError) as info:
        parse(text).experiment()
    assert info.value.key == key


def test_dsmc_errors_name_key():
    with pytest.raises(ConfigError) as info:
        parse("[dsmc]\ntau = 1.0\n").dsmc()
    assert info.value.key == "dsmc.tau"
    with pytest.raises(ConfigError) as info:
        parse("[dsmc]\ncells = 2,2\n").dsmc()
    assert info.value.key == "dsmc.cells"


def test_malformed_file():
    with pytest.raises(ConfigError):
        parse("no section header\n")
    with pytest.raises(ConfigError):
        parse("[run]\nepochs = 1\nepochs = 2\n")


def test_load(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[run]\nepochs = 7\n")
    assert config.load(p)["run.epochs"] == 7
