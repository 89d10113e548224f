import pytest

from lteu_pcf.core_model import Direction, bundled_scenario


@pytest.fixture(scope="session")
def fig1():
    return bundled_scenario("fig1")


@pytest.fixture(scope="session")
def fig1_short(fig1):
    """fig1 with a 2 s run and one warm-up period, for fast engine tests."""
    return fig1.with_(sim_duration=2.0, warmup_periods=1)


@pytest.fixture(scope="session")
def fig1_uldl_short(fig1_short):
    return fig1_short.with_(traffic__direction_mode=Direction.UL_AND_DL)
