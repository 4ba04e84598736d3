import os
import sys

import pytest

TESTS_DIR = os.path.dirname(os.path.abspath(__file__))
ROOT_DIR = os.path.dirname(TESTS_DIR)
DATA_DIR = os.path.join(ROOT_DIR, "data")
CONF_DIR = os.path.join(ROOT_DIR, "conf")

sys.path.insert(0, os.path.join(ROOT_DIR, "hostcap"))
sys.path.insert(0, TESTS_DIR)

import netmodel  # noqa: E402
from netmodel import Branch, Bus, Network  # noqa: E402

TWO_BUS_CASE = """function mpc = twobus
mpc.version = '2';
mpc.baseMVA = 10;
mpc.bus = [
    1   3   0     0     0   0   1   1   0   12.66   1   1.1   0.9;
    2   1   1.0   0.5   0   0   1   1   0   12.66   1   1.1   0.9;
];
mpc.branch = [
    1   2   0.01   0.05   0   0   0   0   0   0   1   -360   360;
];
"""


def two_bus_network(p_load: float = 1.0, q_load: float = 0.5, r: float = 0.01, x: float = 0.05,
                    v_set: float = 1.03, base_mva: float = 10.0) -> Network:
    buses = [Bus(1, netmodel.SLACK, 0.0, 0.0, base_kv=12.66, v_set=v_set),
             Bus(2, netmodel.PQ, p_load, q_load, base_kv=12.66)]
    return Network.build(base_mva, buses, [Branch(1, 2, r, x)], "twobus")


def radial_network(parents, p_load, q_load, r, x, v_set: float = 1.03, base_mva: float = 1.0) -> Network:
    """
    Radial feeder with bus 1 as slack; bus k + 2 hangs off bus parents[k].
    """
    buses = [Bus(1, netmodel.SLACK, 0.0, 0.0, base_kv=1.0, v_set=v_set)]
    branches = []
    for k, parent in enumerate(parents):
        buses.append(Bus(k + 2, netmodel.PQ, float(p_load[k]), float(q_load[k]), base_kv=1.0))
        branches.append(Branch(int(parent), k + 2, float(r[k]), float(x[k])))
    return Network.build(base_mva, buses, branches, "radial")


@pytest.fixture(scope="session")
def case33() -> Network:
    return netmodel.load_network(os.path.join(DATA_DIR, "case33.m"))


@pytest.fixture(scope="session")
def case123() -> Network:
    return netmodel.load_network(os.path.join(DATA_DIR, "case123.m"))


@pytest.fixture
def two_bus() -> Network:
    return two_bus_network()
