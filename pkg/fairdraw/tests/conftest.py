from pathlib import Path

import dask
import pytest

import fairdraw as fd

DATA_DIR = Path(__file__).parent / 'data'


@pytest.fixture(scope='function')
def threaded_scheduler():
    with dask.config.set(scheduler='threads'):
        yield


@pytest.fixture(scope='function')
def processes_scheduler():
    with dask.config.set(scheduler='processes'):
        yield


@pytest.fixture(scope='session')
def wc2018():
    return fd.data.wc2018()


@pytest.fixture(scope='session')
def wc2022():
    return fd.data.wc2022()


@pytest.fixture(scope='session')
def example1():
    return fd.data.example1()


@pytest.fixture(scope='session')
def example1_scenario():
    return fd.data.example1_scenario()


def pytest_addoption(parser):
    parser.addoption(
        '--runfigures', action='store_true', default=False, help='run figure-scale simulations'
    )


def pytest_configure(config):
    config.addinivalue_line('markers', 'figures: mark figure-scale simulations')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runfigures'):
        # --runfigures given in cli: do not skip figure-scale simulations
        return
    skip_figures = pytest.mark.skip(reason='need --runfigures option to run')
    for item in items:
        if 'figures' in item.keywords:
            item.add_marker(skip_figures)
