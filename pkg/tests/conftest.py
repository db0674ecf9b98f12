import pytest


def pytest_addoption(parser):
    parser.addoption(
        "--allow-long", action="store_true", default=False,
        help="run the gated long benchmark tests (cavity, mixing)",
    )


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "long: gated benchmark training, needs --allow-long"
    )
    config.addinivalue_line(
        "markers", "benchmark: ungated benchmark training (minutes)"
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--allow-long"):
        return
    skip = pytest.mark.skip(reason="needs --allow-long")
    for item in items:
        if "long" in item.keywords:
            item.add_marker(skip)
