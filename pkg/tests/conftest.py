import environ
import pytest

env = environ.Env()


def pytest_collection_modifyitems(config, items):
    if env.bool("NFCE_RUN_SLOW", default=False):
        return
    skip_slow = pytest.mark.skip(reason="set NFCE_RUN_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)
