import pytest

from semcomm_common.settings import get_settings


def pytest_collection_modifyitems(config, items):
    if get_settings().run_slow:
        return
    skip_slow = pytest.mark.skip(reason="slow experiment; set SEMCOMM_RUN_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)
