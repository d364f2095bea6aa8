import pytest

from core.resource_profile import ResourceProfile


def status(available_mb=8000.0, plugged=True, battery_percent=100):
    return {
        "cores": 8,
        "available_mb": available_mb,
        "battery_present": not plugged,
        "battery_percent": battery_percent,
        "plugged": plugged,
    }


@pytest.mark.parametrize("host, expected", [
    (status(), "PERFORMANCE"),
    (status(available_mb=3000.0), "BALANCED"),
    (status(available_mb=1000.0), "ECO"),
    (status(plugged=False, battery_percent=50), "BALANCED"),
    (status(plugged=False, battery_percent=10), "ECO"),
    (status(plugged=False, battery_percent=95), "PERFORMANCE"),
])
def test_profile_selection(host, expected):
    assert ResourceProfile().get_performance_profile(host) == expected


def test_default_jobs():
    profile = ResourceProfile()
    assert profile.default_jobs("PERFORMANCE", cores=8) == 8
    assert profile.default_jobs("BALANCED", cores=8) == 4
    assert profile.default_jobs("BALANCED", cores=1) == 1
    assert profile.default_jobs("ECO", cores=8) == 1


def test_resolve_jobs():
    profile = ResourceProfile()
    assert profile.resolve_jobs(3) == 3
    assert profile.resolve_jobs(0) >= 1


def test_host_status_shape():
    host = ResourceProfile().get_host_status()
    assert host["cores"] >= 1
    assert host["available_mb"] > 0
    assert set(host) == {"cores", "available_mb", "battery_present", "battery_percent", "plugged"}
