import pytest

from gkdvlab.linearized import LineGrid, build_profiles


_CACHE = {}

# resolutions that push the profile-equation residuals below 1e-6
# (the steeper supercritical waves need the finer grid)
_N = {3: 16384, 4: 16384, 6: 32768, 7: 32768}


def profiles_for(p):
    if p not in _CACHE:
        _CACHE[p] = build_profiles(p, LineGrid(40.0, _N[p]))
    return _CACHE[p]


@pytest.fixture(scope="session")
def profiles_p3():
    return profiles_for(3)


@pytest.fixture(scope="session")
def profiles_p4():
    return profiles_for(4)


@pytest.fixture(scope="session")
def profiles_p6():
    return profiles_for(6)


@pytest.fixture(scope="session")
def profiles_p7():
    return profiles_for(7)
