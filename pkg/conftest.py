import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
os.environ.setdefault("BLINDSIM_LOG_LEVEL", "warn")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: exhaustive suites (run by default)")
