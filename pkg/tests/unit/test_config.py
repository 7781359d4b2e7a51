import logging
import threading

import pytest
from pydantic import ValidationError

from mxfar.config import Settings, configure_logging, get_settings, parse_level
from mxfar.models import ModelConfig, ReferenceSpec
from mxfar.parallel import ordered_map


def test_settings_from_environment(monkeypatch):
    monkeypatch.setenv("MXFAR_THREADS", "3")
    monkeypatch.setenv("MXFAR_OUTPUT_FLOAT_FORMAT", "%.6g")
    settings = Settings()
    assert settings.resolved_threads() == 3
    assert settings.output_float_format == "%.6g"
    assert get_settings() is get_settings()


def test_parse_level():
    assert parse_level("info") == logging.INFO
    assert parse_level("10") == 10
    assert parse_level(logging.ERROR) == logging.ERROR
    with pytest.raises(ValueError):
        parse_level("chatty")


def test_configure_logging_installs_one_handler():
    configure_logging("DEBUG")
    configure_logging("WARNING")
    package_logger = logging.getLogger("mxfar")
    assert len(package_logger.handlers) == 1
    assert package_logger.level == logging.WARNING


def test_ordered_map_keeps_submission_order():
    lock = threading.Lock()
    seen = []

    def square(x):
        with lock:
            seen.append(x)
        return x * x

    assert ordered_map(square, range(20), threads=4) == [x * x for x in range(20)]
    assert sorted(seen) == list(range(20))
    assert ordered_map(square, [], threads=4) == []


def test_reference_spec_rules():
    assert ReferenceSpec.from_channel(2, 3).label() == "ch2@lag3"
    assert ReferenceSpec.exogenous(1).label() == "exogenous@lag1"
    with pytest.raises(ValidationError):
        ReferenceSpec.from_channel(1, 0)
    with pytest.raises(ValidationError):
        ReferenceSpec(source="exogenous", channel=1, lag=0)


def test_model_config():
    config = ModelConfig(p=3, reference=ReferenceSpec.from_channel(1, 2), bandwidth=0.5)
    assert config.burn_in == 3
    assert config.updated(p=1).burn_in == 2
    assert config.grid_size == 50 and config.penalty_scale == 1.0
    with pytest.raises(ValidationError):
        config.updated(bandwidth=0.0)
    with pytest.raises(ValidationError):
        ModelConfig(p=1, reference=ReferenceSpec.from_channel(1, 1), bandwidth=1.0, grid_clip=(0.6, 0.4))
