import pickle

from hstjps.core.errors import ConfigError, DomainError, NumericFailure, SimulationError, SweepError


def test_errors_survive_pickling():
    errors = [
        NumericFailure("kummer_1f1", 1.5, 500),
        DomainError("avg_snr.d", -1.0),
        ConfigError("tau_s_ms", "必须为正"),
        SimulationError(101, 100),
        SweepError("p_ts_dbm", 36.0, "hstjps", SimulationError(101, 100)),
    ]
    for err in errors:
        clone = pickle.loads(pickle.dumps(err))
        assert type(clone) is type(err)
        assert str(clone) == str(err)


def test_config_error_fields():
    err = ConfigError("thresholds_db", "必须严格递增")
    assert err.key == "thresholds_db"
    assert isinstance(err, ValueError)
    assert "thresholds_db" in str(err)
