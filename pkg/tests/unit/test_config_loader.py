"""
Unit Tests für config_loader.py - key=value Run-Konfiguration

Test Coverage:
- load_config() - Werte, Brüche, Listen, Kommentare, Defaults
- Fehlerfälle - Zeilennummern, unbekannte Keys, Duplikate, Validierung
- write_config_echo() - Echo wird identisch zurückgelesen
"""

import pytest

from src.config_loader import (
    ConfigError,
    config_to_text,
    load_config,
    parse_config_values,
    write_config_echo,
)
from src.models import DEFAULT_K_LIST, SolverConfig


@pytest.fixture
def write_conf(tmp_path):
    def _write(text: str, name: str = "run.conf"):
        path = tmp_path / name
        path.write_text(text)
        return path
    return _write


# ============================================================================
# Test Class: Parsing
# ============================================================================

class TestLoadConfig:
    """Tests für load_config()."""

    def test_parses_values(self, write_conf):
        """Alle Werttypen sollten korrekt gelesen werden."""
        path = write_conf(
            "# Taylor-Green desk run\n"
            "n=64\n"
            "nu=1/1600\n"
            "dt=0.002\n"
            "t_end=20\n"
            "k_list=5,10,15\n"
            "dealias=true\n"
            "viscous_scheme=integrating_factor\n"
            "\n"
            "workers=1\n"
        )

        cfg = load_config(path)

        assert cfg.n == 64
        assert cfg.nu == 1.0 / 1600.0
        assert cfg.dt == 0.002
        assert cfg.t_end == 20.0
        assert cfg.k_list == [5, 10, 15]
        assert cfg.dealias is True
        assert cfg.viscous_scheme == "integrating_factor"

    def test_defaults(self, write_conf):
        """Fehlende Keys sollten die Defaults der Referenzkonfiguration haben."""
        cfg = load_config(write_conf("n=32\n"))

        assert cfg.nu == 1.0 / 1600.0
        assert cfg.dt == 0.001
        assert cfg.t_end == 20.0
        assert cfg.k_list == DEFAULT_K_LIST
        assert cfg.beta_min is None

    def test_overrides(self, write_conf):
        """Overrides sollten Dateiwerte ersetzen, None sollte ignoriert werden."""
        cfg = load_config(write_conf("n=32\nt_end=5\n"), overrides={"t_end": 10.0, "dt": None})

        assert cfg.t_end == 10.0
        assert cfg.dt == 0.001

    def test_optional_none(self, write_conf):
        """beta_min=none sollte None ergeben."""
        assert load_config(write_conf("n=32\nbeta_min=none\n")).beta_min is None


# ============================================================================
# Test Class: Errors
# ============================================================================

class TestConfigErrors:
    """Tests für fehlerhafte Konfigurationen."""

    def test_missing_file(self, tmp_path):
        """Fehlende Datei sollte ConfigError auslösen."""
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "missing.conf")

    def test_malformed_line(self, write_conf):
        """Zeile ohne '=' sollte mit Zeilennummer gemeldet werden."""
        with pytest.raises(ConfigError) as exc_info:
            load_config(write_conf("n=32\n# ok\nthis is not valid\n"))

        assert exc_info.value.line == 3

    def test_unknown_key(self, write_conf):
        """Unbekannter Key sollte mit Zeilennummer gemeldet werden."""
        with pytest.raises(ConfigError, match="unknown key 'reynolds'") as exc_info:
            load_config(write_conf("n=32\nreynolds=1600\n"))

        assert exc_info.value.line == 2

    def test_duplicate_key(self, write_conf):
        """Doppelter Key sollte abgelehnt werden."""
        with pytest.raises(ConfigError, match="duplicate") as exc_info:
            load_config(write_conf("n=32\nn=64\n"))

        assert exc_info.value.line == 2

    def test_odd_grid(self, write_conf):
        """N=3 sollte als Validierungsfehler der Zeile gemeldet werden."""
        with pytest.raises(ConfigError) as exc_info:
            load_config(write_conf("dt=0.01\nn=3\n"))

        assert exc_info.value.line == 2

    def test_bad_fraction(self, write_conf):
        """nu=1/0 sollte ConfigError auslösen."""
        with pytest.raises(ConfigError) as exc_info:
            load_config(write_conf("nu=1/0\n"))

        assert exc_info.value.line == 1

    def test_bad_k_list(self, write_conf):
        """Nicht-ganzzahlige k_list sollte ConfigError auslösen."""
        with pytest.raises(ConfigError):
            load_config(write_conf("k_list=5,ten\n"))

    def test_negative_viscosity(self):
        """nu <= 0 sollte ConfigError auslösen."""
        with pytest.raises(ConfigError, match="nu"):
            parse_config_values({"nu": "-1"})

    def test_unknown_override(self):
        """Unbekannter Override sollte ConfigError auslösen."""
        with pytest.raises(ConfigError):
            parse_config_values({}, overrides={"steps": 10})


# ============================================================================
# Test Class: Echo
# ============================================================================

class TestConfigEcho:
    """Tests für write_config_echo()."""

    def test_echo_round_trip(self, tmp_path):
        """Geschriebenes Echo sollte dieselbe Konfiguration ergeben."""
        cfg = SolverConfig(n=64, nu=1 / 1600, dt=0.002, t_end=20.0, k_list=[5, 10],
                           beta_min=0.004, workers=2, nonlinear_form="divergence")

        path = write_config_echo(cfg, tmp_path / "out" / "run.conf")

        assert load_config(path) == cfg

    def test_echo_skips_unset_optionals(self):
        """None-Werte sollten nicht im Echo erscheinen."""
        text = config_to_text(SolverConfig(n=16, workers=1))

        assert "beta_min" not in text
        assert "n=16\n" in text
        assert "dealias=true" in text
