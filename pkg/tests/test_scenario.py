from pathlib import Path

import pytest

from wavepursuit import (
    Circle,
    FieldKind,
    ParseError,
    PathKind,
    Rect,
    StrategyTag,
    ValidationError,
)
from wavepursuit.fields import BoundaryMode
from wavepursuit.scenario import (
    OutputSpec,
    emit_scenario,
    load_scenario_file,
    parse_scenario_text,
)

MINIMAL = """\
environment {
  width 6.4
  height 4.8
  cell 0.2
}
pursuer {
  strategy wave
  speed 1.0
  start 1.0 2.4
}
evader {
  strategy scripted
  speed 0.5
  start 5.0 2.4
  path linear -0.1 0.0
}
"""


def test_minimal_file_fills_documented_defaults():
    sf = parse_scenario_text(MINIMAL, fallback_name="minimal")
    s = sf.scenario
    assert s.name == "minimal"
    assert s.field.kind is FieldKind.WAVE
    assert s.field.wave_speed == 1.0
    assert s.field.level == 1.0
    assert s.field.boundary_mode is BoundaryMode.DIRICHLET
    assert s.dt == 0.05
    assert s.duration == 120.0
    assert s.capture_radius == 0.25
    assert s.rng_seed == 0
    assert s.stop_on_capture is True
    assert s.pursuer.normalize is True
    assert s.pursuer.regularizer.threshold == pytest.approx(1e-3)
    assert s.pursuer.regularizer.floor == pytest.approx(1e-4)
    # every filled default is reported with its value
    joined = "\n".join(sf.defaults_applied)
    assert "game.dt = 0.05" in joined
    assert "field.kind = wave" in joined
    assert "pursuer.normalize = true" in joined


def test_negative_evader_speed_names_the_field():
    text = MINIMAL.replace("speed 0.5", "speed -1.0")
    with pytest.raises(ValidationError) as err:
        parse_scenario_text(text)
    assert err.value.field == "evader.speed"


def test_duplicate_key_is_a_parse_error():
    text = MINIMAL.replace("  speed 1.0\n", "  speed 1.0\n  speed 2.0\n")
    with pytest.raises(ParseError, match="duplicate key 'speed'"):
        parse_scenario_text(text)


def test_unknown_key_rejected_with_section_prefix():
    text = MINIMAL.replace("  cell 0.2\n", "  cell 0.2\n  warp 9\n")
    with pytest.raises(ValidationError) as err:
        parse_scenario_text(text)
    assert err.value.field == "environment.warp"


def test_unknown_section_rejected():
    with pytest.raises(ValidationError):
        parse_scenario_text(MINIMAL + "physics {\n  gravity 9.8\n}\n")


def test_duplicate_section_is_a_parse_error():
    extra = "pursuer {\n  strategy wave\n  speed 1.0\n  start 1.0 1.0\n}\n"
    with pytest.raises(ParseError, match="appears twice"):
        parse_scenario_text(MINIMAL + extra)


def test_unterminated_section_reports_end_of_file():
    with pytest.raises(ParseError, match="unterminated"):
        parse_scenario_text(MINIMAL + "game {\n  dt 0.1\n")


def test_missing_required_section():
    text = MINIMAL.split("pursuer")[0]
    with pytest.raises(ValidationError) as err:
        parse_scenario_text(text)
    assert err.value.field == "pursuer"


def test_obstacles_parse_in_file_order():
    text = MINIMAL.replace("  cell 0.2\n",
                           "  cell 0.2\n"
                           "  obstacle rect 1.0 1.0 2.0 2.0\n"
                           "  obstacle circle 4.0 2.0 0.5\n")
    sf = parse_scenario_text(text)
    assert sf.scenario.environment.obstacles == (
        Rect(1.0, 1.0, 2.0, 2.0), Circle(4.0, 2.0, 0.5))


def test_sinusoid_path_takes_all_five_numbers():
    text = MINIMAL.replace("path linear -0.1 0.0",
                           "path sinusoid 0.4 0.0 0.3 1.5 0.0")
    path = parse_scenario_text(text).scenario.evader.path
    assert path.kind is PathKind.LINEAR_SINUSOID
    assert path.base_velocity == (0.4, 0.0)
    assert (path.amplitude, path.frequency, path.phase) == (0.3, 1.5, 0.0)


def test_duel_keys_rejected_for_other_strategies():
    text = MINIMAL.replace("  strategy wave\n",
                           "  strategy wave\n  replan_every 36\n")
    with pytest.raises(ValidationError) as err:
        parse_scenario_text(text)
    assert err.value.field == "pursuer.replan_every"


def test_canonical_text_round_trips_byte_identically():
    sf = parse_scenario_text(MINIMAL, fallback_name="minimal")
    again = parse_scenario_text(sf.canonical_text, fallback_name="other")
    assert again.scenario == sf.scenario
    assert again.defaults_applied == ()  # canonical form names everything
    assert again.canonical_text == sf.canonical_text


def test_comments_and_blank_lines_are_ignored():
    noisy = "# header\n\n" + MINIMAL.replace(
        "  width 6.4", "  width 6.4   # meters")
    assert parse_scenario_text(noisy).scenario == \
        parse_scenario_text(MINIMAL).scenario


def test_outputs_section_round_trips():
    text = MINIMAL + "outputs {\n  trace run.csv\n  figures trajectories distance\n}\n"
    sf = parse_scenario_text(text)
    assert sf.outputs == OutputSpec(trace="run.csv",
                                    figures=("trajectories", "distance"))
    assert "outputs {" in sf.canonical_text
    again = parse_scenario_text(sf.canonical_text)
    assert again.outputs == sf.outputs


def test_checked_in_scenarios_are_canonical():
    paths = sorted((Path(__file__).resolve().parent.parent / "scenarios").glob("*.scn"))
    assert paths, "scenario corpus missing"
    for path in paths:
        sf = load_scenario_file(path)
        with open(path, "r", encoding="utf-8") as fh:
            assert sf.canonical_text == fh.read(), path
        assert sf.defaults_applied == (), path
        assert emit_scenario(sf.scenario, sf.outputs) == sf.canonical_text, path
