import math

import pytest

from charter.config import ExperimentConfig, parse_config_text
from charter.exceptions import ConfigRejected

FULL = """
# comment
problem.key = hard-instance
problem.alpha = 0.5
problem.sigma_f = 2
run.d = 3
run.M = 4
run.N = 12000
run.R = 6.0
run.seeds = 1, 2, 3
privacy.eps = inf
privacy.delta = 1e-6
vaidya.gamma = 0.1
vaidya.eta = 0.95
output.path = out.csv
output.wall_time = false
baseline.enabled = true
baseline.rounds = 50
sweep.N = 1000, 2000
sweep.eps = inf, 0.1
"""


def test_parse_full_config():
    cfg = parse_config_text(FULL)
    assert cfg.problem == "hard-instance"
    assert cfg.problem_params == {"alpha": 0.5, "sigma_f": 2.0}
    assert (cfg.d, cfg.M, cfg.N) == (3, 4, 12000)
    assert cfg.seeds == [1, 2, 3]
    assert cfg.eps == math.inf and cfg.delta == 1e-6
    assert cfg.gamma == 0.1 and cfg.eta == 0.95
    assert cfg.out == "out.csv" and cfg.wall_time is False
    assert cfg.baseline and cfg.baseline_rounds == 50
    assert cfg.sweep == {"N": [1000, 2000], "eps": [math.inf, 0.1]}
    assert cfg.problem_kwargs()["side"] == pytest.approx(6.0 / math.sqrt(3))


def test_defaults():
    cfg = parse_config_text("")
    assert cfg == ExperimentConfig()


@pytest.mark.parametrize("text", [
    "run.d 3",
    "nodot = 3",
    "run.d = 3\nrun.d = 4",
    "run.unknown = 1",
    "run.d = 2.5",
    "run.d = 1, 2",
    "sweep.N =",
    "sweep.gamma = 0.1",
    "problem.key = nope",
    "run.seeds =",
    "output.wall_time = 3",
    "problem.alpha = big",
])
def test_rejections(text):
    with pytest.raises(ConfigRejected):
        parse_config_text(text)


def test_error_mentions_line_number():
    with pytest.raises(ConfigRejected, match="line 3"):
        parse_config_text("run.d = 2\n\nrun.M = x")
