import pytest

from permsync.exceptions import ConfigError
from permsync.sweep import (
    ExperimentSpec,
    parse_config,
    run_sweep,
    run_trial,
    summarize,
    summary_name,
    trial_rng,
)

CONFIG = """\
[sweep]
n = 5
m = 4
edge_fraction = 1.0
p = 0.0, 0.2
trials = 2
seed = 3

[consensus]
max_iters = 500

[spectral]
inner_mode = exact_average
"""


def test_parse_config():
    experiment = parse_config(CONFIG)
    assert experiment.n == [5] and experiment.p == [0.0, 0.2] and experiment.trials == 2 and experiment.seed == 3
    assert experiment.consensus.max_iters == 500 and experiment.spectral.inner_mode == "exact_average"


@pytest.mark.parametrize("text, where", [
    ("[sweep]\nn = 5\ntrials = zero\n", "cfg:3:"),
    ("[sweep]\np = 0.1\nbogus = 1\n", "cfg:3:"),
    ("[sweep]\n\n[extra]\nk = 1\n", "cfg:3:"),
    ("[spectral]\ninner_mode = push_sum\n", "cfg:2:"),
    ("[sweep]\np = 0.5, 1.5\n", "cfg:2:"),
])
def test_config_errors_carry_line(text, where):
    with pytest.raises(ConfigError, match=where):
        parse_config(text, "cfg")


def test_trial_streams_are_independent_of_order():
    experiment = parse_config(CONFIG)
    forward = run_sweep(experiment)
    alone = run_trial(experiment, 5, 4, 1.0, 0.2, 1)
    assert forward[-1] == alone
    assert trial_rng(0, 5, 4, 1.0, 0.2, 0).random() != trial_rng(0, 5, 4, 1.0, 0.2, 1).random()


def test_noiseless_row_is_exact():
    rows = summarize(run_sweep(parse_config(CONFIG)))[(5, 4, 1.0)]
    assert rows[0] == (0.0, 1.0, 1.0)
    assert len(rows) == 2


def test_parallel_matches_serial():
    experiment = parse_config(CONFIG)
    assert run_sweep(experiment, workers=2) == run_sweep(experiment)


def test_summary_names():
    assert summary_name(20, 50, 1.0) == "full_K50_N20.txt"
    assert summary_name(20, 50, 0.5) == "half_K50_N20.txt"
    assert summary_name(20, 50, 0.25) == "frac0.25_K50_N20.txt"


def test_default_spec_matches_outlier_grid():
    assert ExperimentSpec().p == [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
