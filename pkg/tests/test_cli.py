import filecmp

import pytest

from permsync.assoc import check_label_consistency, read_bundle, read_labels
from permsync.cli import main

SWEEP = """\
[sweep]
n = 4
m = 3
edge_fraction = 1.0
p = 0.0, 0.1, 0.5
trials = 2
seed = 11

[spectral]
inner_mode = exact_average
init = random
"""


def gen(tmp_path, *extra):
    inst, truth = tmp_path / "inst.txt", tmp_path / "truth.txt"
    assert main(["gen", "--n", "6", "--m", "5", "--seed", "2", "--out", str(inst), "--truth", str(truth),
                 *extra]) == 0
    return inst, truth


def gen_here(*extra):
    assert main(["gen", "--n", "6", "--m", "5", "--seed", "2", "--out", "inst.txt", "--truth", "truth.txt",
                 *extra]) == 0


@pytest.mark.parametrize("method", ["cs", "sp"])
def test_run_noiseless(tmp_path, method, capsys):
    inst, truth = gen(tmp_path)
    code = main(["run", str(inst), "--method", method, "--truth", str(truth), "--out", str(tmp_path / "res"),
                 "--inner-mode", "exact_average"])
    assert code == 0
    assert "accuracy = 1.000000" in capsys.readouterr().out
    labels = read_labels(tmp_path / "res.labels")
    assert check_label_consistency(labels, read_bundle(inst))
    trace = (tmp_path / "res.trace.csv").read_text().splitlines()
    assert any(ln.startswith("seed = 0") for ln in (t.lstrip("# ") for t in trace))


def test_run_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        d.mkdir()
        args = ["run", "inst.txt", "--method", "sp", "--seed", "9", "--init", "random",
                "--out", "out", "--stats", "stats.csv"]
        with pytest.MonkeyPatch.context() as mp:
            mp.chdir(d)
            gen_here("--p", "0.4")
            assert main(args) in (0, 2)
    for name in ("inst.txt", "truth.txt", "out.labels", "out.trace.csv", "stats.csv"):
        assert filecmp.cmp(a / name, b / name, shallow=False), name


def test_malformed_instance_names_line(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("2 2\n1 2\n0.5 oops\n0.5 0.5\n")
    assert main(["run", str(bad), "--out", str(tmp_path / "x")]) == 1
    assert f"{bad}:3:" in capsys.readouterr().err


def test_missing_file_and_bad_usage(tmp_path):
    assert main(["run", str(tmp_path / "nope.txt"), "--out", str(tmp_path / "x")]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["run", "--method", "xx"])
    assert exc.value.code == 1


def test_non_convergence_exit_code(tmp_path):
    inst, _ = gen(tmp_path, "--p", "0.3")
    assert main(["run", str(inst), "--max-iters", "1", "--out", str(tmp_path / "r")]) == 2


def test_sweep_outputs(tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(SWEEP)
    outs = []
    for name in ("one", "two"):
        assert main(["sweep", str(cfg), "--out", str(tmp_path / name)]) == 0
        outs.append(tmp_path / name)
    summary = (outs[0] / "full_K3_N4.txt").read_text().splitlines()
    rows = [ln for ln in summary if not ln.startswith("#")]
    assert rows[0] == "p mean_cs mean_sp"
    assert len(rows) == 4 and rows[1] == "0 1.000000 1.000000"
    assert "#   seed = 11" in summary
    for name in ("full_K3_N4.txt", "trials.csv"):
        assert filecmp.cmp(outs[0] / name, outs[1] / name, shallow=False)


def test_sweep_header_reproduces_run(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(SWEEP)
    assert main(["sweep", str(cfg), "--out", str(tmp_path / "a")]) == 0
    lines = (tmp_path / "a" / "full_K3_N4.txt").read_text().splitlines()
    start = lines.index("# config:") + 1
    embedded = "\n".join(ln[4:] for ln in lines[start:] if ln.startswith("#   ")) + "\n"
    (tmp_path / "again.cfg").write_text(embedded)
    assert main(["sweep", str(tmp_path / "again.cfg"), "--out", str(tmp_path / "b")]) == 0
    assert filecmp.cmp(tmp_path / "a" / "full_K3_N4.txt", tmp_path / "b" / "full_K3_N4.txt", shallow=False)


def test_sweep_bad_config(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("[sweep]\nn = 4\ntrials = many\n")
    assert main(["sweep", str(cfg)]) == 1
    assert f"{cfg}:3:" in capsys.readouterr().err


@pytest.mark.parametrize("suite", ["lemmas", "assignment"])
def test_verify_suites_pass(suite, capsys):
    assert main(["verify", suite, "--seed", "4"]) == 0
    out = capsys.readouterr().out
    assert "FAIL " not in out and out.strip().endswith("0 failing check(s)")


def test_verify_unknown_suite(capsys):
    assert main(["verify", "everything"]) == 1
    assert "unknown suite" in capsys.readouterr().err


def test_lemma_battery_over_fifty_seeds():
    from permsync.verify import run_suite

    failures = [(seed, r.line()) for seed in range(50) for r in run_suite("lemmas", seed) if not r.passed]
    assert failures == []


@pytest.mark.parametrize("suite", ["theorems", "equivalence"])
def test_verify_remaining_suites(suite, capsys):
    assert main(["verify", suite]) == 0
