import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from couplet.cli import main  # noqa: E402
from couplet.config import load_config  # noqa: E402
from couplet.pipeline import Pipeline  # noqa: E402

TOY_CONF = """\
corpus = corpus.tsv
min_freq = 1
val_n = 10
test_n = 20
seed = 7
hidden = 48
embedding = 24
attention = 48
epochs = 20
batch_size = 8
lr = 0.01
"""


def build_toy_workspace(root: Path) -> Path:
    """Write a toy corpus and config, then train both models and the head table."""
    root.mkdir(parents=True, exist_ok=True)
    conf = root / "toy.conf"
    conf.write_text(TOY_CONF, encoding="utf-8")
    assert main(["toy-corpus", str(root / "corpus.tsv"), "-n", "200", "--seed", "3"]) == 0
    for cmd in ("train-lm", "train-s2s", "fit-heads"):
        assert main([cmd, "--config", str(conf)]) == 0
    return conf


@pytest.fixture(scope="session")
def toy_conf(tmp_path_factory):
    return build_toy_workspace(tmp_path_factory.mktemp("toy"))


@pytest.fixture(scope="session")
def toy_pipeline(toy_conf):
    return Pipeline.from_config(load_config(toy_conf))


# One line per acceptance criterion, filled in by tests/test_acceptance.py.
ACCEPTANCE: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
