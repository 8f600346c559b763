"""The shared oracle suite must pass in full; the CLI selftest subcommand
exposes the same checks."""

from lpgreedy.selftest import run_all


def test_all_oracle_checks_pass():
    results = run_all()
    failures = [f"{r.name}: {r.detail}" for r in results if not r.passed]
    assert not failures, "oracle mismatches:\n" + "\n".join(failures)
    assert len(results) >= 20
