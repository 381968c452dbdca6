"""The aggregated invariant suite."""

from l1sq.validate import validate_all


def test_all_suites_pass(tmp_path):
    report = validate_all(0, out_dir=tmp_path)
    for suite in report.suites:
        assert suite.passed, f"{suite.name}: {suite.detail}"
    assert report.ok
    assert len(report.suites) == 8
    # each suite leaves a CSV behind
    names = {p.name for p in tmp_path.iterdir()}
    for suite in report.suites:
        assert f"validate_{suite.name}.csv" in names


def test_suites_carry_tables():
    report = validate_all(0)
    for suite in report.suites:
        assert suite.header, f"{suite.name} has no CSV header"
        assert suite.rows, f"{suite.name} emitted no rows"
        for row in suite.rows:
            assert len(row) == len(suite.header)
