import json

import pytest

from substcps.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.mark.parametrize(
    "name,code", [("fibonacci", 0), ("aab_abab", 2), ("thue_morse", 4), ("non_pisot", 4)]
)
def test_verify_exit_codes(capsys, name, code):
    rc, out, _ = run(capsys, "verify", name)
    assert rc == code
    assert "verdict" in json.loads(out)


def test_no_certificate_exit_code(capsys):
    rc, _, _ = run(capsys, "verify", "tribonacci", "--m-max", "1", "--radius", "20")
    assert rc == 3


def test_missing_spec_is_an_error(capsys, tmp_path):
    svg = tmp_path / "w.svg"
    rc, out, err = run(capsys, "report", "no_such_spec", "--svg", str(svg))
    assert rc == 1
    assert err.startswith("error [substitution]")
    assert not svg.exists()


def test_inapplicable_report_writes_no_figure(capsys, tmp_path):
    svg = tmp_path / "w.svg"
    rc, _, _ = run(capsys, "report", "thue_morse", "--json", str(tmp_path / "r.json"), "--svg", str(svg))
    assert rc == 4
    assert not svg.exists()


def test_bad_spec_file(capsys, tmp_path):
    f = tmp_path / "bad.json"
    f.write_text('{"format": 1, "letters": ["a"], "rules": {"a": "ab"}}')
    rc, _, err = run(capsys, "validate", str(f))
    assert rc == 1 and "error [" in err


def test_validate(capsys):
    rc, out, _ = run(capsys, "validate", "aab_abab")
    d = json.loads(out)
    assert rc == 0
    assert d["min_poly"] == [2, -4, 1]
    assert d["digit_sets"] == [[["0", "1"], ["0", "-1 + beta"]], [["2"], ["1", "beta"]]]


def test_report_json_and_svg_are_byte_deterministic(capsys, tmp_path):
    outs = []
    for k in range(2):
        j, s = tmp_path / f"r{k}.json", tmp_path / f"w{k}.svg"
        assert run(capsys, "report", "fibonacci", "--json", str(j), "--svg", str(s))[0] == 0
        outs.append((j.read_bytes(), s.read_bytes()))
    assert outs[0] == outs[1]
    # two interval bars, one per letter
    svg = outs[0][1].decode()
    assert svg.count('fill="#1f77b4"') >= 1 and svg.count('fill="#d62728"') >= 1


def test_points_csv_is_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(capsys, "points", "tribonacci", "--radius", "15", "--csv", str(a))
    run(capsys, "points", "tribonacci", "--radius", "15", "--csv", str(b))
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert lines[0] == "letter,position_float,coeff_vector,den"
    assert "0 0 0" in a.read_text()


def test_xi_and_cps(capsys, tmp_path):
    j = tmp_path / "xi.json"
    rc, out, _ = run(capsys, "xi", "fibonacci", "--radius", "10", "--json", str(j))
    assert rc == 0 and json.loads(j.read_text())["index_in_L"] == 1
    rc, out, _ = run(capsys, "cps", "tribonacci", "--radius", "10")
    d = json.loads(out)
    assert d["internal_dim"] == 2 and d["density_probe"]["hit_rate"] >= 0.95


def test_coincidence_subcommand(capsys):
    rc, out, _ = run(capsys, "coincidence", "fibonacci", "--radius", "30", "--m-max", "4")
    d = json.loads(out)
    assert rc == 0 and d["found"] and d["xi"] == "0"


def test_window_tribonacci_svg_has_three_regions(capsys, tmp_path):
    s = tmp_path / "rauzy.svg"
    rc, out, _ = run(capsys, "window", "tribonacci", "--depth", "6", "--svg", str(s), "--route", "both")
    assert rc == 0
    d = json.loads(out)
    assert set(d["routes"]) == {"ifs", "projection"}
    text = s.read_text()
    assert all(f'<g fill="{c}"' in text for c in ("#1f77b4", "#d62728", "#2ca02c"))
