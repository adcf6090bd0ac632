from hj_plots.cli import main


def test_all_four_kinds_render_golden_files(golden, tmp_path):
    # [ACCEPTANCE] every documented table kind renders without error
    inputs = {
        "rate": "errors.csv",
        "profile": "stationary.csv",
        "orbit": "orbit.csv",
        "lyapunov": "lyapunov.csv",
    }
    codes = {}
    for kind, name in inputs.items():
        out = tmp_path / f"{kind}.png"
        codes[kind] = main([kind, "--in", str(golden / name), "--out", str(out)])
        assert out.exists() and out.stat().st_size > 0
    ok = all(c == 0 for c in codes.values())
    print(f"[ACCEPTANCE] plot_kinds_render_golden: {'PASS' if ok else 'FAIL'} "
          f"(exit codes {codes})")
    assert ok


def test_schema_mismatch_exits_nonzero_with_column_diff(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("N,phi_id,error,bogus\n1,a,0.1,0.1\n", encoding="utf-8")
    code = main(["rate", "--in", str(bad), "--out", str(tmp_path / "f.png")])
    err = capsys.readouterr().err
    assert code == 2
    assert "missing columns ['sup_error']" in err
    assert "unexpected columns ['bogus']" in err
    assert not (tmp_path / "f.png").exists()


def test_missing_input_exits_nonzero(tmp_path, capsys):
    code = main(["rate", "--in", str(tmp_path / "nope.csv"),
                 "--out", str(tmp_path / "f.png")])
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_title_flag_is_accepted(golden, tmp_path):
    out = tmp_path / "fig.png"
    code = main(["lyapunov", "--in", str(golden / "lyapunov.csv"),
                 "--out", str(out), "--title", "running averages"])
    assert code == 0 and out.exists()
