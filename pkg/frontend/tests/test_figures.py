import math

from hj_plots.figures import plot_lyapunov, plot_orbit, plot_profile, plot_rate


def _write_rate_csv(path, pairs):
    lines = ["# config deadbeefdeadbeef", "N,phi_id,error,sup_error"]
    for n, e in pairs:
        lines.append(f"{n},phi0,{e!r},{e!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def test_rate_fit_recovers_exact_exponential(tmp_path):
    # [ACCEPTANCE] synthetic e_N = e^{-0.5 N} must be annotated at slope 0.5
    csv = tmp_path / "errors.csv"
    _write_rate_csv(csv, [(n, math.exp(-0.5 * n)) for n in range(4, 41, 4)])
    out = tmp_path / "fig.png"
    res = plot_rate(csv, out)
    ok = res.decayed and abs(res.lambda_fit - 0.5) <= 1e-6 and out.exists()
    print(f"[ACCEPTANCE] plot_rate_synthetic: {'PASS' if ok else 'FAIL'} "
          f"(lambda_fit {res.lambda_fit!r}, |err| "
          f"{abs(res.lambda_fit - 0.5):.2e} <= 1e-6)")
    assert ok
    assert "lambda_fit = 0.500000" in res.annotation
    assert res.r_squared > 1 - 1e-12


def test_rate_constant_errors_flag_no_decay(tmp_path):
    csv = tmp_path / "errors.csv"
    _write_rate_csv(csv, [(n, 0.125) for n in range(4, 25, 4)])
    out = tmp_path / "fig.png"
    res = plot_rate(csv, out)
    assert not res.decayed
    assert res.annotation == "no decay"
    assert res.lambda_fit is None and res.r_squared is None
    assert out.exists()


def test_rate_all_zero_errors_flag_no_decay(tmp_path):
    csv = tmp_path / "errors.csv"
    _write_rate_csv(csv, [(n, 0.0) for n in range(4, 25, 4)])
    res = plot_rate(csv, tmp_path / "fig.png")
    assert not res.decayed


def test_rate_golden_renders_and_decays(golden, tmp_path):
    res = plot_rate(golden / "errors.csv", tmp_path / "fig.png")
    assert res.decayed
    assert res.lambda_fit > 0
    assert (tmp_path / "fig.png").stat().st_size > 0


def test_profile_golden_marks_argmin(golden, tmp_path):
    res = plot_profile(golden / "stationary.csv", tmp_path / "fig.png")
    assert res.time == 0
    assert 0 <= res.argmin_index < 128
    assert (tmp_path / "fig.png").exists()


def test_orbit_golden_one_dimensional(golden, tmp_path):
    res = plot_orbit(golden / "orbit.csv", tmp_path / "fig.png")
    assert res.dim == 1
    assert res.steps == 13
    assert (tmp_path / "fig.png").exists()


def test_orbit_free_motion_straight_line(tmp_path):
    # x advances by 0.25 per step mod 1, wrapping across the seam
    csv = tmp_path / "orbit.csv"
    lines = ["time,x_1,v_1"]
    for k in range(9):
        lines.append(f"{k},{(0.25 * k) % 1.0!r},0.25")
    csv.write_text("\n".join(lines) + "\n", encoding="utf-8")
    res = plot_orbit(csv, tmp_path / "fig.png")
    assert res.steps == 9
    assert (tmp_path / "fig.png").exists()


def test_orbit_two_dimensional_path(tmp_path):
    csv = tmp_path / "orbit.csv"
    lines = ["time,x_1,x_2,v_1,v_2"]
    for k in range(12):
        lines.append(f"{k},{(0.3 * k) % 1.0!r},{(0.1 * k) % 1.0!r},0.3,0.1")
    csv.write_text("\n".join(lines) + "\n", encoding="utf-8")
    res = plot_orbit(csv, tmp_path / "fig.png")
    assert res.dim == 2
    assert (tmp_path / "fig.png").exists()


def test_lyapunov_golden_renders_final_averages(golden, tmp_path):
    res = plot_lyapunov(golden / "lyapunov.csv", tmp_path / "fig.png")
    assert len(res.final) == 2
    assert res.final[1] > 0 > res.final[0]
    assert (tmp_path / "fig.png").exists()


def test_labels_and_title_overrides_apply(golden, tmp_path):
    out = tmp_path / "fig.png"
    plot_rate(golden / "errors.csv", out, title="T", xlabel="X", ylabel="Y")
    assert out.exists()
