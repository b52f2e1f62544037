import hashlib
import os

import pytest

from whff.cli import main


def run_cli(args, capsys):
    code = main(list(args))
    out, err = capsys.readouterr()
    return code, out, err


def file_hashes(directory):
    out = {}
    for name in sorted(os.listdir(directory)):
        with open(os.path.join(directory, name), "rb") as fh:
            out[name] = hashlib.sha256(fh.read()).hexdigest()
    return out


GEN = ["gen", "--grid", "16x16", "--S", "100", "--K", "32", "--M", "4",
       "--seed", "7"]


def test_gen_deterministic(tmp_path, capsys):
    code, _, _ = run_cli(GEN + ["--out", str(tmp_path / "a")], capsys)
    assert code == 0
    code, _, _ = run_cli(GEN + ["--out", str(tmp_path / "b")], capsys)
    assert code == 0
    assert file_hashes(tmp_path / "a") == file_hashes(tmp_path / "b")


def test_unknown_flag_is_user_error(capsys):
    code, _, err = run_cli(["gen", "--bogus"], capsys)
    assert code == 1
    assert err.startswith("whff: error:")
    assert err.count("\n") == 1


def test_run_and_trace(tmp_path, capsys):
    model_dir = str(tmp_path / "m")
    run_cli(GEN + ["--out", model_dir], capsys)
    code, out, _ = run_cli(
        ["run", "--model", model_dir, "--scan", "fast", "--t-l", "4",
         "--t-d", "2", "--compress", "--out", str(tmp_path / "r")], capsys)
    assert code == 0
    assert "deadline_misses=" in out
    trace = (tmp_path / "r" / "trace.csv").read_text().splitlines()
    assert trace[0].startswith("field,k,phase,slit,bytes_in")
    assert len(trace) == 1 + 2 * 6  # 2 fields, 6 steps each
    for axis in ("x", "y", "z"):
        assert (tmp_path / "r" / f"deformation_{axis}.whfm").exists()


def test_run_deterministic_trace(tmp_path, capsys):
    model_dir = str(tmp_path / "m")
    run_cli(GEN + ["--out", model_dir], capsys)
    for sub in ("r1", "r2"):
        code, _, _ = run_cli(
            ["run", "--model", model_dir, "--t-l", "4", "--t-d", "2",
             "--seed", "3", "--out", str(tmp_path / sub)], capsys)
        assert code == 0
    assert file_hashes(tmp_path / "r1") == file_hashes(tmp_path / "r2")


def test_codec_round_trip_and_stats(tmp_path, capsys):
    model_dir = str(tmp_path / "m")
    run_cli(GEN + ["--out", model_dir], capsys)
    src = os.path.join(model_dir, "C_x.whfm")
    stream = str(tmp_path / "c.whfz")
    code, _, _ = run_cli(["codec", "compress", src, stream,
                          "--mode", "rate", "--bpv", "8"], capsys)
    assert code == 0
    code, out, _ = run_cli(["codec", "stats", stream, "--original", src],
                           capsys)
    assert code == 0
    assert "ratio=4.0" in out
    code, _, _ = run_cli(["codec", "decompress", stream,
                          str(tmp_path / "d.whfm")], capsys)
    assert code == 0


def test_codec_missing_mode_param(tmp_path, capsys):
    model_dir = str(tmp_path / "m")
    run_cli(GEN + ["--out", model_dir], capsys)
    src = os.path.join(model_dir, "C_x.whfm")
    code, _, err = run_cli(["codec", "compress", src,
                            str(tmp_path / "c.whfz"), "--mode", "rate"],
                           capsys)
    assert code == 1
    assert "bpv" in err


def test_corrupt_stream_exit_code_two(tmp_path, capsys):
    path = tmp_path / "bad.whfz"
    path.write_bytes(b"JUNKJUNKJUNKJUNK" * 4)
    code, _, err = run_cli(["codec", "stats", str(path)], capsys)
    assert code == 2
    assert "corrupt-data" in err


def test_analyze_flops_preset(capsys):
    code, out, _ = run_cli(["analyze", "flops", "--preset", "paper-fast"],
                           capsys)
    assert code == 0
    assert "402.6" in out
    assert "398.7" in out


def test_analyze_flops_requires_params_without_preset(capsys):
    code, _, err = run_cli(["analyze", "flops"], capsys)
    assert code == 1
    assert "preset" in err


def test_analyze_io(capsys):
    code, out, _ = run_cli(["analyze", "io", "--preset", "paper-slow"],
                           capsys)
    assert code == 0
    assert "io_ops_total=" in out


def test_analyze_roofline_csv(capsys):
    code, out, _ = run_cli(["analyze", "roofline", "--ai", "0.25"], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].startswith("platform,ai,")
    assert len(lines) == 5  # header + 4 bundled platforms


def test_analyze_pipeline(capsys):
    code, out, _ = run_cli(
        ["analyze", "pipeline", "--t-transfer", "83.16", "--t-compute",
         "16.84", "--t-decode", "28.12", "--r", "10"], capsys)
    assert code == 0
    assert "latency_reduction_pct=46.724" in out


def test_bench_gemv_csv(capsys):
    code, out, _ = run_cli(
        ["bench-gemv", "--shape", "square", "--policy", "mixed",
         "--reps", "1"], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].startswith("shape,policy,backend,")
    assert len(lines) >= 2


def test_backends_listing(capsys):
    code, out, _ = run_cli(["backends"], capsys)
    assert code == 0
    assert out.startswith("active=")
    assert "python" in out


def test_missing_model_is_user_error(tmp_path, capsys):
    code, _, err = run_cli(["run", "--model", str(tmp_path / "nope")],
                           capsys)
    assert code == 1
    assert err.startswith("whff: error:")
