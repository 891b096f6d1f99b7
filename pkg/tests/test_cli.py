import csv
import io
import subprocess
import sys
from pathlib import Path

import pytest

from tdm_noc.cli import DEFAULTS, main, parse_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def test_defaults_listed():
    code, out, _ = call("config", "--defaults")
    assert code == 0
    for section, keys in DEFAULTS.items():
        assert f"[{section}]" in out
        for key in keys:
            assert f"\n{key} =" in out
    # the printed defaults are themselves a valid config
    parse_config(out)


def test_run_latency_config():
    code, out, _ = call("run", "-c", str(CONFIGS / "latency.ini"))
    assert code == 0
    (row,) = csv.DictReader(io.StringIO(out))
    assert row["min_transit"] == row["max_transit"] == "3"
    assert row["max_latency"] == "13" and row["status"] == "ok"


def test_run_is_byte_identical(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[workload]\nsource = synthetic\nrate = 0.2\nduration = 200\nseed = 9\n")
    a = call("run", "-c", str(cfg), "--event-log", str(tmp_path / "a.csv"))
    b = call("run", "-c", str(cfg), "--event-log", str(tmp_path / "b.csv"))
    assert a == b and a[0] == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.csv").read_text().startswith("cycle,component,event,packet_id,flit_kind")


def test_unknown_key_exit_2(tmp_path):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[network]\nversion = v2\nspeed = 3\n\n[extra]\nx = 1\n")
    code, _, err = call("run", "-c", str(cfg))
    assert code == 2
    assert "bad.ini:3" in err and "speed" in err
    assert "bad.ini:5" in err and "[extra]" in err


def test_bad_value_exit_2(tmp_path):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[network]\n\nvc_depth = many\n")
    code, _, err = call("describe", "-c", str(cfg))
    assert code == 2 and "bad.ini:3" in err and "vc_depth" in err


def test_invalid_width_exit_2():
    code, _, err = call("describe", "--set", "network.width=12")
    assert code == 2 and "width" in err


def test_missing_config_file():
    code, _, err = call("run", "-c", "/nonexistent/x.ini")
    assert code == 2


def test_fault_exit_3(monkeypatch):
    from tdm_noc import engine
    from tdm_noc.fabric import FabricFault

    def boom(self):
        raise FabricFault("cycle 7: injected fault; occupancy [in0.vc0=1]")

    monkeypatch.setattr(engine.Simulation, "step", boom)
    code, _, err = call("run", "--set", "workload.regions=1")
    assert code == 3 and "cycle 7" in err and "occupancy" in err


def test_sweep_and_query(tmp_path):
    cfg = tmp_path / "s.ini"
    cfg.write_text("[workload]\nregions = 4\n[dse]\nversions = v1-flit,v2\nvc_depths = 4,8\n"
                   "frequency_mhz = 292.31\nsweep_id = t\n")
    table = tmp_path / "sweep.csv"
    code, _, _ = call("sweep", "-c", str(cfg), "-o", str(table), "--plot-dir", str(tmp_path))
    assert code == 0
    assert (tmp_path / "t_mean_latency.svg").exists()
    rows = list(csv.DictReader(table.open()))
    assert [r["version"] for r in rows] == ["v1-flit", "v1-flit", "v2", "v2"]

    code, out, _ = call("query", str(table), "--max-vc-depth", "4")
    assert code == 0
    ranked = list(csv.DictReader(io.StringIO(out)))
    assert [(r["switches"], r["vc_depth"]) for r in ranked] == [("1", "4"), ("2", "4")]

    code, out, _ = call("query", str(table), "--min-throughput-mbps", "1e9")
    assert code == 0 and "no config satisfies" in out


def test_sweep_workers_identical(tmp_path):
    base = ["sweep", "--set", "workload.regions=4", "--set", "dse.vc_depths=4,8"]
    assert call(*base, "-j", "1") == call(*base, "-j", "2")


def test_trace_debug_format():
    code, out, _ = call("trace", "--payload", "beef", "--kind", "1", "--port", "2",
                        "--int-length", "3")
    assert code == 0
    assert out.splitlines()[1:] == ["header:33", "body:be", "body:ef", "tail:ff"]


def test_trace_v1_words():
    code, out, _ = call("trace", "--set", "network.version=v1", "--payload", "beef",
                        "--kind", "1", "--port", "2", "--int-length", "3")
    assert out.splitlines()[1:] == ["header:33beef"]


def test_describe():
    code, out, _ = call("describe", "--set", "network.version=p2p")
    assert code == 0 and out.count("-> sink") == 16


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "tdm_noc", "config", "--defaults"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and "[network]" in res.stdout


def test_readme_commands_run(tmp_path, monkeypatch):
    import re
    import shlex
    import shutil

    root = CONFIGS.parent
    shutil.copytree(CONFIGS, tmp_path / "configs")
    monkeypatch.chdir(tmp_path)
    commands = re.findall(r"^\$ tdm-noc (.+)$", (root / "README.md").read_text(), re.M)
    assert len(commands) >= 6
    for line in commands:
        code, out, err = call(*shlex.split(line))
        assert code == 0, (line, err)
    assert (tmp_path / "events.csv").exists() and (tmp_path / "plots").is_dir()


def test_readme_python_example():
    import re
    text = (CONFIGS.parent / "README.md").read_text()
    (block,) = re.findall(r"```python\n(.*?)```", text, re.S)
    exec(compile(block, "README.md", "exec"), {})
