"""Command-line entry point: ``tdm-noc <run|sweep|query|trace|describe|config>``."""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import re
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .codec import CodecError, Header, Packet, flitize, format_flits, fragment
from .dse import (
    CSV_FIELDS,
    Constraint,
    SweepSpec,
    inverse_query,
    parse_version,
    plot_sweep,
    rows_from_csv,
    rows_to_csv,
    sweep,
    to_bandwidth,
)
from .estimators import NocSimulator
from .fabric import FabricFault
from .topology import ConfigError, NetworkSpec, Switching, build, describe
from .workload import WorkloadSpec

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_FAULT = 0, 1, 2, 3

# section -> key -> (default, help).  Empty default means "unset".
DEFAULTS: dict[str, dict[str, tuple[str, str]]] = {
    "network": {
        "version": ("v2", "v1 | v1-flit | v2 | p2p"),
        "width": ("", "flit width (8/16/32/64) or v1 packet width; empty = 8 flit, 24 packet"),
        "vc_depth": ("32", "slots per VC / input FIFO"),
        "na_depth": ("32", "slots in each adapter's fifo_NA"),
        "n_inputs": ("4", "storage modules feeding the network"),
        "n_outputs": ("4", "processing ports (at most 4)"),
        "sink_period": ("1", "processing modules read one flit every sink_period cycles"),
    },
    "workload": {
        "source": ("auth", "auth | synthetic | stream | file"),
        "seed": ("0", "RNG seed for payloads and synthetic injections"),
        "regions": ("16", "auth: image regions"),
        "wavelengths": ("1", "auth: messages per task per region"),
        "window": ("8", "auth: averaging window (2/4/8/16/32)"),
        "spacing": ("1", "auth: cycles between consecutive messages"),
        "start_time": ("0", "auth: cycle of the first message"),
        "rate": ("0.1", "synthetic: injection probability per source per cycle"),
        "duration": ("1000", "synthetic/stream: injection cycles"),
        "kinds": ("0,1,2,3", "synthetic: data kinds drawn uniformly"),
        "stream_kind": ("1", "stream: data kind of every packet"),
        "interval": ("1", "stream: cycles between packets of one source"),
        "trace_file": ("", "file: trace CSV (time,source,port,kind,hex_payload)"),
        "similarity_threshold": ("0", "regions within this color distance count as similar"),
    },
    "run": {
        "horizon": ("", "stop after this many cycles; empty = until drained"),
        "drain": ("true", "stop once all traffic is delivered"),
        "warmup": ("0", "cycles excluded from throughput and latency statistics"),
        "output": ("", "metrics CSV path; empty = stdout"),
        "event_log": ("", "per-cycle event CSV path; empty = off"),
    },
    "dse": {
        "versions": ("v1,v2", "versions to sweep"),
        "widths": ("8", "flit widths for flit-switched versions"),
        "packet_widths": ("24", "packet widths for packet-switched v1"),
        "vc_depths": ("32", "VC depths"),
        "frequency_mhz": ("", "clock for MB/s conversion; empty = no MB/s column"),
        "workers": ("1", "parallel sweep processes"),
        "output": ("", "sweep CSV path; empty = stdout"),
        "plot_dir": ("", "write <sweep_id>_<metric>.svg here; empty = no plots"),
        "sweep_id": ("sweep", "prefix of plot file names"),
        "min_throughput_mbps": ("", "query target"),
        "min_throughput_bits_per_cycle": ("", "query target"),
        "max_mean_latency": ("", "query target (cycles)"),
        "max_latency": ("", "query target (cycles)"),
        "max_vc_depth": ("", "query target"),
        "max_switches": ("", "query target"),
    },
}

RUN_FIELDS = ("version", "switches", "flit_width", "vc_depth", "cycles", "injected", "delivered",
              "undrained", "min_latency", "mean_latency", "max_latency", "mean_queueing",
              "mean_serialization", "min_transit", "mean_transit", "max_transit",
              "throughput_bits_per_cycle", "throughput_MBps", "flit_throughput",
              "max_vc_occupancy", "stall_cycles", "alloc_waits", "intake_stalls", "status")

CONSTRAINT_KEYS = ("min_throughput_mbps", "min_throughput_bits_per_cycle", "max_mean_latency",
                   "max_latency", "max_vc_depth", "max_switches")


class ConfigFileError(ConfigError):
    pass


def defaults_text() -> str:
    lines = []
    for section, keys in DEFAULTS.items():
        lines.append(f"[{section}]")
        for key, (value, help_) in keys.items():
            lines.append(f"# {help_}")
            lines.append(f"{key} = {value}".rstrip())
        lines.append("")
    return "\n".join(lines)


@dataclass
class Config:
    values: dict[str, dict[str, str]]
    lines: dict[tuple[str, str], int]
    path: str = "<defaults>"

    def where(self, section: str, key: str) -> str:
        line = self.lines.get((section, key))
        return f"{self.path}:{line}: [{section}] {key}" if line else f"[{section}] {key}"

    def raw(self, section: str, key: str) -> str:
        return self.values[section][key].strip()

    def get(self, section: str, key: str, conv=str, allow_empty: bool = True):
        text = self.raw(section, key)
        if text == "":
            if allow_empty:
                return None
            raise ConfigFileError(f"{self.where(section, key)}: value required")
        try:
            return conv(text)
        except (ValueError, TypeError) as exc:
            raise ConfigFileError(f"{self.where(section, key)} = {text!r}: {exc}") from None

    def get_list(self, section: str, key: str, conv=int) -> tuple:
        return self.get(section, key, lambda s: tuple(conv(x.strip()) for x in s.split(",") if x.strip()),
                        allow_empty=False)

    def set(self, section: str, key: str, value: str) -> None:
        if section not in DEFAULTS or key not in DEFAULTS[section]:
            raise ConfigFileError(f"--set {section}.{key}: unknown key")
        self.values[section][key] = value
        self.lines.pop((section, key), None)


_SECTION = re.compile(r"^\s*\[([^\]]+)\]")
_KEY = re.compile(r"^\s*([^#;=:\s][^=:]*?)\s*[=:]")


def _line_map(text: str) -> dict[tuple[str, str], int]:
    out, section = {}, None
    for n, line in enumerate(text.splitlines(), 1):
        m = _SECTION.match(line)
        if m:
            section = m.group(1).strip()
            continue
        m = _KEY.match(line)
        if m and section is not None and not line[:1].isspace():
            out.setdefault((section, m.group(1).strip().lower()), n)
    return out


def parse_config(text: str = "", path: str = "<string>") -> Config:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=path)
    except configparser.Error as exc:
        raise ConfigFileError(str(exc).replace("\n", " ")) from None
    lines = _line_map(text)
    values = {s: {k: v for k, (v, _) in keys.items()} for s, keys in DEFAULTS.items()}
    problems = []
    for section in parser.sections():
        if section not in DEFAULTS:
            line = next((n for n, l in enumerate(text.splitlines(), 1)
                         if _SECTION.match(l) and _SECTION.match(l).group(1).strip() == section), None)
            problems.append(f"{path}:{line}: unknown section [{section}]")
            continue
        for key, value in parser.items(section):
            if key not in DEFAULTS[section]:
                problems.append(f"{path}:{lines.get((section, key), '?')}: unknown key "
                                f"{key!r} in [{section}]")
            else:
                values[section][key] = value
    if problems:
        raise ConfigFileError("\n".join(problems))
    return Config(values, lines, path)


def load_config(path: str | None, overrides=()) -> Config:
    if path is None:
        cfg = parse_config("", "<defaults>")
    else:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigFileError(f"{path}: {exc.strerror}") from None
        cfg = parse_config(text, path)
    for item in overrides:
        name, sep, value = item.partition("=")
        section, dot, key = name.strip().partition(".")
        if not sep or not dot:
            raise ConfigFileError(f"--set {item!r}: expected section.key=value")
        cfg.set(section, key.strip().lower(), value.strip())
    return cfg


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true or false")


def _guard(cfg: Config, section: str, key: str, fn):
    try:
        return fn()
    except ConfigFileError:
        raise
    except (ConfigError, ValueError) as exc:
        # point at the key the message names, if any
        key = next((k for k in DEFAULTS[section] if re.search(rf"\b{k}\b", str(exc))), key)
        raise ConfigFileError(f"{cfg.where(section, key)}: {exc}") from None


def network_params(cfg: Config) -> dict:
    kw = _guard(cfg, "network", "version", lambda: parse_version(cfg.raw("network", "version")))
    kw.update(
        width=cfg.get("network", "width", int),
        vc_depth=cfg.get("network", "vc_depth", int, False),
        na_depth=cfg.get("network", "na_depth", int, False),
        n_inputs=cfg.get("network", "n_inputs", int, False),
        n_outputs=cfg.get("network", "n_outputs", int, False),
        sink_period=cfg.get("network", "sink_period", int, False),
    )
    _guard(cfg, "network", "version", lambda: NetworkSpec(**kw))
    return kw


def _relative_to(cfg: Config, path: str | None) -> str | None:
    # trace paths in a config file are relative to that file
    if path is None or Path(path).is_absolute() or cfg.path.startswith("<"):
        return path
    return str(Path(cfg.path).parent / path)


def workload_spec(cfg: Config) -> WorkloadSpec:
    g = lambda k, conv=int: cfg.get("workload", k, conv, False)  # noqa: E731
    kw = dict(source=cfg.raw("workload", "source"), seed=g("seed"), regions=g("regions"),
              wavelengths=g("wavelengths"), window=g("window"), spacing=g("spacing"),
              start_time=g("start_time"), rate=g("rate", float), duration=g("duration"),
              kinds=cfg.get_list("workload", "kinds"), stream_kind=g("stream_kind"),
              interval=g("interval"), trace_file=_relative_to(cfg, cfg.get("workload", "trace_file")),
              similarity_threshold=g("similarity_threshold", float))
    return _guard(cfg, "workload", "source", lambda: WorkloadSpec(**kw))


def make_trace(cfg: Config, net: dict):
    spec = workload_spec(cfg)
    return _guard(cfg, "workload", "source", lambda: spec.trace(net["n_inputs"], net["n_outputs"]))


def run_params(cfg: Config) -> dict:
    return dict(horizon=cfg.get("run", "horizon", int), drain=cfg.get("run", "drain", _bool, False),
                warmup=cfg.get("run", "warmup", int, False))


def constraint_from(cfg: Config) -> Constraint:
    kw = {k: cfg.get("dse", k, float) for k in CONSTRAINT_KEYS}
    kw["frequency_mhz"] = cfg.get("dse", "frequency_mhz", float)
    return _guard(cfg, "dse", "min_throughput_mbps", lambda: Constraint(**kw))


def sweep_spec(cfg: Config) -> SweepSpec:
    net = network_params(cfg)
    run = run_params(cfg)
    kw = dict(versions=cfg.get_list("dse", "versions", str), widths=cfg.get_list("dse", "widths"),
              packet_widths=cfg.get_list("dse", "packet_widths"),
              vc_depths=cfg.get_list("dse", "vc_depths"), workload=workload_spec(cfg),
              frequency_mhz=cfg.get("dse", "frequency_mhz", float), n_inputs=net["n_inputs"],
              n_outputs=net["n_outputs"], na_depth=net["na_depth"], **run)
    return _guard(cfg, "dse", "versions", lambda: SweepSpec(**kw))


def _fmt(v) -> str:
    if v is None:
        return ""
    return f"{v:.6f}" if isinstance(v, float) else str(v)


def _emit(text: str, path: str | None, out) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        out.write(text)


# -- subcommands ---------------------------------------------------------------------

def cmd_run(args, cfg: Config, out) -> int:
    net = network_params(cfg)
    run = run_params(cfg)
    event_log = args.event_log or cfg.get("run", "event_log")
    est = NocSimulator(log_events=bool(event_log), **net, **run)
    trace = make_trace(cfg, net)
    m = est.fit(trace).metrics_
    row = m.as_dict()
    f_mhz = cfg.get("dse", "frequency_mhz", float)
    row["throughput_MBps"] = to_bandwidth(m, f_mhz) if f_mhz else None
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RUN_FIELDS)
    w.writerow([_fmt(row.get(k)) for k in RUN_FIELDS])
    _emit(buf.getvalue(), args.output or cfg.get("run", "output"), out)
    if event_log:
        Path(event_log).write_text(est.simulation_.events_csv(), encoding="utf-8")
    return EXIT_OK


def cmd_sweep(args, cfg: Config, out) -> int:
    spec = sweep_spec(cfg)
    workers = args.workers if args.workers is not None else cfg.get("dse", "workers", int, False)
    rows = sweep(spec, workers=workers)
    _emit(rows_to_csv(rows), args.output or cfg.get("dse", "output"), out)
    plot_dir = args.plot_dir or cfg.get("dse", "plot_dir")
    if plot_dir:
        Path(plot_dir).mkdir(parents=True, exist_ok=True)
        plot_sweep(rows, cfg.raw("dse", "sweep_id") or "sweep", plot_dir)
    return EXIT_OK


def cmd_query(args, cfg: Config, out) -> int:
    for key in CONSTRAINT_KEYS + ("frequency_mhz",):
        value = getattr(args, key)
        if value is not None:
            cfg.set("dse", key, str(value))
    c = constraint_from(cfg)
    try:
        text = Path(args.table).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigFileError(f"{args.table}: {exc.strerror}") from None
    rows = rows_from_csv(text)
    if not rows:
        raise ConfigFileError(f"{args.table}: sweep table has no rows")
    ranked = inverse_query(rows, c)
    if not ranked:
        out.write("# no config satisfies the constraint\n")
        return EXIT_OK
    out.write(rows_to_csv(ranked))
    return EXIT_OK


def cmd_trace(args, cfg: Config, out) -> int:
    net = network_params(cfg)
    spec = NetworkSpec(**net)
    if args.payload is not None:
        n_bits = args.bits if args.bits is not None else max(4 * len(args.payload), 1)
        messages = [(args.kind, args.port, int(args.payload, 16), n_bits, args.int_length)]
    else:
        trace = make_trace(cfg, net)
        limit = len(trace) if args.limit is None else args.limit
        messages = [(m.kind, m.port, m.payload, m.n_bits, m.int_length) for m in trace[:limit]]
    pid = 0
    for i, (kind, port, payload, n_bits, il) in enumerate(messages):
        packet = Packet(Header(kind, port, il), payload, n_bits)
        out.write(f"# message {i}: kind {kind} port {port} {n_bits} bits\n")
        if spec.switching is Switching.PACKET:
            words = fragment(packet, spec.width, pid)
            pid += len(words)
            out.write(format_flits(words, spec.width))
        else:
            out.write(format_flits(flitize(packet, spec.width, pid), spec.width))
            pid += 1
    return EXIT_OK


def cmd_describe(args, cfg: Config, out) -> int:
    out.write(describe(build(NetworkSpec(**network_params(cfg)))))
    return EXIT_OK


def cmd_config(args, cfg: Config, out) -> int:
    if args.defaults:
        out.write(defaults_text())
        return EXIT_OK
    for section, keys in cfg.values.items():
        out.write(f"[{section}]\n")
        for key, value in keys.items():
            out.write(f"{key} = {value}".rstrip() + "\n")
        out.write("\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tdm-noc", description="Cycle-level TDM NoC simulator and "
                                                          "design-space exploration.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(sp):
        sp.add_argument("-c", "--config", help="INI config file (see `config --defaults`)")
        sp.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config value")
        return sp

    sp = with_config(sub.add_parser("run", help="simulate one network on one workload"))
    sp.add_argument("-o", "--output", help="metrics CSV path (default stdout)")
    sp.add_argument("--event-log", help="write the per-cycle event CSV here")
    sp.set_defaults(func=cmd_run)

    sp = with_config(sub.add_parser("sweep", help="run the design-space sweep"))
    sp.add_argument("-o", "--output", help="sweep CSV path (default stdout)")
    sp.add_argument("-j", "--workers", type=int, help="parallel processes")
    sp.add_argument("--plot-dir", help="write SVG plots here")
    sp.set_defaults(func=cmd_sweep)

    sp = with_config(sub.add_parser("query", help="rank sweep rows meeting a constraint"))
    sp.add_argument("table", help="sweep CSV")
    for key in CONSTRAINT_KEYS + ("frequency_mhz",):
        sp.add_argument(f"--{key.replace('_', '-')}", dest=key, type=float)
    sp.set_defaults(func=cmd_query)

    sp = with_config(sub.add_parser("trace", help="print flitized packets"))
    sp.add_argument("--payload", help="hex payload of a single packet")
    sp.add_argument("--bits", type=int, help="payload length (default 4 bits per hex digit)")
    sp.add_argument("--kind", type=int, default=0)
    sp.add_argument("--port", type=int, default=0)
    sp.add_argument("--int-length", type=int, default=0)
    sp.add_argument("--limit", type=int, help="first N workload messages only")
    sp.set_defaults(func=cmd_trace)

    sp = with_config(sub.add_parser("describe", help="print the topology edge list"))
    sp.set_defaults(func=cmd_describe)

    sp = with_config(sub.add_parser("config", help="print the effective or default config"))
    sp.add_argument("--defaults", action="store_true", help="print every default with notes")
    sp.set_defaults(func=cmd_config)
    return p


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.set)
        return args.func(args, cfg, out)
    except ConfigError as exc:
        err.write(f"tdm-noc: config error: {exc}\n")
        return EXIT_CONFIG
    except FabricFault as exc:
        err.write(f"tdm-noc: simulation fault: {exc}\n")
        return EXIT_FAULT
    except (CodecError, ValueError, OSError) as exc:
        err.write(f"tdm-noc: error: {exc}\n")
        return EXIT_ERROR


__all__ = ["main", "parse_config", "load_config", "defaults_text", "CSV_FIELDS"]
