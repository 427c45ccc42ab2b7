"""Experiment specs, presets and the three batch commands behind the CLI.

Every output embeds the fully resolved spec.  Nothing that varies between
runs (timestamps, worker count, host) is written, so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import analytics as an
from .auth import AuthVariant, OrderPolicy
from .channels import GaussianToy, Parametric, PfpRangeError, PfpTable, TableDriven, lookup_pfp
from .mac import KeyedPrf
from .model import ConfigurationError, InfeasibleConfigurationError, Scheme, SystemConfig
from .simulate import default_mode, run_trials
from .stats import mean_keys_tried_accepted, summarize

log = logging.getLogger(__name__)

CHANNEL_KINDS = ("parametric", "table", "gaussian_toy")
CONFIG_SWEEPABLE = ("N", "K", "L", "D", "A", "n", "P", "noiseVariance")
CHANNEL_SWEEPABLE = ("pTP", "energy")
ANALYTIC_COLUMNS = (
    "p_succ_exh", "p_succ_heur", "p_misauth_exh", "p_misauth_heur",
    "p_type1", "p_type2", "p_fp_auth_exh", "p_fp_auth_heur", "p_definite_fp",
    "p_spoof_mac_only", "p_spoof_addressed",
)
FIG3_COLUMNS = ("N", "p_succ_exh", "p_succ_heur", "p_misauth_exh", "p_misauth_heur")
_SPEC_KEYS = {
    "name", "config", "channel", "authVariant", "sweep", "trials", "masterSeed",
    "outputPath", "spoofCount", "macMode", "order", "pFP", "kTP", "columns", "tables",
}


class UsageError(ConfigurationError):
    """Malformed spec or command line (exit code 2)."""


@dataclass(frozen=True)
class Sweep:
    parameter: str
    grid: tuple

    def __post_init__(self):
        if self.parameter not in CONFIG_SWEEPABLE + CHANNEL_SWEEPABLE:
            raise UsageError(f"cannot sweep {self.parameter!r}; choose from "
                             f"{', '.join(CONFIG_SWEEPABLE + CHANNEL_SWEEPABLE)}")
        if not self.grid:
            raise UsageError("sweep grid is empty")
        object.__setattr__(self, "grid", tuple(self.grid))


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    config: SystemConfig
    channel: dict = field(default_factory=lambda: {"kind": "parametric", "pTP": 1.0})
    authVariant: AuthVariant = AuthVariant.EXHAUSTIVE
    sweep: Sweep | None = None
    trials: int = 1000
    masterSeed: int = 0
    outputPath: str | None = None
    spoofCount: int = 0
    macMode: str = "IdealOracle"
    order: OrderPolicy = OrderPolicy.ASCENDING
    pFP: float | None = None
    kTP: int | None = None
    columns: tuple | None = None
    tables: dict | None = None

    def __post_init__(self):
        object.__setattr__(self, "authVariant", AuthVariant(self.authVariant))
        object.__setattr__(self, "order", OrderPolicy(self.order))
        kind = self.channel.get("kind")
        if kind not in CHANNEL_KINDS:
            raise UsageError(f"channel.kind must be one of {CHANNEL_KINDS}, got {kind!r}")
        if self.macMode not in ("IdealOracle", "KeyedPrf"):
            raise UsageError(f"macMode must be IdealOracle or KeyedPrf, got {self.macMode!r}")
        if self.trials < 1:
            raise UsageError("trials must be >= 1")
        if not 0 <= self.masterSeed < 2**64:
            raise UsageError("masterSeed must be an unsigned 64-bit integer")
        if self.spoofCount < 0:
            raise UsageError("spoofCount must be >= 0")
        if self.pFP is not None and not 0 <= self.pFP <= 1:
            raise UsageError("pFP must lie in [0, 1]")

    # (de)serialization ---------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        doc = {
            "name": self.name,
            "config": self.config.to_dict(),
            "channel": dict(self.channel),
            "authVariant": self.authVariant.value,
            "sweep": None if self.sweep is None else
            {"parameter": self.sweep.parameter, "grid": list(self.sweep.grid)},
            "trials": self.trials,
            "masterSeed": self.masterSeed,
            "outputPath": self.outputPath,
            "spoofCount": self.spoofCount,
            "macMode": self.macMode,
            "order": self.order.value,
            "pFP": self.pFP,
            "kTP": self.kTP,
            "columns": None if self.columns is None else list(self.columns),
            "tables": self.tables,
        }
        return doc

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "ExperimentSpec":
        unknown = set(doc) - _SPEC_KEYS
        if unknown:
            raise UsageError(f"unknown ExperimentSpec fields: {sorted(unknown)}")
        if "config" not in doc:
            raise UsageError("ExperimentSpec needs a 'config' object")
        d = dict(doc)
        d.setdefault("name", "experiment")
        d["config"] = SystemConfig.from_dict(d["config"])
        sw = d.get("sweep")
        if sw is not None:
            if set(sw) != {"parameter", "grid"}:
                raise UsageError("sweep needs exactly 'parameter' and 'grid'")
            d["sweep"] = Sweep(sw["parameter"], tuple(sw["grid"]))
        if d.get("columns") is not None:
            d["columns"] = tuple(d["columns"])
        try:
            return cls(**d)
        except TypeError as exc:
            raise UsageError(str(exc)) from None
        except ValueError as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise UsageError(str(exc)) from None

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentSpec":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(doc)

    def with_overrides(self, **kw) -> "ExperimentSpec":
        doc = self.to_dict()
        doc.update({k: v for k, v in kw.items() if v is not None})
        return ExperimentSpec.from_dict(doc)

    # resolution ------------------------------------------------------------

    def points(self) -> list[tuple[Any, SystemConfig, dict]]:
        """``(sweep value, config, channel dict)`` for every grid point."""
        if self.sweep is None:
            return [(None, self.config, dict(self.channel))]
        out = []
        for v in self.sweep.grid:
            cfg, ch = self.config, dict(self.channel)
            if self.sweep.parameter in CONFIG_SWEEPABLE:
                try:
                    cfg = cfg.replace(**{self.sweep.parameter: v})
                except ConfigurationError as exc:
                    raise UsageError(f"grid value {self.sweep.parameter}={v!r}: {exc}") from None
            else:
                ch[self.sweep.parameter] = v
            out.append((v, cfg, ch))
        return out

    def mac_mode(self):
        return KeyedPrf() if self.macMode == "KeyedPrf" else default_mode(self.masterSeed)


def build_channel(ch: dict, base_dir: Path | None = None):
    kind = ch.get("kind")
    if kind == "parametric":
        _only(ch, {"kind", "pTP"})
        return Parametric(float(ch.get("pTP", 1.0)))
    if kind == "table":
        _only(ch, {"kind", "path", "energy"})
        if "path" not in ch or "energy" not in ch:
            raise UsageError("table channel needs 'path' and 'energy'")
        p = Path(ch["path"])
        if base_dir is not None and not p.is_absolute():
            p = base_dir / p
        return TableDriven(PfpTable.from_csv(p), float(ch["energy"]))
    if kind == "gaussian_toy":
        _only(ch, {"kind", "codebookSeed", "budget", "memoryBudget"})
        return GaussianToy(int(ch.get("codebookSeed", 0)), int(ch.get("budget", 10**8)),
                           int(ch.get("memoryBudget", 5 * 10**7)))
    raise UsageError(f"unknown channel kind {kind!r}")


def _only(ch: dict, allowed: set) -> None:
    extra = set(ch) - allowed
    if extra:
        raise UsageError(f"unknown channel fields for kind {ch['kind']!r}: {sorted(extra)}")


# presets --------------------------------------------------------------------

def _fig3_grid() -> list[int]:
    return [int(round(x)) for x in np.logspace(3, 6, 31)]


PRESETS: dict[str, dict] = {
    "fig3": {
        "name": "fig3",
        "config": {"N": 1000, "K": 100, "L": 32, "D": 64, "scheme": "MacOnly"},
        "channel": {"kind": "parametric", "pTP": 0.99},
        "pFP": 0.01,
        "sweep": {"parameter": "N", "grid": _fig3_grid()},
        "columns": list(FIG3_COLUMNS),
        "trials": 1000,
    },
    "exhaustive-small": {
        "name": "exhaustive-small",
        "config": {"N": 200, "K": 20, "L": 8, "D": 32, "scheme": "MacOnly"},
        "channel": {"kind": "parametric", "pTP": 1.0},
        "authVariant": "Exhaustive",
        "trials": 10000,
    },
    "heuristic-small": {
        "name": "heuristic-small",
        "config": {"N": 200, "K": 20, "L": 8, "D": 32, "scheme": "MacOnly"},
        "channel": {"kind": "parametric", "pTP": 1.0},
        "authVariant": "Heuristic",
        "order": "UniformRandomPerMessage",
        "trials": 10000,
    },
    "spoof": {
        "name": "spoof",
        "config": {"N": 200, "K": 1, "L": 8, "D": 32, "scheme": "MacOnly"},
        "channel": {"kind": "parametric", "pTP": 0.5},
        "authVariant": "Heuristic",
        "spoofCount": 1,
        "trials": 100000,
    },
    "fig6": {
        "name": "fig6",
        "config": {"N": 100000, "K": 100, "L": 32, "D": 64, "A": 32, "scheme": "AddressMac"},
        "channel": {"kind": "parametric", "pTP": 1.0},
        "trials": 1,
    },
}


def preset(name: str) -> ExperimentSpec:
    if name not in PRESETS:
        raise UsageError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}")
    return ExperimentSpec.from_dict(json.loads(json.dumps(PRESETS[name])))


# output helpers -------------------------------------------------------------

def fmt(v) -> str:
    """Scientific notation, 9 significant digits; integers verbatim."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".8e")


def _csv_text(header_lines: list[str], columns: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    for h in header_lines:
        buf.write(f"# {h}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def _embedded_spec(spec: ExperimentSpec) -> dict:
    # the destination path is left out so that output bytes do not depend on it
    doc = spec.to_dict()
    doc.pop("outputPath", None)
    return doc


def _spec_header(spec: ExperimentSpec) -> str:
    return "spec=" + json.dumps(_embedded_spec(spec), sort_keys=True, separators=(",", ":"))


def write_output(text: str, path: str | Path | None) -> None:
    if path is None:
        return
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text)


# cmd_analytic -----------------------------------------------------------------

def analytic_row(cfg: SystemConfig, pTP: float, pFP: float, kTP: int | None) -> dict[str, float]:
    N, K, L = cfg.N, cfg.K, cfg.L
    if K < 1:
        raise UsageError("analytic evaluation needs K >= 1")
    ktp = an.expected_ktp(K, pTP) if kTP is None else kTP
    if not 0 <= ktp <= K:
        raise UsageError(f"kTP={ktp} outside [0, K]")
    fp_exh = an.prob_fp_accept_exhaustive(N, ktp, K, L)
    return {
        "p_succ_exh": an.prob_success_exhaustive(N, K, L),
        "p_succ_heur": an.prob_success_heuristic(N, L),
        "p_misauth_exh": pFP * fp_exh,
        "p_misauth_heur": an.prob_misauth_heuristic(pTP, pFP, N, L),
        "p_type1": an.prob_type1(N, L),
        "p_type2": an.prob_type2(K, L),
        "p_fp_auth_exh": fp_exh,
        "p_fp_auth_heur": an.prob_fp_accept_heuristic(N, L),
        "p_definite_fp": an.prob_definite_fp(N, L),
        "p_spoof_mac_only": an.prob_spoof(pTP, N, L, Scheme.MAC_ONLY),
        "p_spoof_addressed": an.prob_spoof(pTP, N, L, Scheme.ADDRESS_MAC),
    }


def cmd_analytic(spec: ExperimentSpec) -> str:
    """Closed forms over the sweep grid, as CSV text (also written to outputPath)."""
    param = spec.sweep.parameter if spec.sweep else "N"
    cols = list(spec.columns) if spec.columns else [param] + list(ANALYTIC_COLUMNS)
    bad = [c for c in cols if c not in ANALYTIC_COLUMNS and c not in CONFIG_SWEEPABLE + CHANNEL_SWEEPABLE]
    if bad:
        raise UsageError(f"unknown analytic columns {bad}")
    rows = []
    for value, cfg, ch in spec.points():
        if ch["kind"] != "parametric":
            raise UsageError("analytic evaluation needs a parametric channel (pTP)")
        pTP = float(ch.get("pTP", 1.0))
        if not 0 <= pTP <= 1:
            raise UsageError("pTP must lie in [0, 1]")
        pFP = 1.0 - pTP if spec.pFP is None else spec.pFP
        vals = analytic_row(cfg, pTP, pFP, spec.kTP)
        vals.update({k: getattr(cfg, k) for k in CONFIG_SWEEPABLE})
        vals["pTP"] = pTP
        if value is not None:
            vals[param] = value
        rows.append([vals.get(c) for c in cols])
    text = _csv_text([_spec_header(spec)], cols, rows)
    write_output(text, spec.outputPath)
    return text


# cmd_simulate -----------------------------------------------------------------

def simulate_point(spec: ExperimentSpec, cfg: SystemConfig, ch: dict, workers: int = 1,
                   base_dir: Path | None = None) -> dict:
    channel = build_channel(ch, base_dir)
    if isinstance(channel, GaussianToy) and spec.spoofCount:
        raise UsageError("spoofCount needs a channel with a decoding probability")
    stats = run_trials(cfg, channel, spec.authVariant, spec.trials, spec.masterSeed,
                       spec.spoofCount, mode=spec.mac_mode(), order=spec.order, workers=workers)
    pdec = channel.decoding_probability(cfg)
    rates = summarize(stats, cfg, spec.authVariant, pdec, spec.spoofCount)
    return {
        "config": cfg.to_dict(),
        "channel": ch,
        "decodingProbability": pdec,
        "counters": stats.to_dict(),
        "rates": [r.to_dict() for r in rates],
        "meanKeysTriedAccepted": mean_keys_tried_accepted(stats),
    }


def cmd_simulate(spec: ExperimentSpec, workers: int = 1, base_dir: Path | None = None) -> str:
    """Monte Carlo over the sweep grid, as a JSON document."""
    points = []
    for value, cfg, ch in spec.points():
        log.info("simulate %s: %s=%s", spec.name, spec.sweep.parameter if spec.sweep else "-", value)
        pt = simulate_point(spec, cfg, ch, workers, base_dir)
        if spec.sweep is not None:
            pt = {"sweepValue": value, **pt}
        points.append(pt)
    doc = {"spec": _embedded_spec(spec), "points": points}
    text = json.dumps(doc, indent=2, allow_nan=False, default=_json_default) + "\n"
    write_output(text, spec.outputPath)
    return text


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    raise TypeError(type(o).__name__)


# cmd_compare_schemes --------------------------------------------------------

COMPARE_COLUMNS = (
    "energy_db", "pfp_bare", "pfp_mac_only", "pfp_address_mac",
    "misauth_bare", "misauth_mac_only", "misauth_address_mac", "floor_bare",
)


def compare_schemes(tables: dict[str, PfpTable], *, N: int, K: int, D: int, L: int, A: int,
                    kTP: int | None = None) -> tuple[list[str], list[list]]:
    """Total mis-authentication of the three packet structures on a shared energy grid.

    ``tables`` maps ``Bare``/``MacOnly``/``AddressMac`` to a PfpTable holding
    rows for B = D, D+L and D+L+A respectively.  The grid is the union of
    tabulated energies inside the common range.  When ``kTP`` is omitted it
    is taken as the expected number of true positives at each energy.
    """
    Bs = {"Bare": D, "MacOnly": D + L, "AddressMac": D + L + A}
    if set(tables) != set(Bs):
        raise UsageError("need tables for Bare, MacOnly and AddressMac")
    curves = {}
    for s, B in Bs.items():
        try:
            curves[s] = tables[s].curve(B)
        except PfpRangeError as exc:
            raise InfeasibleConfigurationError(f"{s} table: {exc}") from None
    lo = max(c[0][0] for c in curves.values())
    hi = min(c[0][-1] for c in curves.values())
    if lo > hi:
        raise InfeasibleConfigurationError(
            f"energy ranges do not overlap (common range would be [{lo}, {hi}] dB)")
    grid = sorted({e for xs, _ in curves.values() for e in xs if lo <= e <= hi})
    floor = an.collision_floor(K, D) if K >= 2 else 0.0
    rows = []
    for e in grid:
        pf = {s: lookup_pfp(tables[s], Bs[s], e) for s in Bs}
        ktp = an.expected_ktp(K, 1.0 - pf["MacOnly"]) if kTP is None else kTP
        rows.append([
            e, pf["Bare"], pf["MacOnly"], pf["AddressMac"],
            an.total_misauth(Scheme.BARE, pf["Bare"]),
            an.total_misauth(Scheme.MAC_ONLY, pf["MacOnly"], N=N, kTP=ktp, K=K, L=L),
            an.total_misauth(Scheme.ADDRESS_MAC, pf["AddressMac"], L=L),
            floor,
        ])
    return list(COMPARE_COLUMNS), rows


def cmd_compare_schemes(spec: ExperimentSpec, tables: dict[str, PfpTable],
                        sources: dict[str, str] | None = None) -> str:
    cfg = spec.config
    cols, rows = compare_schemes(tables, N=cfg.N, K=cfg.K, D=cfg.D, L=cfg.L, A=cfg.A, kTP=spec.kTP)
    header = [
        _spec_header(spec),
        "pFP tables are external inputs; values at grid points are used verbatim, "
        "log-linear interpolation elsewhere",
    ]
    for s in ("Bare", "MacOnly", "AddressMac"):
        src = (sources or {}).get(s, "<in-memory>")
        meta = tables[s]
        header.append(f"table {s}: {src} (K={meta.K}, n={meta.n})")
    text = _csv_text(header, cols, rows)
    write_output(text, spec.outputPath)
    return text
