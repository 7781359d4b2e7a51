"""
Command-line pipeline for MX-FAR panel analysis

Subcommands share the panel CSV contract, so stages chain through files:

    mxfar simulate --kind expar --seed 7 --output-dir sim
    mxfar fit --input sim/panel.csv --output-dir fit
    mxfar fpdc --input sim/panel.csv --output-dir fpdc --boot-reps 200

Every subcommand with an output directory writes one manifest.json holding
the resolved flags, seed, sha256 digests and the tool version. A manifest
(or any YAML/JSON file keyed by flag name) is accepted by ``--config``;
explicit flags override it.
"""
import argparse
import hashlib
import json
import logging
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
import yaml
from colorama import Fore, Style
from pydantic import ValidationError

from mxfar.config import __version__, configure_logging, get_settings
from mxfar.core import (
    KernelKind, Panel, build_grid, load_panel, rule_of_thumb_bandwidth, validate_panel, write_panel,
)
from mxfar.estimator import fit_independent, fit_mxfar, write_coefficient_grid
from mxfar.estimator.export import regressor_labels
from mxfar.exceptions import ConfigurationError, DataError, MxfarError
from mxfar.inference import POOLING_ALL, POOLING_SUBJECT, coefficient_bands, nonlinearity_test
from mxfar.models import GeneratorKind, GeneratorSpec, ModelConfig, ReferenceSpec, RunManifest
from mxfar.selection import select_model
from mxfar.selection.ape import DEFAULT_SUBSERIES
from mxfar.simulator import simulate
from mxfar.spectral import (
    amplitude_regimes, edge_significance, mean_fpdc, network_summary, omega_grid, split_windows, subject_fpdc,
)

logger = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.json"
PANEL_FILE = "panel.csv"
SIMULATION_FILE = "simulation.json"
APE_FILE = "ape.csv"
SELECTED_CONFIG_FILE = "selected_config.yaml"
INDEPENDENT_FILE = "independent_coefficients.csv"
TEST_FILE = "nonlinearity_test.json"
L_BOOT_FILE = "l_boot.csv"
BANDS_FILE = "bands.csv"
FPDC_FILE = "fpdc.csv"
FPDC_SURFACE_FILE = "fpdc_surface.csv"
FPDC_SUBJECTS_FILE = "fpdc_subjects.csv"
NETWORK_FILE = "network.csv"
NETWORK_DOT_FILE = "network.dot"

# keys that describe the invocation rather than the computation
_INVOCATION_KEYS = {"command", "config", "verbose", "handler"}

# generator settings without a flag, accepted from --config only
_CONFIG_ONLY_KEYS = {"knots", "values", "coefficients", "coefficients_high", "bound", "max_redraws"}

DEFAULTS: Dict[str, Any] = {
    "p": 1,
    "kernel": KernelKind.EPANECHNIKOV.value,
    "grid_size": 50,
    "lambda": 1.0,
    "ref_channel": 2,
    "ref_lag": 2,
    "boot_reps": 200,
    "alpha": 0.05,
    "omega_points": 64,
    "seed": 0,
    "pooling": POOLING_SUBJECT,
    "subseries": DEFAULT_SUBSERIES,
    "p_grid": [1, 2],
    "ref_lags": [1, 2, 3],
    "kind": GeneratorKind.EXPAR.value,
}

# reference lags when the reference is an exogenous series, which is used as given
EXOGENOUS_DEFAULTS: Dict[str, Any] = {"ref_lag": 0, "ref_lags": [0]}


# ----------------------------------------------------------------------------
# Argument types
# ----------------------------------------------------------------------------

def _list_of(cast: Callable[[str], Any]) -> Callable[[Any], List[Any]]:
    def parse(text: Any) -> List[Any]:
        if isinstance(text, (list, tuple)):
            return [cast(item) for item in text]
        try:
            return [cast(item) for item in str(text).split(",") if item.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a comma-separated list, got {text!r}")
    return parse


_int_list = _list_of(int)
_float_list = _list_of(float)


# ----------------------------------------------------------------------------
# Parser
# ----------------------------------------------------------------------------

def _common_options() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", help="YAML/JSON file of flag values, or a previous manifest.json")
    parent.add_argument("--threads", type=int, help="Worker count (default MXFAR_THREADS or all cores)")
    parent.add_argument("--verbose", "-v", action="store_true", help="Log progress at INFO level")
    return parent


def _input_options() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--input", help="Panel CSV (subject_id,group_id,time_index,ch_1..ch_k)")
    parent.add_argument("--exogenous", help="Exogenous reference CSV (subject_id,time_index,value)")
    parent.add_argument("--output-dir", dest="output_dir", help="Directory for result files")
    return parent


def _model_options() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--p", type=int, help="Autoregressive lag order (default 1)")
    parent.add_argument("--bandwidth", type=float, help="Kernel bandwidth h (default Scott's rule on the reference)")
    parent.add_argument("--kernel", choices=[kind.value for kind in KernelKind], help="Kernel (default epanechnikov)")
    parent.add_argument("--grid-size", dest="grid_size", type=int, help="Grid segments M (default 50)")
    parent.add_argument("--lambda", dest="lambda", type=float, help="Penalty scale (default 1)")
    parent.add_argument("--ref-channel", dest="ref_channel", type=int,
                        help="1-based reference channel (default 2; ignored with --exogenous)")
    parent.add_argument("--ref-lag", dest="ref_lag", type=int, help="Reference lag d (default 2, or 0 with --exogenous)")
    return parent


def _bootstrap_options() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--boot-reps", dest="boot_reps", type=int, help="Bootstrap replicates B (default 200)")
    parent.add_argument("--seed", type=int, help="Root seed (default 0)")
    parent.add_argument("--pooling", choices=[POOLING_SUBJECT, POOLING_ALL],
                        help="Resample residuals within subject (default) or pooled over subjects")
    return parent


def _spectral_options() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--alpha", type=float, help="Significance level (default 0.05)")
    parent.add_argument("--omega-points", dest="omega_points", type=int, help="Frequencies in (0, 0.5) (default 64)")
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mxfar", description="Mixed-effects functional-coefficient autoregression")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    common, inputs, model = _common_options(), _input_options(), _model_options()
    bootstrap, spectral = _bootstrap_options(), _spectral_options()

    sim = commands.add_parser("simulate", parents=[common], help="Generate a synthetic panel")
    sim.add_argument("--kind", choices=[kind.value for kind in GeneratorKind], help="Design (default expar)")
    sim.add_argument("--output-dir", dest="output_dir", help="Directory for panel.csv and simulation.json")
    sim.add_argument("--seed", type=int, help="Root seed (default 0)")
    sim.add_argument("--n-subjects", dest="n_subjects", type=int, help="Subjects N")
    sim.add_argument("--group-sizes", dest="group_sizes", type=_int_list, help="Subjects per group, e.g. 10,10")
    sim.add_argument("--n-channels", dest="n_channels", type=int, help="Channels k")
    sim.add_argument("--n-time", dest="n_time", type=int, help="Retained length T")
    sim.add_argument("--burn-in", dest="burn_in", type=int, help="Discarded leading samples")
    sim.add_argument("--p", type=int, help="Generator lag order (default 1)")
    sim.add_argument("--ref-channel", dest="ref_channel", type=int, help="Channel driving the coefficients (default 2)")
    sim.add_argument("--ref-lag", dest="ref_lag", type=int, help="Reference lag (default 2)")
    sim.add_argument("--noise-sd", dest="noise_sd", type=float, help="Innovation SD")
    sim.add_argument("--random-effect-sd", dest="random_effect_sd", type=float, help="Random-effect SD")
    sim.add_argument("--threshold", type=float, help="TAR threshold")
    sim.add_argument("--grid-size", dest="grid_size", type=int, help="Grid segments for the true-curve table")
    sim.set_defaults(handler=cmd_simulate)

    val = commands.add_parser("validate", parents=[common], help="Check a panel CSV against the input contract")
    val.add_argument("--input", help="Panel CSV")
    val.set_defaults(handler=cmd_validate)

    sel = commands.add_parser("select", parents=[common, inputs, model], help="APE selection of (h, p, reference)")
    sel.add_argument("--h-grid", dest="h_grid", type=_float_list, help="Bandwidths (default Scott's rule x 0.5..2)")
    sel.add_argument("--p-grid", dest="p_grid", type=_int_list, help="Lag orders (default 1,2)")
    sel.add_argument("--ref-channels", dest="ref_channels", type=_int_list, help="Reference channels (default all)")
    sel.add_argument("--ref-lags", dest="ref_lags", type=_int_list, help="Reference lags (default 1,2,3, or 0 with --exogenous)")
    sel.add_argument("--horizon", type=int, help="Forecast points per subseries r (default floor(0.1 T))")
    sel.add_argument("--subseries", type=int, help="Subseries Q (default 4)")
    sel.set_defaults(handler=cmd_select)

    fit = commands.add_parser("fit", parents=[common, inputs, model], help="Fit MX-FAR coefficient curves")
    fit.add_argument("--independent", action="store_true", default=None,
                     help="Also fit every subject on its own at each grid point")
    fit.set_defaults(handler=cmd_fit)

    test = commands.add_parser("test", parents=[common, inputs, model, bootstrap],
                               help="Bootstrap test of a linear mixed-effects VAR against MX-FAR")
    test.set_defaults(handler=cmd_test)

    bands = commands.add_parser("bands", parents=[common, inputs, model, bootstrap],
                                help="Bootstrap confidence bands of the group-mean coefficients")
    bands.add_argument("--alpha", type=float, help="Bands have coverage 1 - alpha (default 0.05)")
    bands.set_defaults(handler=cmd_bands)

    fpdc = commands.add_parser("fpdc", parents=[common, inputs, model, bootstrap, spectral],
                               help="Functional PDC with edge significance")
    fpdc.add_argument("--per-subject", dest="per_subject", action="store_true", default=None,
                      help="Also write every subject's fPDC surface")
    fpdc.set_defaults(handler=cmd_fpdc)

    network = commands.add_parser("network", parents=[common, inputs, model, bootstrap, spectral],
                                  help="Per-window significant-edge networks")
    network.add_argument("--window-len", dest="window_len", type=int, help="Non-overlapping window length")
    network.set_defaults(handler=cmd_network)
    return parser


# ----------------------------------------------------------------------------
# Option resolution
# ----------------------------------------------------------------------------

def load_config_file(path: str) -> Dict[str, Any]:
    """
    Read flag values from YAML/JSON; a manifest contributes its ``config`` block.

    Raises:
        ConfigurationError: unreadable file or a non-mapping document
    """
    try:
        with open(path) as handle:
            document = yaml.safe_load(handle)
    except (OSError, yaml.YAMLError) as e:
        raise ConfigurationError(f"{path}: cannot read configuration ({e})")
    if document is None:
        return {}
    if not isinstance(document, dict):
        raise ConfigurationError(f"{path}: configuration must be a mapping of flag names to values")
    if "config" in document and "tool_version" in document:
        document = document["config"]
    return {str(key).replace("-", "_"): value for key, value in document.items()}


def resolve_options(args: argparse.Namespace) -> Dict[str, Any]:
    """Defaults, then the --config file, then explicit flags"""
    explicit = vars(args)
    options = {key: DEFAULTS[key] for key in explicit if key in DEFAULTS}
    given = set()
    if args.config:
        for key, value in load_config_file(args.config).items():
            if key in _INVOCATION_KEYS:
                continue
            if key not in explicit and not (args.command == "simulate" and key in _CONFIG_ONLY_KEYS):
                logger.warning(f"{args.config}: ignoring '{key}', not an option of '{args.command}'")
                continue
            options[key] = value
            if value is not None:
                given.add(key)
    for key, value in explicit.items():
        if value is not None and key not in _INVOCATION_KEYS:
            options[key] = value
            given.add(key)
    if options.get("exogenous"):
        for key, value in EXOGENOUS_DEFAULTS.items():
            if key in options and key not in given:
                options[key] = value
    for key in ("group_sizes", "p_grid", "ref_channels", "ref_lags"):
        if options.get(key) is not None:
            options[key] = _int_list(options[key])
    if options.get("h_grid") is not None:
        options["h_grid"] = _float_list(options["h_grid"])
    options.setdefault("threads", None)
    return options


def _require(options: Dict[str, Any], *keys: str) -> None:
    missing = [key for key in keys if options.get(key) is None]
    if missing:
        raise ConfigurationError(f"Missing required option(s): {', '.join('--' + k.replace('_', '-') for k in missing)}")


def reference_spec(options: Dict[str, Any]) -> ReferenceSpec:
    if options.get("exogenous"):
        return ReferenceSpec.exogenous(lag=options["ref_lag"])
    return ReferenceSpec.from_channel(options["ref_channel"], options["ref_lag"])


def model_config(options: Dict[str, Any], panel: Panel) -> ModelConfig:
    """ModelConfig from resolved options; a missing bandwidth falls back to Scott's rule"""
    reference = reference_spec(options)
    bandwidth = options.get("bandwidth")
    if bandwidth is None:
        bandwidth = rule_of_thumb_bandwidth(panel, reference, start=max(options["p"], reference.lag))
        options["bandwidth"] = bandwidth
        logger.info(f"Bandwidth not given; using {bandwidth:.4g} from Scott's rule")
    return ModelConfig(p=options["p"], reference=reference, kernel=options["kernel"], bandwidth=bandwidth,
                       grid_size=options["grid_size"], penalty_scale=options["lambda"])


def read_panel(options: Dict[str, Any]) -> Panel:
    _require(options, "input")
    return load_panel(options["input"], options.get("exogenous"))


# ----------------------------------------------------------------------------
# Output helpers
# ----------------------------------------------------------------------------

def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


class RunRecorder:
    """Collects outputs of one subcommand and writes its manifest"""

    def __init__(self, command: str, options: Dict[str, Any]):
        self.command = command
        self.options = options
        _require(options, "output_dir")
        self.output_dir = Path(options["output_dir"])
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.float_format = get_settings().output_float_format
        self.outputs: List[Path] = []
        self.started = time.perf_counter()

    def path(self, name: str) -> Path:
        return self.output_dir / name

    def frame(self, name: str, frame: pd.DataFrame) -> Path:
        path = self.path(name)
        frame.to_csv(path, index=False, float_format=self.float_format, lineterminator="\n")
        self.outputs.append(path)
        return path

    def json(self, name: str, document: Any) -> Path:
        path = self.path(name)
        path.write_text(json.dumps(document, indent=2, sort_keys=True, default=_json_default) + "\n")
        self.outputs.append(path)
        return path

    def text(self, name: str, text: str) -> Path:
        path = self.path(name)
        path.write_text(text)
        self.outputs.append(path)
        return path

    def added(self, paths: Sequence[Path]) -> None:
        self.outputs.extend(Path(path) for path in paths)

    def write_manifest(self) -> Path:
        inputs = {str(self.options[key]): sha256_file(Path(self.options[key]))
                  for key in ("input", "exogenous", "config") if self.options.get(key)}
        config = {key: value for key, value in self.options.items() if key not in _INVOCATION_KEYS}
        manifest = RunManifest(
            command=self.command,
            config=json.loads(json.dumps(config, default=_json_default)),
            seed=self.options.get("seed"),
            inputs=inputs,
            outputs={path.name: sha256_file(path) for path in self.outputs},
            tool_version=__version__,
            duration_seconds=time.perf_counter() - self.started,
            created_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        )
        path = self.path(MANIFEST_FILE)
        path.write_text(manifest.model_dump_json(indent=2) + "\n")
        return path


def _json_default(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def _done(recorder: RunRecorder) -> None:
    manifest = recorder.write_manifest()
    print(f"{Fore.GREEN}✓ {recorder.command}: {len(recorder.outputs)} file(s) written to {recorder.output_dir}"
          f"{Style.RESET_ALL}")
    logger.info(f"Manifest {manifest}")


# ----------------------------------------------------------------------------
# Subcommands
# ----------------------------------------------------------------------------

def cmd_simulate(options: Dict[str, Any]) -> int:
    recorder = RunRecorder("simulate", options)
    fields = {
        "kind": options["kind"], "seed": options["seed"], "p": options["p"],
        "reference_channel": options["ref_channel"], "reference_lag": options["ref_lag"],
    }
    for key in ("n_subjects", "group_sizes", "n_channels", "n_time", "burn_in", "noise_sd", "random_effect_sd",
                "threshold", "coefficients", "coefficients_high", "bound", "max_redraws"):
        if options.get(key) is not None:
            fields[key] = options[key]
    spec = GeneratorSpec(**fields)
    knots = options.get("knots")
    values = options.get("values")
    result = simulate(spec, None if knots is None else np.asarray(knots, dtype=float),
                      None if values is None else np.asarray(values, dtype=float), threads=options["threads"])

    panel_path = recorder.path(PANEL_FILE)
    write_panel(result.panel, panel_path)
    recorder.added([panel_path])

    config = ModelConfig(p=spec.p, reference=ReferenceSpec.from_channel(spec.reference_channel, spec.reference_lag),
                         bandwidth=1.0, grid_size=options.get("grid_size") or DEFAULTS["grid_size"])
    grid = build_grid(result.panel, config)
    means, subjects = result.true_curves(grid.points)
    recorder.json(SIMULATION_FILE, {
        "generator": spec.model_dump(mode="json"),
        "grid": {"edges": grid.edges, "points": grid.points},
        "regressors": [{"source": source, "lag": lag} for source, lag in regressor_labels(spec.n_channels, spec.p)],
        "true_mean": means,
        "true_subject": {subject: curve for subject, curve in zip(result.panel.subject_ids, subjects)},
        "subject_effects": {subject: effects for subject, effects in zip(result.panel.subject_ids, result.effects)},
    })
    print(f"  {spec.kind.value}: N={result.panel.n_subjects}, k={result.panel.n_channels}, T={result.panel.n_time}")
    _done(recorder)
    return 0


def cmd_validate(options: Dict[str, Any]) -> int:
    _require(options, "input")
    report = validate_panel(options["input"])
    if report.ok:
        print(f"{Fore.GREEN}✓ {report.summary()}{Style.RESET_ALL}")
        return 0
    print(f"{Fore.RED}✗ {report.summary()}{Style.RESET_ALL}")
    for violation in report.violations:
        print(f"  - {violation}")
    return DataError.exit_code


def cmd_select(options: Dict[str, Any]) -> int:
    panel = read_panel(options)
    recorder = RunRecorder("select", options)
    base = model_config(options, panel)
    if options.get("h_grid") is None:
        options["h_grid"] = [base.bandwidth * factor for factor in (0.5, 0.75, 1.0, 1.5, 2.0)]
    if options.get("exogenous"):
        references = [ReferenceSpec.exogenous(lag) for lag in options["ref_lags"]]
    else:
        if options.get("ref_channels") is None:
            options["ref_channels"] = list(range(1, panel.n_channels + 1))
        references = [ReferenceSpec.from_channel(channel, lag)
                      for channel in options["ref_channels"] for lag in options["ref_lags"]]

    report = select_model(panel, base, options["h_grid"], options["p_grid"], references,
                          r=options.get("horizon"), n_subseries=options["subseries"], threads=options["threads"])
    recorder.frame(APE_FILE, report.to_frame())

    best = report.best_config
    selected = {"p": best.p, "bandwidth": best.bandwidth, "kernel": best.kernel.value, "grid_size": best.grid_size,
                "lambda": best.penalty_scale, "ref_lag": best.reference.lag}
    if best.reference.channel is not None:
        selected["ref_channel"] = best.reference.channel
    recorder.text(SELECTED_CONFIG_FILE, yaml.safe_dump(selected, sort_keys=True))

    print(f"  best: h={best.bandwidth:.4g}, p={best.p}, reference {best.reference.label()}, "
          f"APE={report.ape[report.best]:.6g}")
    if report.failures:
        print(f"{Fore.YELLOW}  {len(report.failures)} candidate(s) failed; see log{Style.RESET_ALL}")
    _done(recorder)
    return 0


def _independent_frame(grid, table: np.ndarray, subject_ids: Sequence[str], n_channels: int, p: int) -> pd.DataFrame:
    labels = regressor_labels(n_channels, p)
    records = [(subject, j + 1, source, lag, float(u0), table[n, m, j, r])
               for n, subject in enumerate(subject_ids) for j in range(n_channels)
               for r, (source, lag) in enumerate(labels) for m, u0 in enumerate(grid.points)]
    return pd.DataFrame.from_records(
        records, columns=["subject_id", "channel", "target_lag_channel", "lag", "u0", "coefficient"])


def cmd_fit(options: Dict[str, Any]) -> int:
    panel = read_panel(options)
    recorder = RunRecorder("fit", options)
    config = model_config(options, panel)
    grid = fit_mxfar(panel, config, threads=options["threads"])
    recorder.added(write_coefficient_grid(grid, recorder.output_dir, recorder.float_format))
    if options.get("independent"):
        _, table = fit_independent(panel, config, grid=grid.grid, threads=options["threads"])
        recorder.frame(INDEPENDENT_FILE, _independent_frame(grid.grid, table, panel.subject_ids,
                                                            panel.n_channels, config.p))
    print(f"  {grid.size} grid points, {len(grid.gaps)} gap(s), pooled noise variance "
          f"{float(np.nanmean(grid.sigma2_eps())):.6g}")
    _done(recorder)
    return 0


def cmd_test(options: Dict[str, Any]) -> int:
    panel = read_panel(options)
    recorder = RunRecorder("test", options)
    config = model_config(options, panel)
    result = nonlinearity_test(panel, config, options["boot_reps"], seed=options["seed"],
                               threads=options["threads"], pooling=options["pooling"])
    recorder.frame(L_BOOT_FILE, result.to_frame())
    recorder.json(TEST_FILE, {
        "L": result.statistic, "rss0": result.rss0, "rss1": result.rss1, "B": result.n_replicates,
        "p_value": result.p_value, "dropped": result.dropped,
    })
    color = Fore.YELLOW if result.p_value < 0.05 else Fore.CYAN
    print(f"{color}  L={result.statistic:.6g}  B={result.n_replicates}  p_value={result.p_value:.4g}{Style.RESET_ALL}")
    _done(recorder)
    return 0


def cmd_bands(options: Dict[str, Any]) -> int:
    panel = read_panel(options)
    recorder = RunRecorder("bands", options)
    config = model_config(options, panel)
    band = coefficient_bands(panel, config, options["boot_reps"], level=1 - options["alpha"], seed=options["seed"],
                             threads=options["threads"], pooling=options["pooling"])
    recorder.frame(BANDS_FILE, band.to_frame())
    print(f"  {band.level:.0%} bands from {band.n_replicates} replicate(s), {len(band.dropped)} dropped")
    _done(recorder)
    return 0


def cmd_fpdc(options: Dict[str, Any]) -> int:
    panel = read_panel(options)
    recorder = RunRecorder("fpdc", options)
    config = model_config(options, panel)
    omegas = omega_grid(options["omega_points"])
    fitted = fit_mxfar(panel, config, threads=options["threads"])

    significance = edge_significance(panel, config, options["boot_reps"], options["alpha"], omegas=omegas,
                                     seed=options["seed"], threads=options["threads"], pooling=options["pooling"],
                                     fitted=fitted)
    recorder.frame(FPDC_FILE, significance.to_frame())
    surfaces = [mean_fpdc(fitted, group, omegas).to_frame() for group in range(fitted.n_groups)]
    recorder.frame(FPDC_SURFACE_FILE, pd.concat(surfaces, ignore_index=True))
    if options.get("per_subject"):
        subjects = [subject_fpdc(fitted, n, omegas).to_frame() for n in range(fitted.n_subjects)]
        recorder.frame(FPDC_SUBJECTS_FILE, pd.concat(subjects, ignore_index=True))

    flags = significance.significant
    for group in range(flags.shape[0]):
        for s, label in enumerate(significance.labels):
            edges = [f"{source + 1}->{target + 1}" for target, source in zip(*np.nonzero(flags[group, s]))]
            print(f"  group {group}, {label} (u0={significance.u0[s]:.4g}): {', '.join(edges) or 'no significant edges'}")
    _done(recorder)
    return 0


def _window_seed(seed: int, window: int) -> int:
    return int(np.random.SeedSequence([seed, window]).generate_state(1)[0])


def cmd_network(options: Dict[str, Any]) -> int:
    panel = read_panel(options)
    _require(options, "window_len")
    recorder = RunRecorder("network", options)
    config = model_config(options, panel)
    omegas = omega_grid(options["omega_points"])
    regimes = amplitude_regimes(panel, config)
    windows = split_windows(panel, options["window_len"])

    flags = []
    for w, window in enumerate(windows):
        logger.info(f"Window {w + 1}/{len(windows)}")
        significance = edge_significance(window, config, options["boot_reps"], options["alpha"], omegas=omegas,
                                         u0=regimes, seed=_window_seed(options["seed"], w),
                                         threads=options["threads"], pooling=options["pooling"])
        flags.append(significance.significant)
    summary = network_summary(flags, list(regimes))
    recorder.frame(NETWORK_FILE, summary.to_frame())
    recorder.text(NETWORK_DOT_FILE, summary.to_dot())
    print(f"  {summary.n_windows} window(s) of length {options['window_len']}, "
          f"regimes {', '.join(f'{name}={value:.4g}' for name, value in regimes.items())}")
    _done(recorder)
    return 0


# ----------------------------------------------------------------------------
# Entry point
# ----------------------------------------------------------------------------

def _report_error(error: MxfarError) -> None:
    print(f"{Fore.RED}[{error.category}] {error}{Style.RESET_ALL}", file=sys.stderr)
    for violation in getattr(error, "violations", []):
        print(f"  - {violation}", file=sys.stderr)


def run(argv: Optional[Sequence[str]] = None) -> int:
    """
    Execute one subcommand.

    Returns:
        0 on success, the error's exit code for domain errors, 2 for usage
        errors and 1 for anything unexpected
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    configure_logging("INFO" if args.verbose else None)
    try:
        options = resolve_options(args)
        return args.handler(options)
    except ValidationError as e:
        _report_error(ConfigurationError(f"invalid configuration: {e}"))
        return ConfigurationError.exit_code
    except MxfarError as e:
        _report_error(e)
        return e.exit_code
    except OSError as e:
        _report_error(DataError(f"{e.filename or ''}: {e.strerror or e}"))
        return DataError.exit_code
    except Exception as e:
        logger.debug("Unexpected failure", exc_info=True)
        print(f"{Fore.RED}Unexpected error: {e}{Style.RESET_ALL}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
