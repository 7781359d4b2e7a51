#!/usr/bin/env python3
"""
MX-FAR Acceptance Studies
=========================
Monte-Carlo and oracle checks of the estimator, selection, bootstrap
inference, fPDC and the command-line pipeline. Too slow for the unit suite;
run before a release.

Usage:
    python scripts/run-acceptance.py [--only 1,5,7] [--scale 0.2] [--threads N]

Exit Codes:
    0 - Every selected criterion passed
    1 - At least one criterion failed
    2 - A study could not be run (unexpected error)
"""

import sys
import argparse
import math
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np
from colorama import Fore, Style, init

from mxfar.cli import run as run_cli
from mxfar.config import configure_logging
from mxfar.core import rule_of_thumb_bandwidth
from mxfar.estimator import build_local_design, fit_independent, fit_mxfar, solve_henderson_block
from mxfar.inference import nonlinearity_test
from mxfar.models import GeneratorSpec, ModelConfig, ReferenceSpec
from mxfar.selection import select_model
from mxfar.simulator import simulate
from mxfar.spectral import edge_significance, mean_fpdc, omega_grid


def print_header(msg: str):
    print(f"\n{Fore.CYAN}{'='*60}{Style.RESET_ALL}")
    print(f"{Fore.CYAN}{msg}{Style.RESET_ALL}")
    print(f"{Fore.CYAN}{'='*60}{Style.RESET_ALL}")


def print_success(msg: str):
    print(f"{Fore.GREEN}✓{Style.RESET_ALL} {msg}")


def print_error(msg: str):
    print(f"{Fore.RED}✗{Style.RESET_ALL} {msg}")


def print_info(msg: str):
    print(f"  {msg}")


@dataclass
class Outcome:
    passed: bool
    details: List[str]


@dataclass
class Study:
    threads: int
    scale: float
    seed: int

    def reps(self, full: int, minimum: int = 2) -> int:
        return max(minimum, int(round(full * self.scale)))


EXPAR_REFERENCE = ReferenceSpec.from_channel(2, 2)


def expar_config(panel, p: int = 1, reference: ReferenceSpec = EXPAR_REFERENCE) -> ModelConfig:
    bandwidth = rule_of_thumb_bandwidth(panel, reference, start=max(p, reference.lag))
    return ModelConfig(p=p, reference=reference, bandwidth=bandwidth)


def central(size: int) -> slice:
    return slice(int(math.floor(0.1 * size)), int(math.ceil(0.9 * size)))


# ----------------------------------------------------------------------------
# Criteria
# ----------------------------------------------------------------------------

def dense_henderson(X, Z, weights, response, ginv_full, ridge):
    A = np.hstack([X, Z])
    penalty = np.concatenate([np.zeros(X.shape[1]), ginv_full])
    system = A.T @ (A * weights[:, None]) + np.diag(penalty) + ridge * np.eye(A.shape[1])
    return np.linalg.solve(system, A.T @ (weights * response))


def henderson_oracle(study: Study) -> Outcome:
    rng = np.random.default_rng([study.seed, 1])
    worst = 0.0
    for instance in range(20):
        n_subjects, k, p = int(rng.integers(2, 7)), int(rng.integers(1, 4)), int(rng.integers(1, 3))
        spec = GeneratorSpec(kind="var", n_subjects=n_subjects, n_channels=k, p=p, n_time=100, burn_in=50,
                             reference_channel=1, reference_lag=1, random_effect_sd=0.02,
                             seed=int(rng.integers(1 << 30)))
        panel = simulate(spec).panel
        config = ModelConfig(p=p, reference=ReferenceSpec.from_channel(1, 1), bandwidth=1.5)
        design = build_local_design(panel, config, int(rng.integers(k)), float(rng.normal(0, 0.5)))
        ginv = rng.uniform(0.1, 2.0, size=design.n_local)
        solution = solve_henderson_block(design.X, design.Z_blocks, design.weights, design.response, ginv,
                                         row_slices=design.row_slices, ridge=config.ridge, group_of=design.group_of)
        dense = dense_henderson(design.X, design.Z_dense(), design.weights, design.response,
                                np.tile(ginv, n_subjects), 0.0)
        block = np.concatenate([solution.theta, solution.gamma.reshape(-1)])
        worst = max(worst, float(np.max(np.abs(block - dense))))
    return Outcome(worst < 1e-8, [f"max |block - dense| over 20 instances: {worst:.3g}"])


def expar_recovery(study: Study) -> Outcome:
    reps = study.reps(10)
    errors, wins = [], []
    for rep in range(reps):
        result = simulate(GeneratorSpec(kind="expar", seed=study.seed + rep), threads=study.threads)
        config = expar_config(result.panel)
        grid = fit_mxfar(result.panel, config, threads=study.threads)
        means, subjects = result.true_curves(grid.points)
        errors.append(np.abs(grid.alpha()[:, 0, 0, 1] - means[0, :, 0, 1]))
        _, independent = fit_independent(result.panel, config, grid=grid.grid, threads=study.threads)
        mixed_se = np.nanmean((grid.subject_coefficients() - subjects) ** 2, axis=(0, 2, 3))
        independent_se = np.nanmean((independent - subjects) ** 2, axis=(0, 2, 3))
        wins.append(mixed_se <= independent_se)
    error = np.nanmean(np.stack(errors), axis=0)
    window = central(error.size)
    worst = float(np.nanmax(error[window]))
    share = float(np.mean(np.mean(np.stack(wins), axis=0) >= 0.5))
    return Outcome(worst < 0.15 and share >= 0.6, [
        f"{reps} replicate(s); max mean abs error of f_12 on central grid: {worst:.4f} (< 0.15)",
        f"MX-FAR subject curves at least as accurate as independent fits on {share:.0%} of grid points (>= 60%)",
    ])


def sigmoid_groups(study: Study) -> Outcome:
    reps = study.reps(3, minimum=1)
    passed, details = True, []
    for rep in range(reps):
        result = simulate(GeneratorSpec(kind="sigmoid", seed=study.seed + rep), threads=study.threads)
        config = expar_config(result.panel)
        grid = fit_mxfar(result.panel, config, threads=study.threads)
        means, _ = result.true_curves(grid.points)
        first, second = grid.alpha()[:, 0, 0, 0], grid.alpha()[:, 1, 0, 0]
        strong = np.abs(means[0, :, 0, 0]) > 0.3
        opposite = bool(np.all(np.sign(first[strong]) == -np.sign(second[strong])))
        window = central(grid.size)
        difference = float(np.nanmean(np.abs(first[window] + second[window])))
        passed &= opposite and difference < 0.2
        details.append(f"replicate {rep}: opposite signs where |f| > 0.3: {opposite}; "
                       f"mean |g1 + g2| on central grid {difference:.4f} (< 0.2)")
    return Outcome(passed, details)


def test_calibration(study: Study) -> Outcome:
    datasets = study.reps(100, minimum=5)
    n_boot = 200 if study.scale >= 1 else max(50, int(200 * study.scale))

    def rejection_rate(kind: str, offset: int) -> float:
        rejections = 0
        for d in range(datasets):
            spec = GeneratorSpec(kind=kind, n_subjects=8, n_time=300, seed=study.seed + offset + d,
                                 random_effect_sd=0.05 if kind == "var" else None)
            panel = simulate(spec, threads=study.threads).panel
            result = nonlinearity_test(panel, expar_config(panel), n_boot, seed=study.seed + d,
                                       threads=study.threads)
            rejections += result.p_value < 0.05
        return rejections / datasets

    size = rejection_rate("var", 10_000)
    power = rejection_rate("expar", 20_000)
    return Outcome(0.01 <= size <= 0.12 and power >= 0.8, [
        f"{datasets} dataset(s) per arm, B={n_boot}",
        f"size {size:.3f} (in [0.01, 0.12]); power {power:.3f} (>= 0.8)",
    ])


def direct_pdc(lag_matrices: np.ndarray, omegas: np.ndarray) -> np.ndarray:
    """Textbook PDC |A_ij| / sqrt(sum_m |A_mj|^2), shape (W, k, k)"""
    k = lag_matrices.shape[1]
    out = []
    for omega in omegas:
        transfer = np.eye(k, dtype=complex)
        for lag, matrix in enumerate(lag_matrices, start=1):
            transfer -= matrix * np.exp(-2j * np.pi * omega * lag)
        out.append(np.abs(transfer) / np.sqrt(np.sum(np.abs(transfer) ** 2, axis=0, keepdims=True)))
    return np.stack(out)


def fpdc_properties(study: Study) -> Outcome:
    matrices = [[[0.5, 0.3], [0.0, 0.4]], [[-0.2, 0.0], [0.25, -0.1]]]
    spec = GeneratorSpec(kind="var", n_subjects=5, n_time=2000, p=2, coefficients=matrices,
                         random_effect_sd=0.0, seed=study.seed)
    panel = simulate(spec, threads=study.threads).panel
    reference = ReferenceSpec.from_channel(2, 2)
    pooled_range = float(np.ptp(panel.values[:, 1, :]))
    config = ModelConfig(p=2, reference=reference, bandwidth=2 * pooled_range, grid_size=10)
    grid = fit_mxfar(panel, config, threads=study.threads)
    omegas = omega_grid()
    surface = mean_fpdc(grid, 0, omegas)
    modulus = surface.modulus[..., ~np.isnan(surface.modulus).any(axis=(0, 1, 2))]
    in_range = bool(np.all((modulus >= 0) & (modulus <= 1 + 1e-12)))
    sums = surface.column_sums()
    sums = sums[~np.isnan(sums)]
    sums_ok = bool(np.max(np.abs(sums - 1.0)) <= 1e-10)
    oracle = direct_pdc(np.asarray(matrices, dtype=float), omegas)          # (W, k, k)
    gap = float(np.max(np.abs(np.transpose(modulus, (3, 2, 0, 1)) - oracle[None])))
    return Outcome(in_range and sums_ok and gap < 0.05, [
        f"modulus in [0, 1]: {in_range}; unit column sums: {sums_ok}",
        f"max |fPDC| deviation from the direct PDC oracle: {gap:.4f} (< 0.05)",
    ])


def ape_selection(study: Study) -> Outcome:
    reps = study.reps(20)
    references = [ReferenceSpec.from_channel(channel, lag) for channel in (1, 2) for lag in (1, 2, 3)]
    hits = 0
    for rep in range(reps):
        panel = simulate(GeneratorSpec(kind="expar", seed=study.seed + 500 + rep), threads=study.threads).panel
        base = expar_config(panel)
        h_grid = [base.bandwidth * factor for factor in (0.75, 1.0, 1.5)]
        best = select_model(panel, base, h_grid, [1, 2], references, threads=study.threads).best_config
        hits += best.p == 1 and best.reference == EXPAR_REFERENCE
    rate = hits / reps
    return Outcome(rate >= 0.6, [f"true (p=1, channel 2, lag 2) selected in {hits}/{reps} = {rate:.0%} (>= 60%)"])


def pipeline_determinism(study: Study) -> Outcome:
    commands = [
        ["simulate", "--kind", "expar", "--n-subjects", "4", "--n-time", "240", "--seed", "7"],
        ["fit", "--independent"],
        ["select", "--h-grid", "0.3,0.6", "--p-grid", "1", "--ref-lags", "1,2"],
        ["test", "--boot-reps", "8", "--seed", "3"],
        ["bands", "--boot-reps", "8", "--seed", "3"],
        ["fpdc", "--boot-reps", "8", "--omega-points", "8", "--per-subject", "--seed", "3"],
        ["network", "--boot-reps", "8", "--omega-points", "8", "--window-len", "120", "--seed", "3"],
    ]
    details, passed = [], True
    with tempfile.TemporaryDirectory() as root:
        runs = []
        for label, threads in (("a", 1), ("b", 1), ("c", 3)):
            base = Path(root) / label
            for command in commands:
                out = base / command[0]
                extra = ["--output-dir", str(out), "--threads", str(threads)]
                if command[0] != "simulate":
                    extra += ["--input", str(base / "simulate" / "panel.csv")]
                status = run_cli(command + extra)
                if status != 0:
                    return Outcome(False, [f"run {label}: '{command[0]}' exited with status {status}"])
            runs.append(base)
        for command in commands:
            reference = runs[0] / command[0]
            for other in runs[1:]:
                for path in sorted(reference.iterdir()):
                    if path.name == "manifest.json":
                        continue
                    if path.read_bytes() != (other / command[0] / path.name).read_bytes():
                        passed = False
                        details.append(f"{command[0]}/{path.name} differs in run {other.name}")
    details.append(f"{len(commands)} subcommands compared across 3 runs (threads 1, 1, 3)")
    return Outcome(passed, details)


def edge_false_positives(study: Study) -> Outcome:
    runs = study.reps(50, minimum=5)
    n_boot = 50
    matrices = [[[0.5, 0.0], [0.3, 0.4]]]                                  # no 2 -> 1 link
    flagged = 0
    for run in range(runs):
        spec = GeneratorSpec(kind="var", n_subjects=8, n_time=300, coefficients=matrices, seed=study.seed + 900 + run)
        panel = simulate(spec, threads=study.threads).panel
        result = edge_significance(panel, expar_config(panel), n_boot, 0.05, omegas=omega_grid(16),
                                   seed=study.seed + run, threads=study.threads)
        flagged += bool(np.any(result.significant[:, :, 0, 1]))
    rate = flagged / runs
    return Outcome(rate <= 0.12, [f"zero link 2->1 flagged in {flagged}/{runs} = {rate:.2f} (<= 0.12), B={n_boot}"])


CRITERIA: Dict[int, tuple] = {
    1: ("Henderson block solve matches the dense joint solve", henderson_oracle),
    2: ("EXPAR mean and subject curve recovery", expar_recovery),
    3: ("Two-group sigmoid design", sigmoid_groups),
    4: ("Nonlinearity test size and power", test_calibration),
    5: ("fPDC normalization and direct PDC oracle", fpdc_properties),
    6: ("APE selects the true order and reference", ape_selection),
    7: ("Byte-identical pipeline outputs", pipeline_determinism),
    8: ("Edge significance false-positive control", edge_false_positives),
}


def run_studies(selected: List[int], study: Study) -> bool:
    print_header("MX-FAR Acceptance Studies")
    print_info(f"Criteria: {', '.join(map(str, selected))}; scale {study.scale:g}; threads {study.threads}")
    failed = []
    for number in selected:
        title, check = CRITERIA[number]
        print(f"\n{Fore.BLUE}{number}. {title}{Style.RESET_ALL}")
        started = time.perf_counter()
        outcome: Outcome = check(study)
        elapsed = time.perf_counter() - started
        for line in outcome.details:
            print_info(line)
        if outcome.passed:
            print_success(f"passed in {elapsed:.1f}s")
        else:
            print_error(f"failed after {elapsed:.1f}s")
            failed.append(number)

    if failed:
        print_header("Action Required")
        print_error(f"Failed criteria: {', '.join(map(str, failed))}")
        return False
    print_header("Success")
    print_success("All selected criteria passed!")
    return True


def main():
    parser = argparse.ArgumentParser(
        description='Run MX-FAR acceptance studies',
        formatter_class=argparse.RawDescriptionHelpFormatter
    )
    parser.add_argument(
        '--only',
        default=','.join(map(str, CRITERIA)),
        help='Comma-separated criterion numbers (default: all)'
    )
    parser.add_argument(
        '--scale',
        type=float,
        default=1.0,
        help='Fraction of the Monte-Carlo replicates to run (default: 1.0)'
    )
    parser.add_argument('--threads', type=int, default=1, help='Worker threads (default: 1)')
    parser.add_argument('--seed', type=int, default=2024, help='Root seed (default: 2024)')
    parser.add_argument('--verbose', '-v', action='store_true', help='Log library progress')

    args = parser.parse_args()
    init(autoreset=True)
    configure_logging("INFO" if args.verbose else "ERROR")

    try:
        selected = sorted({int(item) for item in args.only.split(',') if item.strip()})
        unknown = [number for number in selected if number not in CRITERIA]
        if unknown:
            print_error(f"Unknown criteria: {unknown}")
            sys.exit(2)
        success = run_studies(selected, Study(threads=args.threads, scale=args.scale, seed=args.seed))
    except Exception as e:
        print_error(f"Study failed to run: {e}")
        sys.exit(2)

    # Exit with appropriate code
    sys.exit(0 if success else 1)


if __name__ == "__main__":
    main()
