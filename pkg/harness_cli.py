"""
WFP Mixing-Time Laboratory Pipeline
Command-line front-end tying the rate, steady-state and dynamics modules
together: rates, steady-state, simulate, sgd, compare and sweep
"""

import argparse
import itertools
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import json5
import numpy as np
from tqdm import tqdm

from config import (MODEL_DEFAULTS, SIM_DEFAULTS, INITIAL_DEFAULTS, SGD_DEFAULTS,
                    CONVENTION_DEFAULTS, ANALYSIS_DEFAULTS, OUTPUT_DEFAULTS, SWEEP_DEFAULTS,
                    EXIT_CODES)
from model_core import (LabError, ParameterError, ModelParams, params_summary, q_coefficients,
                        check_lindblad)
from spectral_rates import (evaluate_all_cases, eigenvalues_d1, hessian_matrix,
                            dense_spectrum_oracle, sqrt_d_hessian, mixing_time)
from steady_state import (steady_covariance_lyapunov, quadratic_form_A, closed_form_exponent,
                          reconcile_steady_states, reconcile_across_conventions)
from dynamics import (SimConfig, SgdSpec, DecayCurve, initial_state, simulate_decay,
                      exact_decay_curve, fit_decay_rate, auto_fit_window, noise_floor,
                      sgd_sde_simulate, sgd_stationary, sgd_analogy_map,
                      sgd_discrete_stationary_variance)
from result_writer import (ResultWriter, format_rates_report, format_decay_report,
                           format_compare_report)


SECTION_DEFAULTS = {
    'model': MODEL_DEFAULTS,
    'sim': SIM_DEFAULTS,
    'initial': INITIAL_DEFAULTS,
    'sgd': SGD_DEFAULTS,
    'conventions': CONVENTION_DEFAULTS,
    'analysis': ANALYSIS_DEFAULTS,
    'output': OUTPUT_DEFAULTS,
    'sweep': SWEEP_DEFAULTS,
}

# Sections whose keys may be swept
SWEEPABLE = ('model', 'conventions', 'sim', 'initial', 'sgd', 'analysis')

COMMANDS = ('rates', 'steady-state', 'simulate', 'sgd', 'compare', 'sweep')


class ConfigError(LabError):
    """Malformed configuration file, override or sweep specification"""


# Section keys read as plain floats outside ModelParams/SimConfig
NUMERIC_FIELDS = {
    'initial': ('mean_x', 'mean_p', 'cov_scale'),
    'sgd': ('s', 'hessian_scale', 'x0'),
    'analysis': ('prefactor_C', 'epsilon', 'fit_floor_factor'),
}


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    """Validated run configuration plus the raw section dicts it was built from"""
    model: ModelParams
    sim: SimConfig
    initial: dict
    sgd: dict
    analysis: dict
    output: dict
    sweep: dict
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict) -> 'RunConfig':
        """
        Merge sections over the defaults and validate them

        Raises:
            ConfigError: unknown section or key, bad value
        """
        if not isinstance(raw, dict):
            raise ConfigError("configuration must be a JSON object")
        merged = {}
        for section, value in raw.items():
            if section not in SECTION_DEFAULTS:
                raise ConfigError(f"unknown configuration section '{section}'")
            if not isinstance(value, dict):
                raise ConfigError(f"section '{section}' must be an object")
            if section != 'sweep':
                unknown = set(value) - set(SECTION_DEFAULTS[section])
                if unknown:
                    raise ConfigError(f"unknown keys in '{section}': {sorted(unknown)}")
        for section, defaults in SECTION_DEFAULTS.items():
            merged[section] = {**defaults, **raw.get(section, {})}

        try:
            model = ModelParams.from_dict(merged['model'], merged['conventions'])
            sim = SimConfig.from_dict(merged['sim'])
        except (ParameterError, TypeError, ValueError) as err:
            raise ConfigError(str(err)) from err

        for section, keys in NUMERIC_FIELDS.items():
            for key in keys:
                merged[section][key] = _as_number(merged[section][key], f"{section}.{key}")

        if merged['initial']['cov'] not in ('steady', 'zero', 'identity'):
            raise ConfigError(f"initial.cov must be steady, zero or identity, "
                              f"got {merged['initial']['cov']!r}")
        if str(merged['output']['format']).lower() not in ('csv', 'json'):
            raise ConfigError(f"output.format must be csv or json, got {merged['output']['format']!r}")
        window = merged['analysis']['fit_window']
        if window is not None and (not isinstance(window, (list, tuple)) or len(window) != 2):
            raise ConfigError("analysis.fit_window must be [t_lo, t_hi] or null")
        if window is not None:
            merged['analysis']['fit_window'] = [_as_number(t, 'analysis.fit_window') for t in window]

        return cls(model=model, sim=sim, initial=merged['initial'], sgd=merged['sgd'],
                   analysis=merged['analysis'], output=merged['output'],
                   sweep=merged['sweep'], raw=merged)

    def sgd_spec(self) -> SgdSpec:
        try:
            return SgdSpec(s=float(self.sgd['s']), hessian_scale=float(self.sgd['hessian_scale']),
                           d=self.model.d)
        except (ParameterError, TypeError, ValueError) as err:
            raise ConfigError(str(err)) from err


def _as_number(value, name: str) -> float:
    """Finite real from a config value; bools and strings are rejected"""
    if isinstance(value, bool) or not isinstance(value, (int, float, np.integer, np.floating)):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    if not np.isfinite(value):
        raise ConfigError(f"{name} must be finite, got {value!r}")
    return float(value)


def parse_overrides(tokens: List[str]) -> List[Tuple[List[str], object]]:
    """
    Parse '--section.key=value' tokens; values are JSON5 (bare words stay strings)

    Raises:
        ConfigError: on any token of another shape
    """
    overrides = []
    for token in tokens:
        if not token.startswith('--') or '=' not in token:
            raise ConfigError(f"unrecognised argument '{token}' (expected --section.key=value)")
        path, text = token[2:].split('=', 1)
        keys = path.split('.')
        if len(keys) < 2 or not all(keys):
            raise ConfigError(f"override '{token}' must name section.key")
        try:
            value = json5.loads(text)
        except ValueError:
            value = text
        overrides.append((keys, value))
    return overrides


def apply_override(raw: dict, keys: List[str], value) -> None:
    """Set one override in the raw config; sweep axes keep their dotted names"""
    section = raw.setdefault(keys[0], {})
    if keys[0] == 'sweep':
        if keys[1] in ('enforce', 'fit', 'axes') and len(keys) == 2:
            section[keys[1]] = value
            return
        axis = '.'.join(keys[2:] if keys[1] == 'axes' else keys[1:])
        section.setdefault('axes', {})[axis] = value
        return
    if len(keys) != 2:
        raise ConfigError(f"override path '{'.'.join(keys)}' is too deep")
    section[keys[1]] = value


def load_config(path: Optional[str] = None,
                overrides: Optional[List[Tuple[List[str], object]]] = None) -> RunConfig:
    """
    Read a JSON/JSON5 config file (optional) and apply overrides

    Raises:
        ConfigError: unreadable file, parse error or invalid contents
    """
    raw = {}
    if path:
        try:
            with open(path, 'r', encoding='utf-8') as f:
                raw = json5.load(f)
        except OSError as err:
            raise ConfigError(f"cannot read config '{path}': {err}") from err
        except ValueError as err:
            raise ConfigError(f"cannot parse config '{path}': {err}") from err
        if not isinstance(raw, dict):
            raise ConfigError("configuration must be a JSON object")
    for keys, value in overrides or []:
        apply_override(raw, keys, value)
    return RunConfig.from_dict(raw)


def expand_sweep(sweep: dict) -> List[Dict[str, object]]:
    """
    Cartesian product of the sweep axes, in grid order

    Axis names are 'section.key' (a bare key means model.key).

    Raises:
        ConfigError: no axes, an empty or non-list axis, or an unknown name
    """
    axes = sweep.get('axes') or {}
    if not axes:
        raise ConfigError("sweep needs at least one axis")
    names, values = [], []
    for name, axis in axes.items():
        full = name if '.' in name else f"model.{name}"
        section, key = full.split('.', 1)
        if section not in SWEEPABLE or key not in SECTION_DEFAULTS[section]:
            raise ConfigError(f"unknown sweep axis '{name}'")
        if not isinstance(axis, list) or not axis:
            raise ConfigError(f"sweep axis '{name}' must be a non-empty list")
        names.append(full)
        values.append(axis)
    if sweep.get('enforce') not in (None, 'equal_q'):
        raise ConfigError(f"sweep.enforce must be null or 'equal_q', got {sweep['enforce']!r}")
    if sweep.get('fit', 'none') not in ('none', 'exact', 'monte_carlo'):
        raise ConfigError(f"sweep.fit must be none, exact or monte_carlo, got {sweep['fit']!r}")
    return [dict(zip(names, combo)) for combo in itertools.product(*values)]


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------

class WfpLabPipeline:
    """
    Runs one subcommand end to end: compute, write tables/summary, print report
    """

    def __init__(self, config: RunConfig, quiet: bool = False):
        """
        Initialize pipeline

        Args:
            config: Validated run configuration
            quiet: Suppress console output
        """
        self.config = config
        self.quiet = quiet
        self.writer = ResultWriter(config.output['path'], str(config.output['format']))

    def _say(self, message: str = "") -> None:
        if not self.quiet:
            print(message)

    def _banner(self, title: str) -> None:
        self._say(f"\n{'='*60}")
        self._say(title)
        self._say(f"{'='*60}\n")

    def _base_summary(self, command: str) -> dict:
        return {
            'command': command,
            'params': self.config.model.to_dict(),
            'conventions': self.config.model.conventions_dict(),
        }

    # -- rates --------------------------------------------------------------

    @staticmethod
    def rate_rows(params: ModelParams) -> List[dict]:
        """
        One row per closed-form case, with the dense spectrum for audit

        Inapplicable cases carry skip_reason instead of values.
        """
        dense_kappa = dense_plus = sqrt_d_kappa = None
        dense = None
        try:
            dense = dense_spectrum_oracle(hessian_matrix(params))
            dense_kappa, dense_plus = dense[0], dense[-1]
            sqrt_d_kappa = dense_spectrum_oracle(sqrt_d_hessian(params))[0]
        except LabError:
            pass

        rows = []
        for tag, result, reason in evaluate_all_cases(params):
            row = {**params_summary(params), 'case': tag.value}
            if result is None:
                row.update({'lambda_plus': None, 'lambda_minus': None, 'kappa': None,
                            'spectrum_preserving': None, 'approximate': None,
                            'dense_check': None, 'skip_reason': reason})
            else:
                row.update(result.to_row())
                check = None
                if result.spectrum_preserving and dense is not None:
                    expected = sorted([result.lambda_minus] * params.d
                                      + [result.lambda_plus] * params.d)
                    check = float(np.max(np.abs(np.array(expected) - np.array(dense))))
                row.update({'dense_check': check, 'skip_reason': None})
            row.update({'dense_kappa': dense_kappa, 'dense_lambda_plus': dense_plus,
                        'sqrt_d_kappa': sqrt_d_kappa})
            rows.append(row)
        return rows

    def run_rates(self) -> dict:
        self._banner("Closed-form decay rates")
        params = self.config.model

        self._say("Step 1: Evaluating closed-form cases...")
        start = time.time()
        rows = self.rate_rows(params)
        applied = sum(1 for r in rows if r['skip_reason'] is None)
        self._say(f"✓ {applied}/{len(rows)} cases applicable in {time.time() - start:.2f}s")

        self._say("\nStep 2: Writing rate table...")
        path = self.writer.write_table(rows, 'rates')
        self._say(f"✓ Rates saved to: {path}")

        self._say(format_rates_report(rows))
        return {'rows': rows, 'files': [path]}

    # -- steady state -------------------------------------------------------

    def run_steady_state(self) -> dict:
        self._banner("Steady-state analysis")
        params = self.config.model
        summary = self._base_summary('steady-state')
        files = []

        self._say("Step 1: Solving the stationary Lyapunov equation...")
        state = steady_covariance_lyapunov(params)
        cxx, cxp, cpp = state.block_form
        summary['lyapunov'] = {'cxx': cxx, 'cxp': cxp, 'cpp': cpp}
        self._say(f"✓ cxx = {cxx:.6g}, cxp = {cxp:.6g}, cpp = {cpp:.6g}")

        self._say("\nStep 2: Exponent coefficients...")
        try:
            c = q_coefficients(params)
            summary['exponent'] = {'q11': c.q11, 'q12': c.q12, 'q22': c.q22, 'q': c.q,
                                   'S_block': closed_form_exponent(params.with_changes(d=1)).S,
                                   'A_at_unit_x': quadratic_form_A(
                                       params, np.r_[np.ones(params.d), np.zeros(params.d)])}
            self._say(f"✓ Q11 = {c.q11:.6g}, Q12 = {c.q12:.6g}, Q22 = {c.q22:.6g}, Q = {c.q:.6g}")
        except LabError as err:
            summary['exponent'] = {'error': type(err).__name__, 'message': str(err)}
            self._say(f"⚠ Exponent unavailable: {type(err).__name__}")

        self._say("\nStep 3: Reconciling exp(-A) with the Lyapunov law...")
        try:
            report = reconcile_steady_states(params.with_changes(d=1))
            summary['reconciliation'] = report.to_dict()
            self._say(f"✓ Sigma_A Sigma_L^-1 ~ {report.scalar:.6g} I "
                      f"(deviation {report.deviation_from_scalar:.3g})")
        except LabError as err:
            summary['reconciliation'] = {'error': type(err).__name__, 'message': str(err)}
            self._say(f"⚠ Reconciliation unavailable: {type(err).__name__}")

        rows = reconcile_across_conventions(params)
        files.append(self.writer.write_table(rows, 'conventions'))
        summary['conventions_table'] = rows
        files.append(self.writer.write_summary(summary, 'steady_state'))
        for path in files:
            self._say(f"✓ Saved: {path}")
        summary['files'] = files
        return summary

    # -- simulation ---------------------------------------------------------

    def _fit(self, curve: DecayCurve, n_particles: int, target) -> dict:
        """Fit a curve with the configured window (or the automatic one)"""
        analysis = self.config.analysis
        try:
            window = analysis['fit_window']
            if window is None:
                floor = noise_floor(curve.metric, n_particles, target)
                window = auto_fit_window(curve, floor, analysis['fit_floor_factor'])
            fit = fit_decay_rate(curve, tuple(window))
        except LabError as err:
            return {'error': type(err).__name__, 'message': str(err)}
        return {'rate': fit.rate, 'stderr': fit.stderr, 'window': list(fit.window),
                'n_samples': fit.n_samples}

    def _mixing(self, kappa: Optional[float]) -> dict:
        analysis = self.config.analysis
        try:
            est = mixing_time(kappa, float(analysis['prefactor_C']), float(analysis['epsilon']))
        except (LabError, TypeError) as err:
            return {'t_mix': None, 'error': type(err).__name__}
        return {'t_mix': est.t_mix, 'prefactor_C': est.prefactor_C, 'epsilon': est.epsilon}

    def _simulate_quantum(self, name: str = 'curve') -> Tuple[DecayCurve, dict, str]:
        params, sim = self.config.model, self.config.sim
        init = initial_state(params, **self.config.initial)
        curve = simulate_decay(params, sim, init)
        path = self.writer.write_table(curve.to_frame(), name)
        fit = self._fit(curve, sim.n_particles, steady_covariance_lyapunov(params))
        return curve, fit, path

    def run_simulate(self) -> dict:
        self._banner("Quantum Langevin decay simulation")
        params, sim = self.config.model, self.config.sim
        summary = self._base_summary('simulate')
        summary.update({'sim': sim.to_dict(), 'initial': self.config.initial})

        self._say(f"Step 1: Simulating {sim.n_particles} particles for {sim.n_steps} steps...")
        start = time.time()
        curve, fit, path = self._simulate_quantum()
        self._say(f"✓ {len(curve.samples)} samples recorded in {time.time() - start:.2f}s")

        self._say("\nStep 2: Fitting decay rate...")
        try:
            kappa = eigenvalues_d1(params).kappa
        except LabError:
            kappa = None
        summary.update({'fit': fit, 'analytic_kappa': kappa, 'mixing': self._mixing(kappa)})
        if 'error' in fit:
            self._say(f"⚠ Fit failed: {fit['error']}")
        else:
            self._say(f"✓ Fitted rate {fit['rate']:.6g} ± {fit['stderr']:.2g}")

        summary['files'] = [path, self.writer.path_for('summary', 'json')]
        self.writer.write_summary(summary)
        self._say(format_decay_report(summary))
        return summary

    def run_sgd(self) -> dict:
        self._banner("Classical SGD diffusion")
        spec, sim = self.config.sgd_spec(), self.config.sim
        summary = {'command': 'sgd', 'sgd': spec.to_dict(), 'sim': sim.to_dict(), 'notes': []}

        self._say(f"Step 1: Simulating SGD diffusion (s = {spec.s:g})...")
        start = time.time()
        curve, ens = sgd_sde_simulate(spec, sim, x0=float(self.config.sgd['x0']))
        path = self.writer.write_table(curve.to_frame(), 'curve')
        self._say(f"✓ {len(curve.samples)} samples recorded in {time.time() - start:.2f}s")

        self._say("\nStep 2: Comparing with the stationary law...")
        target = sgd_stationary(spec)
        summary['stationary_variance'] = float(target.cov[0, 0])
        summary['empirical_variance'] = float(np.mean(np.var(ens.particles, axis=0, ddof=1))) \
            if ens.n > 1 else 0.0
        try:
            summary['discrete_stationary_variance'] = sgd_discrete_stationary_variance(spec)
        except LabError as err:
            summary['notes'].append(f"discrete iteration: {err}")
        if spec.degenerate:
            summary['notes'].append("s = 0: degenerate stationary law, distance is |mean|")
        summary['fit'] = self._fit(curve, sim.n_particles, target)
        summary['analytic_rate'] = spec.hessian_scale
        self._say(f"✓ Empirical variance {summary['empirical_variance']:.6g} vs "
                  f"{summary['stationary_variance']:.6g}")

        summary['files'] = [path, self.writer.path_for('summary', 'json')]
        self.writer.write_summary(summary)
        self._say(format_decay_report(summary, "SGD DIFFUSION REPORT"))
        return summary

    def run_compare(self) -> dict:
        self._banner("Quantum vs classical comparison")
        params, sim = self.config.model, self.config.sim
        summary = self._base_summary('compare')
        summary['sim'] = sim.to_dict()

        self._say("Step 1: Mapping to classical SGD...")
        analogy = sgd_analogy_map(params)
        summary['analogy'] = analogy.to_dict()
        self._say(f"✓ s = {analogy.spec.s:g}, dominance {analogy.dominance:g} ({analogy.regime})")

        self._say("\nStep 2: Simulating quantum side...")
        files = []
        try:
            _, fit, path = self._simulate_quantum('quantum_curve')
            files.append(path)
            summary['quantum'] = {'fit': fit}
            try:
                summary['quantum']['analytic_kappa'] = eigenvalues_d1(params).kappa
            except LabError:
                summary['quantum']['analytic_kappa'] = None
            self._say("✓ Quantum curve recorded")
        except LabError as err:
            summary['quantum'] = {'skipped': type(err).__name__}
            self._say(f"⚠ Quantum side skipped: {type(err).__name__}")

        self._say("\nStep 3: Simulating classical side...")
        if analogy.degenerate:
            summary['classical'] = {'skipped': "degenerate: Dpp = 0 gives s = 0"}
            self._say("⚠ Classical side skipped (s = 0)")
        else:
            curve, _ = sgd_sde_simulate(analogy.spec, sim, x0=float(self.config.sgd['x0']))
            files.append(self.writer.write_table(curve.to_frame(), 'classical_curve'))
            summary['classical'] = {'fit': self._fit(curve, sim.n_particles,
                                                     sgd_stationary(analogy.spec)),
                                    'analytic_rate': analogy.spec.hessian_scale}
            self._say("✓ Classical curve recorded")

        files.append(self.writer.path_for('summary', 'json'))
        summary['files'] = files
        self.writer.write_summary(summary)
        self._say(format_compare_report(summary))
        return summary

    # -- sweep --------------------------------------------------------------

    def _sweep_cell(self, item: Tuple[int, Dict[str, object]]) -> List[dict]:
        index, assignment = item
        raw = {section: dict(values) for section, values in self.config.raw.items()
               if section != 'sweep'}
        for name, value in assignment.items():
            section, key = name.split('.', 1)
            raw[section][key] = value
        if self.config.sweep.get('enforce') == 'equal_q':
            raw['model']['Dpq'] = -float(raw['model']['gamma']) * float(raw['model']['Dqq'])
        raw['sim']['workers'] = 1

        base = {'cell': index, **assignment}
        try:
            cell = RunConfig.from_dict(raw)
        except ConfigError as err:
            return [{**base, 'error': type(err).__name__, 'message': str(err)}]

        params = cell.model
        margin = check_lindblad(params).margin
        fit = {}
        mode = self.config.sweep.get('fit', 'none')
        if mode != 'none':
            fit = self._sweep_fit(cell, mode)

        rows = []
        for tag, result, reason in evaluate_all_cases(params):
            row = {**base, **params_summary(params), 'case': tag.value,
                   'lindblad_margin': margin}
            if result is None:
                row.update({'kappa': None, 'lambda_plus': None, 'lambda_minus': None,
                            'spectrum_preserving': None, 'error': reason})
            else:
                row.update({'kappa': result.kappa, 'lambda_plus': result.lambda_plus,
                            'lambda_minus': result.lambda_minus,
                            'spectrum_preserving': result.spectrum_preserving, 'error': None})
            row.update(fit)
            rows.append(row)
        return rows

    def _sweep_fit(self, cell: RunConfig, mode: str) -> dict:
        try:
            init = initial_state(cell.model, **cell.initial)
            target = steady_covariance_lyapunov(cell.model)
            if mode == 'exact':
                n = cell.sim.n_steps // cell.sim.record_every
                times = [k * cell.sim.record_every * cell.sim.dt for k in range(n + 1)]
                curve = exact_decay_curve(cell.model, init, times, cell.sim.metric)
                window = auto_fit_window(curve, 0.0, 1.0)
            else:
                curve = simulate_decay(cell.model, cell.sim, init)
                window = auto_fit_window(curve, noise_floor(cell.sim.metric,
                                                            cell.sim.n_particles, target),
                                         cell.analysis['fit_floor_factor'])
            fit = fit_decay_rate(curve, window)
        except LabError as err:
            return {'fitted_rate': None, 'fitted_stderr': None, 'fit_error': type(err).__name__}
        return {'fitted_rate': fit.rate, 'fitted_stderr': fit.stderr, 'fit_error': None}

    def run_sweep(self) -> dict:
        self._banner("Parameter sweep")
        cells = expand_sweep(self.config.sweep)
        workers = self.config.sim.workers

        self._say(f"Step 1: Evaluating {len(cells)} grid cells on {workers} worker(s)...")
        start = time.time()
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(tqdm(pool.map(self._sweep_cell, enumerate(cells)),
                                total=len(cells), desc="Sweep", disable=self.quiet))
        rows = [row for cell_rows in results for row in cell_rows]
        failed = sum(1 for row in rows if row.get('error'))
        self._say(f"✓ {len(rows)} rows ({failed} skipped or failed) in {time.time() - start:.2f}s")

        self._say("\nStep 2: Writing sweep table...")
        path = self.writer.write_table(rows, 'sweep')
        self._say(f"✓ Sweep saved to: {path}")
        return {'rows': rows, 'files': [path]}

    def run(self, command: str) -> dict:
        handlers = {
            'rates': self.run_rates,
            'steady-state': self.run_steady_state,
            'simulate': self.run_simulate,
            'sgd': self.run_sgd,
            'compare': self.run_compare,
            'sweep': self.run_sweep,
        }
        return handlers[command]()


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        allow_abbrev=False,
        description="Mixing-time laboratory for the harmonic Wigner-Fokker-Planck equation",
        epilog="Any config value can be overridden as --section.key=value, e.g. --model.gamma=2")
    parser.add_argument('command', choices=COMMANDS, help="subcommand to run")
    parser.add_argument('--config', type=str, default=None, help="JSON/JSON5 config file")
    parser.add_argument('--out', type=str, default=None, help="output path prefix")
    parser.add_argument('--seed', type=int, default=None, help="random seed")
    parser.add_argument('--format', choices=('csv', 'json'), default=None, help="table format")
    parser.add_argument('--workers', type=int, default=None, help="worker threads")
    parser.add_argument('--quiet', action='store_true', help="suppress console output")
    return parser


def _emit_error(err: Exception, code: int) -> int:
    payload = {'error': type(err).__name__, 'message': str(err), 'exit_code': code}
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run the command line

    Returns:
        Exit code: 0 success, 2 configuration error, 3 numerical error
    """
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        overrides = parse_overrides(extra)
        for keys, value in (((['output', 'path']), args.out), (['sim', 'seed'], args.seed),
                            (['output', 'format'], args.format), (['sim', 'workers'], args.workers)):
            if value is not None:
                overrides.append((keys, value))
        config = load_config(args.config, overrides)
        WfpLabPipeline(config, quiet=args.quiet).run(args.command)
    except (ConfigError, ParameterError) as err:
        return _emit_error(err, EXIT_CODES['config_error'])
    except LabError as err:
        return _emit_error(err, EXIT_CODES['numerical_error'])
    return EXIT_CODES['success']


if __name__ == "__main__":
    sys.exit(main())
