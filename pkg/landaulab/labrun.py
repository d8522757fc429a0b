#! /usr/bin/env python3
# -*- coding: utf-8 -*-
from __future__ import annotations

import argparse
import logging
import os
import sys
import time

import numpy as np

from . import __version__
from . import dispersion
from . import echo
from . import gevrey
from . import output
from . import vlasov
from . import volterra
from .config import ConfigError, ExperimentConfig, load_experiment
from .errors import InstabilityError, LabError, NumericalFailure, ParameterError, ResolutionAlarm

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERRORS = 1
EXIT_CONFIG = 2
EXIT_RESOLUTION = 3
EXIT_NUMERICAL = 4


class AbortRun(Exception):
    pass


class LabAspect:
    errors = 0
    warnings = 0
    bail_on_error = False
    consider_warnings_errors = False
    quiet = False

    def __init__(self, name: str):
        self.log = log.getChild(name)

    def error(self, msg: str, *args) -> None:
        LabAspect.errors += 1
        self.log.error(msg, *args)
        if LabAspect.bail_on_error:
            raise AbortRun(msg)

    def warning(self, msg: str, *args) -> None:
        if LabAspect.consider_warnings_errors:
            self.error(msg, *args)
            return
        LabAspect.warnings += 1
        self.log.warning(msg, *args)

    def info(self, msg: str, *args) -> None:
        self.log.info(msg, *args)

    def debug(self, msg: str, *args) -> None:
        self.log.debug(msg, *args)

    def msg(self, msg: str) -> None:
        if not LabAspect.quiet:
            print(msg)


class Experiment(LabAspect):
    """Base class of the experiments; subclasses implement run()."""

    name = 'experiment'

    def __init__(self, config: ExperimentConfig, outdir: str, threads: int = 1):
        super().__init__(self.name)
        self.config = config
        self.outdir = outdir
        self.threads = threads
        self.outputs: list[str] = []

    def path(self, name: str) -> str:
        self.outputs.append(name)
        full = os.path.join(self.outdir, name)
        os.makedirs(os.path.dirname(full), exist_ok=True)
        return full

    def write_table(self, name: str, header, rows, metadata: dict | None = None) -> None:
        meta = {'experiment': self.name, 'version': __version__}
        meta.update(metadata or {})
        output.write_csv(self.path(name), header, rows, meta)

    def save_state(self, name: str, state) -> None:
        """Write a SimState (e.g. the last good state of an aborted run) as a snapshot."""
        if state is None:
            return
        output.write_snapshot(self.path(name), state.spectrum, state.t)
        self.info(f'Last good state (t={state.t:g}) written to {name}')

    def run(self) -> None:
        raise NotImplementedError


def _positive_modes(grid) -> list[int]:
    return list(range(1, grid.Nx // 2))


class Simulate(Experiment):
    """Nonlinear (or linearized) Vlasov simulation with density and bootstrap diagnostics."""

    name = 'simulate'

    def run(self) -> None:
        conf = self.config
        run, gev = conf['run'], conf['gevrey']
        grid, eq, W, schedule = conf.grid(), conf.equilibrium(), conf.interaction(), conf.schedule()
        data = conf.perturbation()
        setup = vlasov.SimulationSetup(grid, eq, W, schedule, data.real_space(grid), run['horizon'],
                                       dt=run['dt'], linearized=run['linearized'],
                                       filter_strength=run['filter_strength'],
                                       boundary_tol=run['boundary_tol'], diagnostics=run['diagnostics'],
                                       snapshot_every=run['snapshot_every'], threads=self.threads,
                                       log_cap=gev['log_cap'])
        self.msg(f'Simulating {eq!r} with {W.kind} interaction on {grid.Nx}x{grid.Nv} grid '
                 f'to t={run["horizon"]:g}')
        trajectory = vlasov.run_simulation(setup)
        meta = trajectory.metadata
        if run['horizon'] > meta['validity_horizon']:
            self.warning(f'Horizon {run["horizon"]:g} exceeds the validity horizon {meta["validity_horizon"]:.6g}')

        modes = _positive_modes(grid)
        columns = [grid.mode_index(k) for k in modes]
        header = ['t'] + [f'{part}_rho_{k}' for k in modes for part in ('re', 'im')] + ['a_rho']
        rows = []
        for n, t in enumerate(trajectory.times):
            values = trajectory.rho[n, columns]
            row = [t]
            for z in values:
                row.extend((z.real, z.imag))
            row.append(trajectory.a_rho[n])
            rows.append(row)
        self.write_table('density.csv', header, rows, meta)

        if run['diagnostics']:
            self.write_table('bootstrap.csv', list(vlasov.BootstrapRow._fields), trajectory.bootstrap)
            rows = trajectory.bootstrap
            if len(rows) >= 4:
                total = rows[-1].q3
                quarter = rows[-1].q3 - rows[(3 * len(rows)) // 4].q3
                if total > 0 and quarter > 0.01 * total:
                    self.warning(f'Bootstrap Q3 still growing: last quarter adds {quarter / total:.2%}')
        for t, spec in trajectory.snapshots:
            step = int(round(t / setup.step))
            output.write_snapshot(self.path(os.path.join('snapshots', f'snap_{step:06d}.bin')), spec, t)

        if run['profile']:
            self._profile(trajectory, schedule)

    def _profile(self, trajectory, schedule) -> None:
        try:
            profile = vlasov.asymptotic_profile(trajectory, schedule.lambda_prime, schedule.s, schedule.sigma)
        except InstabilityError as err:
            self.warning(str(err))
            return
        self.write_table('profile.csv', ['t', 'distance'], profile.distances, {'rate': profile.rate})


class Volterra(Experiment):
    """Linearized density from the Volterra equation, one solve per data mode."""

    name = 'volterra'

    def run(self) -> None:
        conf = self.config
        run = conf['run']
        grid, eq, W, schedule = conf.grid(), conf.equilibrium(), conf.interaction(), conf.schedule()
        data = conf.perturbation()
        dt = run['dt'] if run['dt'] is not None else grid.deta / 4
        horizon = run['horizon']
        self.msg(f'Solving the linear density of {eq!r} with {W.kind} interaction to t={horizon:g}')
        trace = volterra.linear_density(data, eq, W, horizon, dt, self.threads)
        forcing = volterra.forcing_trace(data, horizon, dt)
        meta: dict = {'dt': dt, 'horizon': horizon,
                      'weighted_ratio': volterra.estimate_weighted_ratio(trace, forcing, schedule)}

        modes = [int(k) for k in trace.modes if k > 0]
        for k in modes:
            try:
                fit = volterra.fit_decay_rate(trace.times, trace.mode(k), horizon / 4, horizon)
            except ParameterError as err:
                self.info(f'Mode {k}: {err}')
                continue
            meta[f'rate_{k}'] = fit.rate
            meta[f'frequency_{k}'] = fit.frequency
            if fit.rate > 0:
                self.warning(f'Mode {k} grows at rate {fit.rate:.6g}')
        header = ['t', 'k', 're_rho', 'im_rho', 'abs_rho', 'weighted_abs_rho']
        rows = []
        capped = 0
        for k in modes:
            rho = trace.mode(k)
            weights = gevrey.gevrey_weight_report(schedule, trace.times, k, k * trace.times)
            capped += weights.capped
            rows.extend(zip(trace.times, [k] * rho.size, rho.real, rho.imag, np.abs(rho),
                            weights.values * np.abs(rho)))
        if capped:
            self.warning(f'{capped} density weights exceed the log-cap and were capped')
        meta['capped_weights'] = capped
        self.write_table('volterra.csv', header, rows, meta)


class Penrose(Experiment):
    """Penrose criterion, sampled condition (L) margin and dispersion roots."""

    name = 'penrose'

    def run(self) -> None:
        conf = self.config
        stab = conf['stability']
        eq, W = conf.equilibrium(), conf.interaction()
        k_set = range(1, stab['k_max'] + 1)
        self.msg(f'Checking stability of {eq!r} with {W.kind} interaction (A={W.A:g}) for k <= {stab["k_max"]}')
        report = dispersion.penrose_check(eq, W, k_set)
        if report.unresolved:
            self.warning('Penrose check has unresolved critical points')
        margin = dispersion.condition_L_margin(eq, W, stab['lambda_bar'], stab['k_max'], stab['Z'],
                                               stab['mu_min'], stab['n_mu'], stab['n_zeta'],
                                               stab['kappa_min'], stab['winding'], self.threads)
        if report.passed != margin.stable:
            self.warning(f'Penrose criterion (passed={report.passed}) and sampled margin '
                         f'(kappa={margin.kappa:.3e}) disagree')
        roots = []
        if stab['roots']:
            mu = (stab['mu_min'], max(-stab['mu_min'], stab['lambda_bar']))
            for k in k_set:
                if float(W.multiplier(k)) == 0.0:
                    continue
                for root in dispersion.find_dispersion_roots(eq, W, k, mu=mu, Z=stab['Z']):
                    roots.append({'k': root.k, 'xi': root.xi, 'exponent': root.exponent,
                                  'damped': root.damped, 'residual': root.residual})
        self.msg(f'Penrose {"passed" if report.passed else "failed"}, kappa = {margin.kappa:.6g}')
        output.write_json(self.path('penrose.json'), {
            'penrose': report.as_dict(),
            'margin': margin.as_dict(),
            'roots': roots,
            'agree': report.passed == margin.stable,
        })


class Echo(Experiment):
    """Two-pulse plasma echo: data in mode l - k, kick in mode l, echo in mode k."""

    name = 'echo'

    def run(self) -> None:
        conf = self.config
        cfg = conf['echo']
        grid, eq, W, schedule = conf.grid(), conf.equilibrium(), conf.interaction(), conf.schedule()
        self.msg(f'Echo experiment k={cfg["k"]}, l={cfg["l"]}, kick at t={cfg["tau_kick"]:g}')
        res = echo.run_echo_experiment(grid, eq, W, schedule, cfg['k'], cfg['l'], cfg['tau_kick'], cfg['eps'],
                                       cfg['kick_ratio'], cfg['horizon'], cfg['dt'], cfg['theta'], self.threads)
        rows = [(t, z.real, z.imag, abs(z)) for t, z in zip(res.times, res.trace)]
        self.write_table('echo.csv', ['t', 're_rho', 'im_rho', 'abs_rho'], rows,
                         {'k': cfg['k'], 'l': cfg['l'], 'tau_kick': cfg['tau_kick'], 'eps': cfg['eps']})
        summary = {'detected': res.detected, 't_echo': res.t_echo, 'amplitude': res.amplitude,
                   'predicted': res.predicted}
        if res.detected:
            summary['relative_error'] = abs(res.t_echo - res.predicted) / res.predicted
            if summary['relative_error'] > 0.05:
                self.warning(f'Echo at t={res.t_echo:g} is off the predicted {res.predicted:g}')
        elif cfg['eps'] > 0:
            self.warning('No echo detected')
        output.write_json(self.path('echo.json'), summary)


class KernelSweep(Experiment):
    """Sup-moment of the echo kernel over horizons, for a list of Gevrey exponents."""

    name = 'kernel-sweep'

    def run(self) -> None:
        conf = self.config
        cfg = conf['sweep']
        gamma = conf['interaction']['gamma']
        self.msg(f'Kernel sweep over s = {cfg["s"]}, T = {cfg["horizons"]}')
        res = echo.critical_exponent_sweep(cfg['s'], cfg['horizons'], gamma, cfg['lambda0'], cfg['lambda_prime'],
                                           cfg['k_max'], cfg['l_max'], cfg['a0'], cfg['c'], cfg['delta'],
                                           cfg['per_decade'], self.threads)
        meta = {f'class_s={s:g}': label for s, label in res.classes.items()}
        meta['gamma'] = gamma
        self.write_table('sweep.csv', list(echo.SweepRow._fields), res.rows, meta)
        for s, label in res.classes.items():
            self.msg(f's = {s:g}: {label}')
            if label == 'unconverged':
                self.warning(f's = {s:g}: mode sums not converged; raise sweep.l_max or sweep.lambda0')


EXPERIMENT_CLASSES: dict[str, type[Experiment]] = {
    cls.name: cls for cls in (Simulate, Volterra, Penrose, Echo, KernelSweep)
}


def run_experiment(args: argparse.Namespace) -> int:
    """Load the config, run the experiment and write the manifest.  Returns the exit status."""
    LabAspect.errors = 0
    LabAspect.warnings = 0
    LabAspect.bail_on_error = args.bail_on_error
    LabAspect.consider_warnings_errors = args.werror
    LabAspect.quiet = args.quiet

    try:
        config = load_experiment(args.config, args.experiment)
    except ConfigError as err:
        log.error('Config error: %s', err)
        return EXIT_CONFIG

    outdir = args.output or config['output']['dir']
    os.makedirs(outdir, exist_ok=True)
    experiment = EXPERIMENT_CLASSES[config.experiment](config, outdir, args.threads)
    status = EXIT_OK
    start = time.perf_counter()
    try:
        for warning in config.warnings:
            experiment.warning(warning)
        experiment.run()
    except AbortRun:
        pass
    except ResolutionAlarm as err:
        LabAspect.errors += 1
        experiment.log.error('Resolution alarm: %s', err)
        experiment.save_state('last_good.bin', err.state)
        status = EXIT_RESOLUTION
    except NumericalFailure as err:
        LabAspect.errors += 1
        experiment.log.error('Numerical failure: %s', err)
        experiment.save_state('last_good.bin', err.state)
        status = EXIT_NUMERICAL
    except LabError as err:
        LabAspect.errors += 1
        experiment.log.error('%s', err)
    wall_time = time.perf_counter() - start

    output.write_manifest(outdir, config.as_dict(), __version__, wall_time, args.threads, experiment.outputs)
    errors, warnings = LabAspect.errors, LabAspect.warnings
    p = lambda x: '' if x == 1 else 's'
    experiment.msg(f'{config.experiment} finished in {wall_time:.2f}s: '
                   f'{errors} error{p(errors)}, {warnings} warning{p(warnings)}')
    if status == EXIT_OK and errors > 0:
        status = EXIT_ERRORS
    return status


def _threads_argument(s: str) -> int:
    n = int(s)
    if n < 1:
        raise argparse.ArgumentTypeError(f'need at least one thread, got {n}')
    return n


def argparser_basic_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('-b', '--bail_on_error',
                        action='store_true',
                        help='abort the experiment on first error')
    parser.add_argument('-l', '--log_level',
                        default='warning',
                        help='set log level (debug, info, warning, error, critical)')
    parser.add_argument('-e', '--werror',
                        action='store_true',
                        help='consider warnings as errors')
    parser.add_argument('-j', '--threads',
                        type=_threads_argument, default=1,
                        help='number of worker threads (outputs are reproducible at a fixed thread count)')
    parser.add_argument('-o', '--output', metavar='DIR',
                        help='output directory (default: output.dir from the config)')
    parser.add_argument('-q', '--quiet',
                        action='store_true',
                        help='only print errors')


def argparser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Run Vlasov-Poisson experiments on a spectral phase-space grid.')
    subparsers = parser.add_subparsers(dest='experiment', metavar='EXPERIMENT', required=True)
    for name, cls in EXPERIMENT_CLASSES.items():
        sub = subparsers.add_parser(name, help=cls.__doc__)
        sub.add_argument('-c', '--config', required=True, metavar='FILE',
                         help='experiment file (YAML) or a manifest.json from an earlier run')
        argparser_basic_arguments(sub)
    return parser


def initialize_logging(args: argparse.Namespace) -> None:
    level = 'error' if args.quiet else args.log_level
    fmt = "%(levelname)s %(message)s"
    logging.basicConfig(stream=sys.stdout,
                        format=fmt,
                        level=getattr(logging, level.upper()))


def main() -> None:
    args = argparser().parse_args()

    initialize_logging(args)

    sys.exit(run_experiment(args))

if __name__ == '__main__':
    main()
