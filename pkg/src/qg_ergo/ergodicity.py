"""
Monte Carlo diagnostics of ergodicity: time averages along single members,
ensemble averages across members, and the comparisons between them.

Time averages are Cesàro means ``(1/(T - T0)) int_{T0}^{T} g(w(t)) dt``.
Ensemble averages are taken over the terminal window ``[T/2, T]`` so that
both sides estimate the same stationary quantity without assuming the start
is stationary. Statistical tolerances are three standard errors and a
two-sample Kolmogorov-Smirnov test at level 0.01.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, stats

from .ensemble import default_observables, run_ensemble
from .errors import DomainError, InsufficientSamplesError, TheoremConditionError
from .integrator import make_observable
from .noise import theorem_conditions

__all__ = [
    "time_average",
    "ensemble_average",
    "running_average",
    "ErgodicReport",
    "analyze",
    "birkhoff_experiment",
    "N_SIGMA",
    "KS_LEVEL",
]

log = logging.getLogger(__name__)

N_SIGMA = 3.0
KS_LEVEL = 0.01
HIST_BINS = 40


def _window(times, t0, t1=np.inf):
    times = np.asarray(times, dtype=float)
    eps = 1e-9 * max(1.0, float(np.max(np.abs(times)))) if times.size else 0.0
    return (times >= t0 - eps) & (times <= t1 + eps)


def time_average(values, times, burn_in=0.0):
    """
    Trapezoidal time average over ``t >= burn_in``.

    Parameters
    ----------
    values : array_like
        Samples along the last axis; leading axes (members) are kept.
    times : array_like
        Increasing sample times.
    burn_in : float
        Start of the averaging window.

    Returns
    -------
    float or ndarray
        Integral over the covered window divided by its length.
    """
    values = np.asarray(values, dtype=float)
    times = np.asarray(times, dtype=float)
    if values.shape[-1] != times.shape[0]:
        raise DomainError(f"{values.shape[-1]} samples but {times.shape[0]} times")
    sel = _window(times, burn_in)
    if np.count_nonzero(sel) < 2:
        raise InsufficientSamplesError(
            f"averaging window t >= {burn_in:g} holds fewer than two samples")
    t = times[sel]
    length = t[-1] - t[0]
    if not length > 0:
        raise InsufficientSamplesError("averaging window has zero length")
    return integrate.trapezoid(values[..., sel], t, axis=-1) / length


def ensemble_average(values):
    """Sample mean over the first axis and its standard error (``ddof=1``)."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0] if values.ndim else 0
    if n < 2:
        raise InsufficientSamplesError(f"need at least 2 members, got {n}")
    mean = values.mean(axis=0)
    stderr = values.std(axis=0, ddof=1) / np.sqrt(n)
    return mean, stderr


def running_average(values, times, burn_in=0.0):
    """Running Cesàro mean ``(1/(t - T0)) int_{T0}^t g`` on the window samples after the first."""
    values = np.asarray(values, dtype=float)
    times = np.asarray(times, dtype=float)
    sel = _window(times, burn_in)
    t = times[sel]
    if t.size < 2:
        raise InsufficientSamplesError("running average needs two samples in the window")
    cum = integrate.cumulative_trapezoid(values[..., sel], t, axis=-1)
    return t[1:], cum / (t[1:] - t[0])


def _compare(a, se_a, b, se_b):
    """Discrepancy ``|a - b|`` against ``N_SIGMA`` pooled standard errors."""
    diff = abs(float(a) - float(b))
    pooled = float(np.hypot(se_a, se_b))
    if pooled > 0:
        ratio = diff / pooled
    else:
        ratio = 0.0 if diff == 0 else float("inf")
    return {"discrepancy": diff, "pooled_stderr": pooled, "n_sigma": ratio,
            "passed": bool(ratio < N_SIGMA)}


def _thin_step(run, corr_time):
    """Sample stride giving roughly ten correlation times between kept samples."""
    if len(run.steps) < 2:
        return 1
    dt_sample = float(run.times[1] - run.times[0])
    return max(1, int(np.ceil(10.0 * corr_time / dt_sample)))


@dataclass
class ErgodicReport:
    """Ergodicity diagnostics of one or two ensembles; every section is JSON-ready."""

    observables: list
    t_end: float
    burn_in: float
    terminal_window: tuple
    members: dict
    degenerate: bool
    time_averages: dict
    ensemble_series: dict
    terminal_ensemble: dict
    birkhoff: dict
    moment: dict
    histograms: dict
    convergence: dict
    cross_ic: dict = None
    ks: dict = None
    median_indicator: dict = None
    conditions: dict = None
    forced: bool = False
    runs: dict = field(default=None, repr=False, compare=False)

    @property
    def passed(self):
        """All statistical checks that were run came out within tolerance."""
        checks = [v["passed"] for ic in self.birkhoff.values() for v in ic.values()]
        checks += [v["passed"] for v in self.moment.values()]
        for section in (self.cross_ic, self.ks):
            if section:
                checks += [v["passed"] for v in section.values()]
        if self.median_indicator:
            checks += [v["passed"] for v in self.median_indicator["per_ic"].values()]
        return all(checks)

    def to_dict(self):
        return {
            "observables": list(self.observables),
            "t_end": self.t_end,
            "burn_in": self.burn_in,
            "terminal_window": list(self.terminal_window),
            "members": self.members,
            "degenerate": self.degenerate,
            "regime": "degenerate_dirac_at_zero" if self.degenerate else "stochastic",
            "passed": self.passed,
            "forced": self.forced,
            "conditions": self.conditions,
            "time_averages": self.time_averages,
            "ensemble_series": self.ensemble_series,
            "terminal_ensemble": self.terminal_ensemble,
            "birkhoff": self.birkhoff,
            "cross_ic": self.cross_ic,
            "ks": self.ks,
            "moment": self.moment,
            "median_indicator": self.median_indicator,
            "histograms": self.histograms,
            "convergence": self.convergence,
        }


def analyze(runs, observables, t_end, burn_in, *, degenerate=False, corr_time=0.05,
            conditions=None, forced=False):
    """
    Assemble an :class:`ErgodicReport` from finished ensembles.

    Parameters
    ----------
    runs : dict
        ``{label: EnsembleRun}``; one or two entries, each with >= 2 members.
    observables : sequence of str
        Names present in every run's ``values``.
    corr_time : float
        Decorrelation time used to thin samples for the KS test.
    """
    labels = list(runs)
    if not 1 <= len(labels) <= 2:
        raise DomainError(f"expected one or two ensembles, got {len(labels)}")
    t_half = 0.5 * t_end
    names = list(observables)

    ta, series, terminal, birk, conv, hist_samples = {}, {}, {}, {}, {}, {}
    moment, window_means = {}, {}
    for lab in labels:
        run = runs[lab]
        t = run.times
        term = _window(t, t_half, t_end)
        ta[lab], series[lab], terminal[lab], birk[lab], conv[lab] = {}, {}, {}, {}, {}
        hist_samples[lab], window_means[lab] = {}, {}
        thin = _thin_step(run, corr_time)
        for name in names:
            v = run.values[name]
            per_member = time_average(v, t, burn_in)
            ta_mean, ta_se = ensemble_average(per_member)
            mean_t, se_t = ensemble_average(v)
            wm = time_average(v, t, t_half) if np.count_nonzero(term) >= 2 else v[:, term].mean(1)
            ea_mean, ea_se = ensemble_average(wm)
            window_means[lab][name] = wm
            ta[lab][name] = {"per_member": per_member.tolist(), "mean": float(ta_mean),
                             "stderr": float(ta_se)}
            series[lab][name] = {"t": t.tolist(), "mean": mean_t.tolist(), "stderr": se_t.tolist()}
            terminal[lab][name] = {"mean": float(ea_mean), "stderr": float(ea_se),
                                   "n_samples": int(v[:, term].size)}
            birk[lab][name] = dict(_compare(ta_mean, ta_se, ea_mean, ea_se),
                                   time_average=float(ta_mean), ensemble_average=float(ea_mean))
            tc, ra = running_average(v, t, burn_in)
            ra_mean = ra.mean(axis=0)
            conv[lab][name] = {"t": tc.tolist(), "running_mean": ra_mean.tolist(),
                               "discrepancy": np.abs(ra_mean - ea_mean).tolist()}
            idx = np.flatnonzero(term)
            hist_samples[lab][name] = v[:, idx[::thin]].ravel()

        ens = run.values["enstrophy"].mean(axis=0)
        second = ens[term]
        smax, smean = float(np.max(second)), float(np.mean(second))
        ratio = smax / smean if smean > 0 else (1.0 if smax == 0 else float("inf"))
        moment[lab] = {"second_half_max": smax, "second_half_mean": smean,
                       "ratio": ratio, "sup": float(np.max(ens)), "passed": bool(ratio < 1.2)}

    histograms = {}
    for name in names:
        pooled = np.concatenate([hist_samples[lab][name] for lab in labels])
        lo, hi = float(np.min(pooled)), float(np.max(pooled))
        if hi <= lo:
            hi = lo + 1.0
        edges = np.linspace(lo, hi, HIST_BINS + 1)
        histograms[name] = {"edges": edges.tolist()}
        for lab in labels:
            counts, _ = np.histogram(hist_samples[lab][name], bins=edges)
            histograms[name][lab] = (counts / max(1, counts.sum())).tolist()

    cross = ks = median = None
    if len(labels) == 2:
        a, b = labels
        cross, ks = {}, {}
        for name in names:
            cross[name] = dict(_compare(terminal[a][name]["mean"], terminal[a][name]["stderr"],
                                        terminal[b][name]["mean"], terminal[b][name]["stderr"]))
            sa, sb = hist_samples[a][name], hist_samples[b][name]
            if np.ptp(np.concatenate([sa, sb])) == 0:
                stat, p = 0.0, 1.0
            else:
                res = stats.ks_2samp(sa, sb)
                stat, p = float(res.statistic), float(res.pvalue)
            ks[name] = {"statistic": stat, "pvalue": p, "n": [int(sa.size), int(sb.size)],
                        "level": KS_LEVEL, "passed": bool(p > KS_LEVEL)}
        median = _median_indicator(runs, t_half, t_end)

    return ErgodicReport(
        observables=names, t_end=float(t_end), burn_in=float(burn_in),
        terminal_window=(t_half, float(t_end)),
        members={lab: [int(m) for m in runs[lab].members] for lab in labels},
        degenerate=bool(degenerate), time_averages=ta, ensemble_series=series,
        terminal_ensemble=terminal, birkhoff=birk, moment=moment, histograms=histograms,
        convergence=conv, cross_ic=cross, ks=ks, median_indicator=median,
        conditions=conditions, forced=forced, runs=runs,
    )


def _median_indicator(runs, t_half, t_end):
    """Time averages of ``1{enstrophy > q}`` with ``q`` the pooled terminal-window median."""
    pooled = np.concatenate([r.values["enstrophy"][:, _window(r.times, t_half, t_end)].ravel()
                             for r in runs.values()])
    q = float(np.median(pooled))
    out = {"threshold": q, "per_ic": {}}
    for lab, run in runs.items():
        ind = (run.values["enstrophy"] > q).astype(float)
        per_member = time_average(ind, run.times, t_half)
        mean, se = ensemble_average(per_member)
        out["per_ic"][lab] = dict(_compare(mean, se, 0.5, 0.0), time_average=float(mean),
                                  stderr=float(se))
    return out


def birkhoff_experiment(config, observables=None, force=False, threads=1, nonlinear=True):
    """
    Run both initial conditions of ``config`` and analyse them.

    Parameters
    ----------
    config : RunConfig
        Must hold two distinct initial conditions and ``ensemble_size >= 2``.
    observables : sequence of str, optional
        Extra observables on top of enstrophy, energy and ``coeff_1_1``;
        defaults to the configured list.
    force : bool
        Run even when the noise fails the theorem conditions.

    Returns
    -------
    ErgodicReport
        With the raw ensembles attached as ``report.runs``.
    """
    params, noise = config.model_params(), config.noise_spec()
    cond = theorem_conditions(noise, params.nu)
    if not cond.overall and not force:
        raise TheoremConditionError(
            "noise fails the ergodicity conditions " + ", ".join(cond.failed),
            cond.failed, cond.root_failures)
    if not config.two_ic:
        raise DomainError("a Birkhoff experiment needs a second initial condition")
    if config.ensemble_size < 2:
        raise DomainError("a Birkhoff experiment needs ensemble_size >= 2")
    ics = config.initial_fields()
    if np.array_equal(ics[0][1], ics[1][1]):
        raise DomainError("the two initial conditions coincide")
    extra = list(config.observables if observables is None else observables)
    for name in extra:
        make_observable(name, config.N)
    names = default_observables(extra)
    runs = {}
    for label, omega0, members in ics:
        log.info("running %s: %d members, %d steps", label, len(members), config.n_steps)
        runs[label] = run_ensemble(
            params, noise, omega0, members, config.seed, config.n_steps,
            sample_every=config.sample_every, observables=extra, threads=threads,
            nonlinear=nonlinear)
    corr = 1.0 / (2.0 * (2.0 * np.pi**2 * params.nu + params.r))
    return analyze(runs, names, config.t_end, config.burn_in, degenerate=noise.is_zero,
                   corr_time=corr, conditions=cond.to_dict(), forced=not cond.overall)
