"""Analysis tables computed from a study's persisted logs.

Everything here reads only what the :class:`~feedlab.store.Store` holds, so
the same tables come out of a live run and of a replay of its files.
Each table is a header plus rows; floats are written with six decimals.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .domain import (N_FACTORS, NEGATIVE_EMOTIONS, POSITIVE_EMOTIONS, AapaScore, Arm, Assignment,
                     EngagementEvent, Experiment, Participant, Party, Platform, PromptKind)
from .errors import FeedlabError, NonConvergence, NoViews
from .experiment import (Phase, StudyConfig, completion_filter, engagement_rates, return_rate, study_day,
                         time_spent_minutes)
from .stats import (BernoulliRandomizer, adjust_hte, adjust_outcome_tiers, factor_contribution,
                    factor_cooccurrence, hte, impute_baseline, lmm_ate, mann_whitney_u, ols_ate,
                    ri_attrition_pattern, ri_attrition_rate, ri_covariate_balance)
from .stats.linear import RegressionResult
from .store import Store

log = logging.getLogger(__name__)

EMOTIONS = POSITIVE_EMOTIONS + NEGATIVE_EMOTIONS
OUTCOMES = ("thermometer",) + EMOTIONS
ENGAGEMENT_METRICS = ("return_rate", "time_spent_min", "favorite_rate", "repost_rate", "reply_rate")
RI_DRAWS = 2000


@dataclass
class Table:
    name: str
    header: list
    rows: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for r in self.rows:
            w.writerow([fmt(v) for v in r])
        return buf.getvalue()

    def to_markdown(self) -> str:
        lines = ["| " + " | ".join(self.header) + " |", "|" + "---|" * len(self.header)]
        lines += ["| " + " | ".join(fmt(v) for v in r) + " |" for r in self.rows]
        return "\n".join(lines) + "\n"

    def records(self) -> list[dict]:
        return [dict(zip(self.header, r)) for r in self.rows]

    @classmethod
    def from_csv(cls, name: str, text: str) -> "Table":
        """Read back a written table; numeric cells become floats, blanks None."""
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        return cls(name, header, [[_parse_cell(c) for c in r] for r in reader])


def _parse_cell(c: str):
    if c == "":
        return None
    if c in ("true", "false"):
        return c == "true"
    if c.lstrip("-").isdigit():
        return int(c)
    try:
        return float(c)
    except ValueError:
        return c


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.6f}"
    return str(v)


# --- loading -----------------------------------------------------------------
@dataclass
class StudyData:
    config: StudyConfig
    participants: dict
    assignments: dict
    scores: dict
    events: dict
    responses: list
    pre: dict
    post: dict
    screening: list
    feeds: list

    @classmethod
    def from_store(cls, store: Store, config: Optional[StudyConfig] = None) -> "StudyData":
        if config is None:
            raw = store.read_json("study.json")
            config = StudyConfig(**raw) if raw else StudyConfig()
        s = store.streams
        participants = {d["participant_id"]: Participant.from_dict(d) for d in s["participants"]}
        assignments = {d["participant_id"]: Assignment.from_dict(d) for d in s["assignments"]}
        scores = {d["post_id"]: AapaScore.from_dict(d) for d in s["post_scores"]}
        events = {pid: [EngagementEvent.from_dict(e) for e in store.events.get(pid, [])]
                  for pid in sorted(assignments)}
        pre, post = {}, {}
        for d in s["surveys"]:
            (pre if d["phase"] == "pre" else post)[d["participant_id"]] = d
        return cls(config, participants, assignments, scores, events, list(s["responses"]), pre, post,
                   list(s["screening"]), list(s["feeds"]))

    @classmethod
    def open(cls, root: str | Path) -> "StudyData":
        store = Store.open(root)
        try:
            return cls.from_store(store)
        finally:
            store.close()

    def ids(self, experiment: Optional[Experiment] = None) -> list[str]:
        return sorted(pid for pid, a in self.assignments.items() if experiment is None or a.experiment is experiment)

    def tz(self, pid: str) -> int:
        return self.participants[pid].local_tz_offset

    def day(self, pid: str, at: int) -> int:
        return study_day(at, self.assignments[pid].enrolled_at, self.tz(pid))

    def phase_days(self, phase: Phase) -> list[int]:
        return self.config.baseline_day_list if phase is Phase.BASELINE else self.config.intervention_days

    def events_in(self, pid: str, phase: Phase) -> list[EngagementEvent]:
        days = set(self.phase_days(phase))
        return [e for e in self.events.get(pid, []) if self.day(pid, e.at) in days]


def _treated(data: StudyData, ids: Sequence[str]) -> np.ndarray:
    return np.array([data.assignments[p].treated for p in ids], dtype=np.float64)


def _platform(data: StudyData, ids: Sequence[str]) -> np.ndarray:
    return np.array([data.participants[p].platform is Platform.CLOUDRESEARCH for p in ids], dtype=np.float64)


def _democrat(data: StudyData, ids: Sequence[str]) -> np.ndarray:
    return np.array([data.participants[p].party is Party.DEMOCRAT for p in ids], dtype=np.float64)


def _experiments(experiment: Optional[Experiment]) -> list[Experiment]:
    return [experiment] if experiment is not None else list(Experiment)


# --- tables --------------------------------------------------------------------
def assignment_table(data: StudyData) -> Table:
    t = Table("assignments", ["experiment", "arm", "enrolled", "completed", "post_survey"])
    done = completion_filter(data.assignments, (e for evs in data.events.values() for e in evs), data.config)
    for exp in Experiment:
        for arm in (Arm.CONTROL, Arm.TREATMENT):
            ids = [p for p in data.ids(exp) if data.assignments[p].arm is arm]
            t.rows.append([exp.value, arm.value, len(ids), sum(p in done for p in ids),
                           sum(p in data.post for p in ids)])
    return t


@dataclass
class PhaseExposure:
    views: int
    political: int
    aapa: int
    factor_total: int
    factor_views: list


def participant_exposure(data: StudyData, pid: str, phase: Phase) -> PhaseExposure:
    x = PhaseExposure(0, 0, 0, 0, [0] * N_FACTORS)
    for e in data.events_in(pid, phase):
        if not e.qualifying_view:
            continue
        s = data.scores[e.post_id]
        x.views += 1
        if s.is_political:
            x.political += 1
            x.factor_total += s.count
            for f, on in enumerate(s.factors):
                x.factor_views[f] += on
        x.aapa += s.is_aapa
    return x


def exposure_table(data: StudyData, experiment: Optional[Experiment] = None) -> Table:
    """Participant-averaged exposure by experiment, arm and phase."""
    t = Table("exposure", ["experiment", "arm", "phase", "participants", "views_per_day", "political_fraction",
                           "aapa_of_political", "aapa_share", "mean_aapa_score"])
    for exp in _experiments(experiment):
        for arm in (Arm.CONTROL, Arm.TREATMENT):
            ids = [p for p in data.ids(exp) if data.assignments[p].arm is arm]
            for phase in Phase:
                xs = [participant_exposure(data, p, phase) for p in ids]
                xs = [x for x in xs if x.views > 0]
                ndays = len(data.phase_days(phase))
                pol = [x for x in xs if x.political > 0]
                t.rows.append([
                    exp.value, arm.value, phase.value, len(xs),
                    _mean([x.views / ndays for x in xs]),
                    _mean([x.political / x.views for x in xs]),
                    _mean([x.aapa / x.political for x in pol]),
                    _mean([x.aapa / x.views for x in xs]),
                    _mean([x.factor_total / x.political for x in pol]),
                ])
    return t


def exposure_change_table(exposure: Table) -> Table:
    """Intervention-period Treatment vs Control exposure, with the relative change."""
    t = Table("exposure_change", ["experiment", "metric", "control", "treatment", "relative_change"])
    rec = {(r["experiment"], r["arm"], r["phase"]): r for r in exposure.records()}
    for exp in Experiment:
        c = rec.get((exp.value, Arm.CONTROL.value, Phase.INTERVENTION.value))
        tr = rec.get((exp.value, Arm.TREATMENT.value, Phase.INTERVENTION.value))
        if c is None or tr is None:
            continue
        for metric in ("aapa_share", "aapa_of_political", "political_fraction", "views_per_day"):
            cv, tv = c[metric], tr[metric]
            rel = (tv - cv) / cv if cv not in (None, 0) and tv is not None and not math.isnan(cv) else math.nan
            t.rows.append([exp.value, metric, cv, tv, rel])
    return t


def _mean(xs) -> float:
    xs = [x for x in xs if x is not None]
    return float(np.mean(xs)) if xs else math.nan


def response_rows(data: StudyData, outcome: str) -> list[tuple[str, Phase, float]]:
    """(participant, phase, value) for every in-feed answer measuring ``outcome``."""
    out = []
    for r in data.responses:
        pid = r["participant_id"]
        if pid not in data.assignments:
            continue
        day = int(r["day"])
        if not 1 <= day <= data.config.total_days:
            continue
        phase = Phase.BASELINE if day <= data.config.baseline_days else Phase.INTERVENTION
        if outcome == "thermometer":
            if r["kind"] == PromptKind.THERMOMETER.value:
                out.append((pid, phase, float(r["values"][0])))
        elif r["kind"] == PromptKind.EMOTION_PAIR.value:
            if r["positive"] == outcome:
                out.append((pid, phase, float(r["values"][0])))
            elif r["negative"] == outcome:
                out.append((pid, phase, float(r["values"][1])))
    return out


def baseline_means(data: StudyData, ids: Sequence[str], outcome: str,
                   rows: Sequence[tuple[str, Phase, float]]) -> dict[str, float]:
    """Baseline-period mean per participant; imputed from the pre-survey when missing."""
    by = defaultdict(list)
    for pid, phase, v in rows:
        if phase is Phase.BASELINE:
            by[pid].append(v)
    observed = {pid: float(np.mean(v)) for pid, v in by.items() if pid in set(ids)}
    have = [p for p in ids if p in observed and outcome in data.participants[p].pre_survey]
    others_pre = [float(data.participants[p].pre_survey[outcome]) for p in have]
    others_base = [observed[p] for p in have]
    out = dict(observed)
    for pid in ids:
        if pid in out:
            continue
        pre = data.participants[pid].pre_survey.get(outcome)
        if pre is None:
            continue
        try:
            out[pid] = impute_baseline(float(pre), others_pre, others_base)
        except FeedlabError as exc:
            log.info("cannot impute %s baseline for %s: %s", outcome, pid, exc)
    return out


def _fit(fn, *args, **kw) -> tuple[Optional[RegressionResult], str]:
    try:
        return fn(*args, **kw), ""
    except NonConvergence as exc:
        return exc.best, "nonconvergence"
    except FeedlabError as exc:
        return None, type(exc).__name__


EFFECT_HEADER = ["experiment", "outcome", "model", "estimate", "se", "ci_low", "ci_high", "p", "n_obs",
                 "n_groups", "sigma2_u", "sigma2_e", "note"]


def _effect_row(exp: Experiment, outcome: str, model: str, res: Optional[RegressionResult], note: str) -> list:
    if res is None:
        return [exp.value, outcome, model] + [math.nan] * 5 + [0, None, None, None, note]
    i = res.index("treatment")
    return [exp.value, outcome, model, float(res.coef[i]), float(res._se_used[i]), float(res.ci_low[i]),
            float(res.ci_high[i]), float(res.pvalues[i]), res.n_obs, res.n_groups,
            res.sigma2_u, res.sigma2_e, note]


def infeed_fit(data: StudyData, experiment: Experiment, outcome: str) -> tuple[Optional[RegressionResult], str]:
    """Random-intercept model on intervention-period answers for one outcome."""
    ids = data.ids(experiment)
    rows = response_rows(data, outcome)
    base = baseline_means(data, ids, outcome, rows)
    members = set(ids)
    sel = [(pid, v) for pid, phase, v in rows
           if phase is Phase.INTERVENTION and pid in members and pid in base]
    if not sel:
        return None, "InsufficientData"
    pids = sorted({pid for pid, _ in sel})
    code = {pid: i for i, pid in enumerate(pids)}
    g = np.array([code[pid] for pid, _ in sel])
    y = np.array([v for _, v in sel])
    treat = _treated(data, pids)[g]
    bm = np.array([base[p] for p in pids])[g]
    plat = _platform(data, pids)[g]
    return _fit(lmm_ate, g, y, treat, bm, plat if np.ptp(plat) > 0 else None)


def infeed_table(data: StudyData, experiment: Optional[Experiment] = None) -> Table:
    t = Table("infeed_effects", EFFECT_HEADER)
    for exp in _experiments(experiment):
        for outcome in OUTCOMES:
            res, note = infeed_fit(data, exp, outcome)
            t.rows.append(_effect_row(exp, outcome, "lmm", res, note))
    return t


def post_fit(data: StudyData, experiment: Experiment, outcome: str) -> tuple[Optional[RegressionResult], str]:
    ids = [p for p in data.ids(experiment)
           if p in data.post and outcome in data.post[p] and outcome in data.participants[p].pre_survey]
    if not ids:
        return None, "InsufficientData"
    y = np.array([float(data.post[p][outcome]) for p in ids])
    pre = np.array([float(data.participants[p].pre_survey[outcome]) for p in ids])
    plat = _platform(data, ids)
    return _fit(ols_ate, y, _treated(data, ids), pre, plat if np.ptp(plat) > 0 else None, se_type="HC2")


def post_table(data: StudyData, experiment: Optional[Experiment] = None) -> Table:
    t = Table("post_effects", EFFECT_HEADER)
    for exp in _experiments(experiment):
        for outcome in OUTCOMES:
            res, note = post_fit(data, exp, outcome)
            t.rows.append(_effect_row(exp, outcome, "ols_hc2", res, note))
    return t


def engagement_values(data: StudyData, pid: str) -> dict[str, Optional[float]]:
    a = data.assignments[pid]
    evs = data.events.get(pid, [])
    days = data.config.intervention_days
    inter = data.events_in(pid, Phase.INTERVENTION)
    out = {
        "return_rate": return_rate(evs, days, a.enrolled_at, data.tz(pid)),
        "time_spent_min": time_spent_minutes(evs, days, a.enrolled_at, data.tz(pid)),
    }
    try:
        r = engagement_rates(inter)
        out.update(favorite_rate=r.favorite_rate, repost_rate=r.repost_rate, reply_rate=r.reply_rate)
    except NoViews:
        out.update(favorite_rate=None, repost_rate=None, reply_rate=None)
    return out


def engagement_table(data: StudyData, experiment: Optional[Experiment] = None) -> Table:
    t = Table("engagement", ["experiment", "metric", "control_mean", "treatment_mean", "n_control",
                             "n_treatment", "u", "p"])
    for exp in _experiments(experiment):
        ids = data.ids(exp)
        vals = {p: engagement_values(data, p) for p in ids}
        for metric in ENGAGEMENT_METRICS:
            c = [vals[p][metric] for p in ids if not data.assignments[p].treated and vals[p][metric] is not None]
            tr = [vals[p][metric] for p in ids if data.assignments[p].treated and vals[p][metric] is not None]
            if c and tr:
                u, p = mann_whitney_u(tr, c)
            else:
                u, p = math.nan, math.nan
            t.rows.append([exp.value, metric, _mean(c), _mean(tr), len(c), len(tr), u, p])
    return t


def _seed(config: StudyConfig, exp: Experiment, k: int) -> int:
    return int(np.random.SeedSequence([config.master_seed, list(Experiment).index(exp), k]).generate_state(1)[0])


def ri_table(data: StudyData, experiment: Optional[Experiment] = None, n_draws: int = RI_DRAWS) -> Table:
    """Covariate balance and attrition tests against Bernoulli(0.5) re-draws."""
    t = Table("randomization_inference", ["experiment", "test", "statistic", "observed", "p", "n_draws", "note"])
    rand = BernoulliRandomizer(0.5)
    for exp in _experiments(experiment):
        ids = data.ids(exp)
        if len(ids) < 2:
            continue
        treat = _treated(data, ids)
        base_views = []
        for p in ids:
            base_views.append(participant_exposure(data, p, Phase.BASELINE).views / data.config.baseline_days)
        X = np.column_stack([
            [float(data.participants[p].pre_survey.get("thermometer", math.nan)) for p in ids],
            _democrat(data, ids), _platform(data, ids), base_views])
        observed = X[:, 0][np.isfinite(X[:, 0])]
        X = np.nan_to_num(X, nan=float(observed.mean()) if observed.size else 0.0)
        names = ["pre_thermometer", "democrat", "platform", "baseline_views_per_day"]
        attrition = np.array([p not in data.post for p in ids], dtype=np.float64)
        tests = [
            ("covariate_balance", lambda s: ri_covariate_balance(X, treat, rand, n_draws, s, names)),
            ("attrition_rate", lambda s: ri_attrition_rate(attrition, treat, rand, n_draws, s)),
            ("attrition_pattern", lambda s: ri_attrition_pattern(X, treat, attrition, rand, n_draws, s, names)),
        ]
        for k, (name, fn) in enumerate(tests):
            seed = _seed(data.config, exp, k)
            try:
                r = fn(seed)
                note = ("dropped:" + ";".join(r.dropped)) if r.dropped else ""
                t.rows.append([exp.value, name, r.statistic, r.observed, r.p, r.n_draws, note])
            except FeedlabError as exc:
                t.rows.append([exp.value, name, None, math.nan, math.nan, n_draws, type(exc).__name__])
    return t


def fdr_table(infeed: Table, post: Table, engagement: Table) -> Table:
    """Primary tier raw, secondary and tertiary sharpened together with the tiers above."""
    t = Table("fdr", ["experiment", "tier", "outcome", "p", "q"])
    for exp in Experiment:
        def ps(table, prefix):
            return {f"{prefix}:{r['outcome'] if 'outcome' in r else r['metric']}": r["p"]
                    for r in table.records()
                    if r["experiment"] == exp.value and r["p"] is not None and not math.isnan(r["p"])}
        inf, pst, eng = ps(infeed, "infeed"), ps(post, "post"), ps(engagement, "engagement")
        primary = {k: v for k, v in {**inf, **pst}.items() if k.endswith(":thermometer")}
        secondary = {k: v for k, v in {**inf, **pst}.items() if not k.endswith(":thermometer")}
        if not (primary or secondary or eng):
            continue
        q = adjust_outcome_tiers(primary, secondary, eng)
        for tier, group in (("primary", primary), ("secondary", secondary), ("tertiary", eng)):
            for k in group:
                t.rows.append([exp.value, tier, k, group[k], q[k]])
    return t


def hte_table(data: StudyData, experiment: Optional[Experiment] = None) -> Table:
    """Treatment x moderator interactions for the thermometer outcomes, FDR-adjusted per experiment."""
    t = Table("hte", ["experiment", "outcome", "moderator", "interaction", "se", "p", "q", "note"])
    for exp in _experiments(experiment):
        rows, pvals = [], {}
        ids = data.ids(exp)
        for moderator in ("democrat", "platform"):
            # post-survey OLS
            sel = [p for p in ids if p in data.post and "thermometer" in data.participants[p].pre_survey]
            mod = (_democrat if moderator == "democrat" else _platform)(data, sel)
            plat = _platform(data, sel) if moderator == "democrat" else None
            res, note = _fit(hte, [float(data.post[p]["thermometer"]) for p in sel], _treated(data, sel), mod,
                             [float(data.participants[p].pre_survey["thermometer"]) for p in sel], plat,
                             moderator_name=moderator) if sel else (None, "InsufficientData")
            rows.append(("post:thermometer", moderator, res, note))
            # in-feed random-intercept model
            rr = response_rows(data, "thermometer")
            base = baseline_means(data, ids, "thermometer", rr)
            obs = [(pid, v) for pid, phase, v in rr if phase is Phase.INTERVENTION and pid in base and pid in set(ids)]
            if obs:
                pids = sorted({pid for pid, _ in obs})
                code = {pid: i for i, pid in enumerate(pids)}
                g = np.array([code[pid] for pid, _ in obs])
                mod = (_democrat if moderator == "democrat" else _platform)(data, pids)[g]
                plat = _platform(data, pids)[g] if moderator == "democrat" else None
                res, note = _fit(hte, np.array([v for _, v in obs]), _treated(data, pids)[g], mod,
                                 np.array([base[p] for p in pids])[g], plat, g, moderator_name=moderator)
            else:
                res, note = None, "InsufficientData"
            rows.append(("infeed:thermometer", moderator, res, note))
        for outcome, moderator, res, note in rows:
            if res is not None:
                pvals[(outcome, moderator)] = res.pvalue(f"treatment:{moderator}")
        q = adjust_hte(pvals) if pvals else {}
        for outcome, moderator, res, note in rows:
            if res is None:
                t.rows.append([exp.value, outcome, moderator, math.nan, math.nan, math.nan, math.nan, note])
                continue
            i = res.index(f"treatment:{moderator}")
            t.rows.append([exp.value, outcome, moderator, float(res.coef[i]), float(res._se_used[i]),
                           float(res.pvalues[i]), q[(outcome, moderator)], note])
    return t


def factor_fractions(data: StudyData, pid: str) -> Optional[list[float]]:
    x = participant_exposure(data, pid, Phase.INTERVENTION)
    if x.views == 0:
        return None
    return [v / x.views for v in x.factor_views]


def factor_table(data: StudyData, experiment: Optional[Experiment] = None) -> Table:
    """Post-survey thermometer on pre-survey and each factor's share of intervention views."""
    t = Table("factor_contribution", ["factor", "estimate", "se", "ci_low", "ci_high", "p", "n_obs", "note"])
    ids = [p for p in data.ids(experiment) if p in data.post and "thermometer" in data.participants[p].pre_survey]
    fr = {p: factor_fractions(data, p) for p in ids}
    ids = [p for p in ids if fr[p] is not None]
    if len(ids) < 4:
        return t
    post = [float(data.post[p]["thermometer"]) for p in ids]
    pre = [float(data.participants[p].pre_survey["thermometer"]) for p in ids]
    res = factor_contribution(post, pre, np.array([fr[p] for p in ids]), skip_degenerate=True)
    for name in sorted(res, key=lambda s: int(s[1:])):
        r = res[name]
        term = f"fraction_{name}"
        if r is None:
            t.rows.append([name, math.nan, math.nan, math.nan, math.nan, math.nan, len(ids), "degenerate"])
            continue
        i = r.index(term)
        t.rows.append([name, float(r.coef[i]), float(r._se_used[i]), float(r.ci_low[i]), float(r.ci_high[i]),
                       float(r.pvalues[i]), r.n_obs, ""])
    return t


def cooccurrence_table(data: StudyData) -> Table:
    """Pearson correlation between factor indicators over distinct viewed political posts."""
    seen = sorted({e.post_id for evs in data.events.values() for e in evs if e.qualifying_view})
    political = [data.scores[p] for p in seen if data.scores[p].is_political]
    t = Table("factor_cooccurrence", ["factor"] + [f"v{i + 1}" for i in range(N_FACTORS)])
    if len(political) < 2:
        return t
    corr = factor_cooccurrence(political)
    for i in range(N_FACTORS):
        t.rows.append([f"v{i + 1}"] + [float(v) for v in corr[i]])
    return t


def daily_table(data: StudyData) -> Table:
    from .experiment import daily_metric_rows
    t = Table("daily_metrics", ["participant_id", "experiment", "arm", "day", "metric", "value"])
    for pid in data.ids():
        a = data.assignments[pid]
        for _, day, metric, value in daily_metric_rows(data.events.get(pid, []), a, data.config, data.tz(pid)):
            t.rows.append([pid, a.experiment.value, a.arm.value, day, metric, value])
    return t


def analyze(data: StudyData, experiment: Optional[Experiment] = None, n_draws: int = RI_DRAWS,
            include_daily: bool = True) -> dict[str, Table]:
    exposure = exposure_table(data, experiment)
    infeed = infeed_table(data, experiment)
    post = post_table(data, experiment)
    engagement = engagement_table(data, experiment)
    tables = [
        assignment_table(data), exposure, exposure_change_table(exposure), infeed, post, engagement,
        ri_table(data, experiment, n_draws), fdr_table(infeed, post, engagement), hte_table(data, experiment),
        factor_table(data, experiment), cooccurrence_table(data),
    ]
    if include_daily:
        tables.append(daily_table(data))
    return {t.name: t for t in tables}


def write_tables(source, out: str | Path, experiment: Optional[Experiment] = None,
                 n_draws: int = RI_DRAWS) -> dict[str, Table]:
    """Analyze a bundle (StudyBundle, Store, StudyData or directory) and write ``<name>.csv`` files."""
    data = as_data(source)
    tables = analyze(data, experiment, n_draws)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    for name, table in tables.items():
        (out / f"{name}.csv").write_text(table.to_csv(), encoding="utf-8")
    return tables


def as_data(source) -> StudyData:
    if isinstance(source, StudyData):
        return source
    if isinstance(source, Store):
        return StudyData.from_store(source)
    if isinstance(source, (str, Path)):
        return StudyData.open(source)
    store = getattr(source, "store", None)
    if store is not None:
        return StudyData.from_store(store, getattr(source, "study_config", None))
    raise TypeError(f"cannot analyze {type(source).__name__}")
