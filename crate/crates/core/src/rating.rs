//! Rating state space and the two observation paradigms: discretely observed
//! transition panels and fully observed per-entity event histories.
//!
//! Time is decimal years relative to a per-dataset epoch. Withdrawal is
//! right-censoring, never a state. States are 0-based internally; the wire
//! formats always carry labels.
//!
//! # File formats
//!
//! Scale definition, JSON:
//! `{ "labels": [...], "default": "C", "withdrawal": "WR", "investment_cutoff": "Baa" }`
//! where `default` must be the last label and `investment_cutoff` may be
//! omitted (defaulting to the first half of the non-default states).
//!
//! Discrete panel, CSV with header `period,dt_years,from,to,count`, one row
//! per nonzero count; rows touching the withdrawal label are dropped as
//! censored.
//!
//! Event history, CSV with header `entity_id,time_years,rating`. The first
//! row of an entity is its initial rating. A withdrawal-label row censors the
//! entity at that time; a default-label row is a jump to default; a final row
//! repeating the entity's current rating marks the end of the observation
//! window (open track). A repeated rating anywhere else is an error.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;

/// Ordered rating labels; index 0 is the best grade and the last label is the
/// absorbing default state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatingScale {
    labels: Vec<String>,
    withdrawal: String,
    /// 0-based index of the worst investment grade.
    investment_cutoff: usize,
}

#[derive(Serialize, Deserialize)]
struct ScaleJson {
    labels: Vec<String>,
    default: String,
    #[serde(default = "default_withdrawal")]
    withdrawal: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    investment_cutoff: Option<String>,
}

fn default_withdrawal() -> String {
    "WR".to_string()
}

impl RatingScale {
    /// `investment_cutoff` is the label of the worst investment grade; when
    /// `None`, the first ⌊(h−1)/2⌋ states are investment grade.
    pub fn new(
        labels: Vec<String>,
        withdrawal: impl Into<String>,
        investment_cutoff: Option<&str>,
    ) -> Result<Self> {
        let h = labels.len();
        if h < 2 {
            return Err(Error::Invalid("a rating scale needs at least 2 states".into()));
        }
        let withdrawal = withdrawal.into();
        let mut seen = std::collections::HashSet::new();
        for l in labels.iter().chain(std::iter::once(&withdrawal)) {
            if l.is_empty() || l.contains([',', '"', '\n', '\r']) {
                return Err(Error::Invalid(format!(
                    "label {l:?} is empty or contains CSV delimiter characters"
                )));
            }
        }
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::Invalid(format!("duplicate rating label {l:?}")));
            }
            if *l == withdrawal {
                return Err(Error::Invalid(format!(
                    "withdrawal label {withdrawal:?} collides with a rating label"
                )));
            }
        }
        let cutoff = match investment_cutoff {
            Some(lbl) => {
                let idx = labels.iter().position(|l| l == lbl).ok_or_else(|| {
                    Error::Invalid(format!("investment cutoff {lbl:?} is not a rating label"))
                })?;
                if idx + 1 >= h {
                    return Err(Error::Invalid(
                        "investment cutoff cannot be the default state".into(),
                    ));
                }
                idx
            }
            // (h-1)/2 states counted 1-based, so 0-based index (h-1)/2 - 1.
            None => ((h - 1) / 2).max(1) - 1,
        };
        Ok(RatingScale {
            labels,
            withdrawal,
            investment_cutoff: cutoff,
        })
    }

    pub fn h(&self) -> usize {
        self.labels.len()
    }

    /// 0-based index of the absorbing default state (the last one).
    pub fn default_state(&self) -> usize {
        self.labels.len() - 1
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, state: usize) -> &str {
        &self.labels[state]
    }

    pub fn withdrawal_label(&self) -> &str {
        &self.withdrawal
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// 0-based index of the worst investment grade.
    pub fn investment_cutoff(&self) -> usize {
        self.investment_cutoff
    }

    pub fn is_investment(&self, state: usize) -> bool {
        state <= self.investment_cutoff
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: ScaleJson = serde_json::from_str(s)?;
        if raw.labels.last().map(String::as_str) != Some(raw.default.as_str()) {
            return Err(Error::Invalid(format!(
                "default label {:?} must be the last entry of labels",
                raw.default
            )));
        }
        RatingScale::new(raw.labels, raw.withdrawal, raw.investment_cutoff.as_deref())
    }

    pub fn from_json_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        let raw = ScaleJson {
            labels: self.labels.clone(),
            default: self.labels.last().cloned().unwrap_or_default(),
            withdrawal: self.withdrawal.clone(),
            investment_cutoff: Some(self.labels[self.investment_cutoff].clone()),
        };
        serde_json::to_string_pretty(&raw).expect("scale serializes")
    }
}

/// One panel record: the count matrix N(u) observed over an interval Δt_u.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelObservation<F> {
    pub dt: F,
    /// h×h row-major counts; row `default_state` must be zero off-diagonal.
    pub counts: Vec<Vec<u64>>,
}

/// A sequence of interval transition-count observations over a shared scale.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePanel<F> {
    scale: RatingScale,
    observations: Vec<PanelObservation<F>>,
}

impl<F: Real> DiscretePanel<F> {
    pub fn new(scale: RatingScale, observations: Vec<PanelObservation<F>>) -> Result<Self> {
        let h = scale.h();
        let d = scale.default_state();
        let mut total: u64 = 0;
        for (u, obs) in observations.iter().enumerate() {
            if !(obs.dt > F::zero()) {
                return Err(Error::Invalid(format!(
                    "observation {u}: dt must be positive, got {}",
                    obs.dt
                )));
            }
            if obs.counts.len() != h || obs.counts.iter().any(|r| r.len() != h) {
                return Err(Error::Invalid(format!(
                    "observation {u}: count matrix must be {h}x{h}"
                )));
            }
            for j in 0..h {
                if j != d && obs.counts[d][j] > 0 {
                    return Err(Error::Invalid(format!(
                        "observation {u}: default row has off-diagonal count {} -> {}",
                        scale.label(d),
                        scale.label(j)
                    )));
                }
            }
            total += obs.counts.iter().flatten().sum::<u64>();
        }
        if total == 0 {
            return Err(Error::Empty("panel has no transitions at all".into()));
        }
        Ok(DiscretePanel {
            scale,
            observations,
        })
    }

    pub fn scale(&self) -> &RatingScale {
        &self.scale
    }

    pub fn observations(&self) -> &[PanelObservation<F>] {
        &self.observations
    }

    pub fn total_count(&self) -> u64 {
        self.observations
            .iter()
            .map(|o| o.counts.iter().flatten().sum::<u64>())
            .sum()
    }

    /// Parses the `period,dt_years,from,to,count` CSV. Withdrawal rows are
    /// dropped (censored); duplicate cells within a period accumulate.
    pub fn parse_csv(path: impl AsRef<Path>, scale: &RatingScale) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse_csv_str(&text, scale, &path.display().to_string())
    }

    pub fn parse_csv_str(text: &str, scale: &RatingScale, path: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let err_at = |line: usize, msg: String| Error::Parse {
            path: path.to_string(),
            line,
            msg,
        };
        {
            let headers = reader.headers()?;
            let expect = ["period", "dt_years", "from", "to", "count"];
            if headers.iter().collect::<Vec<_>>() != expect {
                return Err(err_at(1, format!("header must be {}", expect.join(","))));
            }
        }
        let h = scale.h();
        let d = scale.default_state();
        // period -> (dt, counts)
        let mut periods: Vec<(u64, F, Vec<Vec<u64>>)> = Vec::new();
        let mut index: HashMap<u64, usize> = HashMap::new();
        for (rec_no, rec) in reader.records().enumerate() {
            let line = rec_no + 2;
            let rec = rec?;
            if rec.len() != 5 {
                return Err(err_at(line, format!("expected 5 fields, got {}", rec.len())));
            }
            let period: u64 = rec[0]
                .parse()
                .map_err(|_| err_at(line, format!("bad period {:?}", &rec[0])))?;
            let dt_raw = rec[1].trim();
            if dt_raw.is_empty() {
                return Err(err_at(line, "missing dt_years".into()));
            }
            let dt_f64: f64 = dt_raw
                .parse()
                .map_err(|_| err_at(line, format!("bad dt_years {:?}", dt_raw)))?;
            if !(dt_f64 > 0.0) {
                return Err(err_at(line, format!("dt_years must be positive, got {dt_f64}")));
            }
            let count_i: i64 = rec[4]
                .parse()
                .map_err(|_| err_at(line, format!("bad count {:?}", &rec[4])))?;
            if count_i < 0 {
                return Err(err_at(line, format!("negative count {count_i}")));
            }
            let from_raw = &rec[2];
            let to_raw = &rec[3];
            // Withdrawal means censored: the row carries no transition.
            if from_raw == scale.withdrawal_label() || to_raw == scale.withdrawal_label() {
                continue;
            }
            let from = scale
                .index_of(from_raw)
                .ok_or_else(|| err_at(line, format!("unknown rating label {from_raw:?}")))?;
            let to = scale
                .index_of(to_raw)
                .ok_or_else(|| err_at(line, format!("unknown rating label {to_raw:?}")))?;
            if from == d && to != d && count_i > 0 {
                return Err(err_at(
                    line,
                    format!(
                        "absorbing-state violation: transition out of default {} -> {}",
                        scale.label(from),
                        scale.label(to)
                    ),
                ));
            }
            let slot = *index.entry(period).or_insert_with(|| {
                periods.push((period, F::of(dt_f64), vec![vec![0u64; h]; h]));
                periods.len() - 1
            });
            let (_, dt_seen, counts) = &mut periods[slot];
            if (dt_seen.as_f64() - dt_f64).abs() > 0.0 {
                return Err(err_at(
                    line,
                    format!("period {period} has conflicting dt_years values"),
                ));
            }
            counts[from][to] += count_i as u64;
        }
        periods.sort_by_key(|(p, _, _)| *p);
        let observations = periods
            .into_iter()
            .map(|(_, dt, counts)| PanelObservation { dt, counts })
            .collect();
        DiscretePanel::new(scale.clone(), observations)
    }

    /// Inverse of [`DiscretePanel::parse_csv`]: one row per nonzero cell,
    /// periods numbered from 1.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("period,dt_years,from,to,count\n");
        for (u, obs) in self.observations.iter().enumerate() {
            let h = self.scale.h();
            for i in 0..h {
                for j in 0..h {
                    if obs.counts[i][j] > 0 {
                        let _ = writeln!(
                            out,
                            "{},{},{},{},{}",
                            u + 1,
                            obs.dt,
                            self.scale.label(i),
                            self.scale.label(j),
                            obs.counts[i][j]
                        );
                    }
                }
            }
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}

/// How an entity leaves observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Terminal<F> {
    /// Withdrawn (right-censored) at this time.
    Censored(F),
    /// Jumped to the default state at this time; the last event is that jump.
    Defaulted(F),
    /// Still under observation when the window closes at this time.
    Open(F),
}

impl<F: Copy> Terminal<F> {
    pub fn time(&self) -> F {
        match *self {
            Terminal::Censored(t) | Terminal::Defaulted(t) | Terminal::Open(t) => t,
        }
    }
}

/// One entity's continuously observed rating path.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityTrack<F> {
    pub entity_id: String,
    pub start_time: F,
    pub start_state: usize,
    /// Strictly time-increasing rating changes.
    pub events: Vec<(F, usize)>,
    pub terminal: Terminal<F>,
}

impl<F: Real> EntityTrack<F> {
    pub fn validate(&self, scale: &RatingScale) -> Result<()> {
        let h = scale.h();
        let d = scale.default_state();
        let id = &self.entity_id;
        if id.is_empty() || id.contains([',', '"', '\n', '\r']) {
            return Err(Error::Invalid(format!(
                "entity id {id:?} is empty or contains CSV delimiter characters"
            )));
        }
        if self.start_state >= h {
            return Err(Error::Invalid(format!("{id}: start state out of range")));
        }
        let mut t_prev = self.start_time;
        let mut s_prev = self.start_state;
        for &(t, s) in &self.events {
            if s >= h {
                return Err(Error::Invalid(format!("{id}: event state out of range")));
            }
            if !(t > t_prev) || !t.is_finite() {
                return Err(Error::Invalid(format!(
                    "{id}: event times must be strictly increasing ({t} after {t_prev})"
                )));
            }
            if s == s_prev {
                return Err(Error::Invalid(format!(
                    "{id}: rating change to the same rating {} at t={t}",
                    scale.label(s)
                )));
            }
            if s_prev == d {
                return Err(Error::Invalid(format!("{id}: event after default at t={t}")));
            }
            t_prev = t;
            s_prev = s;
        }
        let term_t = self.terminal.time();
        if term_t < t_prev {
            return Err(Error::Invalid(format!(
                "{id}: terminal time {term_t} precedes the last event at {t_prev}"
            )));
        }
        match self.terminal {
            Terminal::Defaulted(td) => {
                let ok = self.events.last().map(|&(t, s)| s == d && t == td) == Some(true);
                if !ok {
                    return Err(Error::Invalid(format!(
                        "{id}: defaulted terminal must coincide with a final jump to {}",
                        scale.label(d)
                    )));
                }
            }
            Terminal::Censored(_) | Terminal::Open(_) => {
                if s_prev == d {
                    return Err(Error::Invalid(format!(
                        "{id}: track ends in default but is not marked defaulted"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn terminal_time(&self) -> F {
        self.terminal.time()
    }

    /// Rating at time t (right-continuous path); None before the start.
    pub fn state_at(&self, t: F) -> Option<usize> {
        if t < self.start_time {
            return None;
        }
        let mut s = self.start_state;
        for &(te, se) in &self.events {
            if te <= t {
                s = se;
            } else {
                break;
            }
        }
        Some(s)
    }

    /// True when the entity is observed over the whole of [t0, t1]:
    /// started on or before t0 and not censored before t1 (a default inside
    /// the window is kept: the state is absorbed at default).
    pub fn observed_through(&self, t0: F, t1: F) -> bool {
        if self.start_time > t0 {
            return false;
        }
        match self.terminal {
            Terminal::Defaulted(_) => true,
            Terminal::Censored(tc) => tc >= t1,
            Terminal::Open(te) => te >= t1,
        }
    }
}

/// A set of entity tracks over a shared scale.
#[derive(Debug, Clone, PartialEq)]
pub struct EventHistory<F> {
    scale: RatingScale,
    tracks: Vec<EntityTrack<F>>,
}

impl<F: Real> EventHistory<F> {
    pub fn new(scale: RatingScale, tracks: Vec<EntityTrack<F>>) -> Result<Self> {
        for tr in &tracks {
            tr.validate(&scale)?;
        }
        Ok(EventHistory { scale, tracks })
    }

    pub fn scale(&self) -> &RatingScale {
        &self.scale
    }

    pub fn tracks(&self) -> &[EntityTrack<F>] {
        &self.tracks
    }

    pub fn n_transitions(&self) -> usize {
        self.tracks.iter().map(|t| t.events.len()).sum()
    }

    /// Parses the `entity_id,time_years,rating` CSV. Rows may arrive in any
    /// order; they are grouped by entity (keeping first-appearance order) and
    /// sorted by time within an entity.
    pub fn parse_csv(path: impl AsRef<Path>, scale: &RatingScale) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse_csv_str(&text, scale, &path.display().to_string())
    }

    pub fn parse_csv_str(text: &str, scale: &RatingScale, path: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let err_at = |line: usize, msg: String| Error::Parse {
            path: path.to_string(),
            line,
            msg,
        };
        {
            let headers = reader.headers()?;
            let expect = ["entity_id", "time_years", "rating"];
            if headers.iter().collect::<Vec<_>>() != expect {
                return Err(err_at(1, format!("header must be {}", expect.join(","))));
            }
        }
        // entity -> rows of (time, raw label, csv line)
        let mut order: Vec<String> = Vec::new();
        let mut rows: HashMap<String, Vec<(f64, String, usize)>> = HashMap::new();
        for (rec_no, rec) in reader.records().enumerate() {
            let line = rec_no + 2;
            let rec = rec?;
            if rec.len() != 3 {
                return Err(err_at(line, format!("expected 3 fields, got {}", rec.len())));
            }
            let id = rec[0].to_string();
            let t: f64 = rec[1]
                .parse()
                .map_err(|_| err_at(line, format!("bad time_years {:?}", &rec[1])))?;
            if !t.is_finite() {
                return Err(err_at(line, "non-finite time_years".into()));
            }
            let entry = rows.entry(id.clone()).or_insert_with(|| {
                order.push(id);
                Vec::new()
            });
            entry.push((t, rec[2].to_string(), line));
        }
        if order.is_empty() {
            return Err(Error::Empty(format!("{path}: no event rows")));
        }

        let d = scale.default_state();
        let mut tracks = Vec::with_capacity(order.len());
        for id in order {
            let mut entity_rows = rows.remove(&id).unwrap();
            entity_rows.sort_by(|a, b| a.0.total_cmp(&b.0));
            for w in entity_rows.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(err_at(
                        w[1].2,
                        format!("{id}: duplicate timestamp {}", w[0].0),
                    ));
                }
            }
            let (t0, first_label, first_line) = entity_rows[0].clone();
            if first_label == scale.withdrawal_label() {
                return Err(err_at(
                    first_line,
                    format!("{id}: first row may not be the withdrawal label"),
                ));
            }
            let start_state = scale
                .index_of(&first_label)
                .ok_or_else(|| err_at(first_line, format!("unknown rating label {first_label:?}")))?;

            let mut events: Vec<(F, usize)> = Vec::new();
            let mut terminal: Option<Terminal<F>> = None;
            let mut current = start_state;
            let n_rows = entity_rows.len();
            for (k, (t, label, line)) in entity_rows.into_iter().enumerate().skip(1) {
                if terminal.is_some() {
                    return Err(err_at(line, format!("{id}: row after the track ended")));
                }
                if label == scale.withdrawal_label() {
                    terminal = Some(Terminal::Censored(F::of(t)));
                    continue;
                }
                let s = scale
                    .index_of(&label)
                    .ok_or_else(|| err_at(line, format!("unknown rating label {label:?}")))?;
                if current == d {
                    return Err(err_at(line, format!("{id}: event after default")));
                }
                if s == current {
                    // Only a trailing same-rating row is meaningful: it marks
                    // the end of the observation window.
                    if k + 1 == n_rows {
                        terminal = Some(Terminal::Open(F::of(t)));
                    } else {
                        return Err(err_at(
                            line,
                            format!("{id}: rating change to the same rating {label:?}"),
                        ));
                    }
                    continue;
                }
                events.push((F::of(t), s));
                current = s;
                if s == d {
                    terminal = Some(Terminal::Defaulted(F::of(t)));
                }
            }
            let terminal = terminal.unwrap_or_else(|| {
                Terminal::Open(events.last().map(|&(t, _)| t).unwrap_or(F::of(t0)))
            });
            tracks.push(EntityTrack {
                entity_id: id,
                start_time: F::of(t0),
                start_state,
                events,
                terminal,
            });
        }
        EventHistory::new(scale.clone(), tracks)
    }

    /// Inverse of [`EventHistory::parse_csv`].
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("entity_id,time_years,rating\n");
        for tr in &self.tracks {
            let _ = writeln!(
                out,
                "{},{},{}",
                tr.entity_id,
                tr.start_time,
                self.scale.label(tr.start_state)
            );
            let mut last = (tr.start_time, tr.start_state);
            for &(t, s) in &tr.events {
                let _ = writeln!(out, "{},{},{}", tr.entity_id, t, self.scale.label(s));
                last = (t, s);
            }
            match tr.terminal {
                Terminal::Censored(tc) => {
                    let _ = writeln!(
                        out,
                        "{},{},{}",
                        tr.entity_id,
                        tc,
                        self.scale.withdrawal_label()
                    );
                }
                Terminal::Defaulted(_) => {} // the default jump is already a row
                Terminal::Open(te) => {
                    if te > last.0 {
                        let _ =
                            writeln!(out, "{},{},{}", tr.entity_id, te, self.scale.label(last.1));
                    }
                }
            }
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    /// Endpoint-samples every track on a regular grid, counting the rating at
    /// the start vs the end of each interval (the standard cohort method).
    ///
    /// Entities censored inside an interval contribute nothing there. A
    /// default inside an interval counts as a transition into the default
    /// state; afterwards the entity is held at default, or — with
    /// `reseed_defaults` — read as its pre-default rating at later grid
    /// points, mimicking replacement by a fresh firm that is observed making
    /// no further transitions.
    pub fn discretize(
        &self,
        grid_step: F,
        window: (F, F),
        reseed_defaults: bool,
    ) -> Result<DiscretePanel<F>> {
        if !(grid_step > F::zero()) {
            return Err(Error::Invalid("grid_step must be positive".into()));
        }
        let (t0, t1) = window;
        if !(t1 > t0) {
            return Err(Error::Invalid("window must have positive length".into()));
        }
        let n_intervals = ((t1 - t0) / grid_step + F::of(1e-9)).floor().as_f64() as usize;
        if n_intervals == 0 {
            return Err(Error::Invalid(
                "window shorter than one grid interval".into(),
            ));
        }
        let h = self.scale.h();
        let _d = self.scale.default_state();
        let mut observations: Vec<PanelObservation<F>> = (0..n_intervals)
            .map(|_| PanelObservation {
                dt: grid_step,
                counts: vec![vec![0u64; h]; h],
            })
            .collect();

        let mut any = false;
        for (k, obs) in observations.iter_mut().enumerate() {
            let a = t0 + grid_step * F::of(k as f64);
            let b = a + grid_step;
            for tr in &self.tracks {
                if !tr.observed_through(a, b) {
                    continue;
                }
                let covered = |t: F| tr.state_at(t).expect("observed_through covers the window");
                // The interval containing the default still records the jump
                // into default; re-seeding only rewrites later intervals.
                let (from, to) = match (reseed_defaults, tr.terminal) {
                    (true, Terminal::Defaulted(td)) if td <= a => {
                        let p = pre_default_state(tr);
                        (p, p)
                    }
                    _ => (covered(a), covered(b)),
                };
                obs.counts[from][to] += 1;
                any = true;
            }
        }
        if !any {
            return Err(Error::Empty(
                "no entity overlaps the discretization window".into(),
            ));
        }
        DiscretePanel::new(self.scale.clone(), observations)
    }
}

fn pre_default_state<F: Real>(tr: &EntityTrack<F>) -> usize {
    debug_assert!(matches!(tr.terminal, Terminal::Defaulted(_)));
    if tr.events.len() >= 2 {
        tr.events[tr.events.len() - 2].1
    } else {
        tr.start_state
    }
}
