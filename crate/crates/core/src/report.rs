//! Pass/fail bookkeeping for inequality checks.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

/// Relative slack applied to every right-hand side.
pub const RELATIVE_SLACK: f64 = 1e-9;

/// Absolute floor added to every right-hand side, so that underflowed values compare sanely.
pub const ABSOLUTE_FLOOR: f64 = 1e-300;

/// Tolerance model for `lhs ≤ rhs`: passes iff `lhs ≤ rhs·(1 + relative) + absolute`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slack {
    pub relative: f64,
    pub absolute: f64,
}

impl Default for Slack {
    fn default() -> Self {
        Self {
            relative: RELATIVE_SLACK,
            absolute: ABSOLUTE_FLOOR,
        }
    }
}

impl Slack {
    pub fn admits(&self, lhs: f64, rhs: f64) -> bool {
        lhs <= rhs * (1.0 + self.relative) + self.absolute
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `|d_{k+1}^i| ≤ C_i·|d_k^i|`.
    GeneralRatio,
    /// `|d_{k+1}^i| ≤ θ·|d_k^i|` when the mode of `d_{k−1}^i` allows it.
    ConditionalContraction,
    /// `|d_k^i| ≤ F_i·θ^k`.
    Envelope,
    /// `κ = 1`: `|d_k^i| ≤ 0` for `k ≥ 1`.
    DegenerateZero,
    /// Interior coefficients of the two-mode worst-case run stay at zero.
    OrbitInterior,
    /// `‖g_k‖/‖g_0‖` against `((κ−1)/(κ+1))^k` (relative deviation ≤ tolerance).
    OrbitRate,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::GeneralRatio => "general_ratio",
            Family::ConditionalContraction => "conditional_contraction",
            Family::Envelope => "envelope",
            Family::DegenerateZero => "degenerate_zero",
            Family::OrbitInterior => "orbit_interior",
            Family::OrbitRate => "orbit_rate",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One checked inequality. `i` is 1-based, matching the eigenvalue ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub family: Family,
    pub i: usize,
    pub k: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySummary {
    pub family: Family,
    pub checked: usize,
    pub passed: usize,
    pub skipped: usize,
    /// Smallest `rhs − lhs` over checked entries.
    pub worst_margin: Option<f64>,
    /// `(i, k)` of the entry attaining `worst_margin`.
    pub argmin: Option<(usize, usize)>,
    /// Largest `lhs / rhs` over entries with positive `rhs`.
    pub max_ratio: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub entries: Vec<Entry>,
    pub skipped: BTreeMap<Family, usize>,
    /// Free-form observations (degenerate special cases, measured horizons, ...).
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `lhs ≤ rhs` under `slack` and returns whether it held.
    pub fn check(
        &mut self,
        family: Family,
        i: usize,
        k: usize,
        lhs: f64,
        rhs: f64,
        slack: &Slack,
    ) -> bool {
        let pass = slack.admits(lhs, rhs);
        self.entries.push(Entry {
            family,
            i,
            k,
            lhs,
            rhs,
            pass,
            margin: rhs - lhs,
        });
        pass
    }

    pub fn skip(&mut self, family: Family) {
        *self.skipped.entry(family).or_default() += 1;
    }

    /// Makes `family` appear in summaries even when nothing was checked.
    pub fn touch(&mut self, family: Family) {
        self.skipped.entry(family).or_default();
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn merge(&mut self, other: VerificationReport) {
        self.entries.extend(other.entries);
        for (family, n) in other.skipped {
            *self.skipped.entry(family).or_default() += n;
        }
        self.notes.extend(other.notes);
    }

    pub fn failures(&self) -> impl Iterator<Item = &Entry> {
        self.entries.iter().filter(|e| !e.pass)
    }

    pub fn failure_count(&self) -> usize {
        self.failures().count()
    }

    pub fn is_success(&self) -> bool {
        self.failure_count() == 0
    }

    pub fn summaries(&self) -> Vec<FamilySummary> {
        let mut by_family: BTreeMap<Family, FamilySummary> = BTreeMap::new();
        let blank = |family| FamilySummary {
            family,
            checked: 0,
            passed: 0,
            skipped: 0,
            worst_margin: None,
            argmin: None,
            max_ratio: None,
        };
        for (&family, &n) in &self.skipped {
            by_family
                .entry(family)
                .or_insert_with(|| blank(family))
                .skipped = n;
        }
        for e in &self.entries {
            let s = by_family.entry(e.family).or_insert_with(|| blank(e.family));
            s.checked += 1;
            s.passed += usize::from(e.pass);
            if s.worst_margin.is_none_or(|m| e.margin < m) {
                s.worst_margin = Some(e.margin);
                s.argmin = Some((e.i, e.k));
            }
            if e.rhs > 0.0 {
                let r = e.lhs / e.rhs;
                if s.max_ratio.is_none_or(|m| r > m) {
                    s.max_ratio = Some(r);
                }
            }
        }
        by_family.into_values().collect()
    }

    pub fn summary(&self, family: Family) -> Option<FamilySummary> {
        self.summaries().into_iter().find(|s| s.family == family)
    }

    /// Per-family summaries plus notes, as written to `verification.json`.
    pub fn to_summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "success": self.is_success(),
            "failures": self.failure_count(),
            "families": self.summaries(),
            "notes": self.notes,
        })
    }

    /// Full per-entry table: `family,i,k,lhs,rhs,pass,margin`.
    pub fn write_entries_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["family", "i", "k", "lhs", "rhs", "pass", "margin"])?;
        for e in &self.entries {
            w.write_record([
                e.family.name().to_string(),
                e.i.to_string(),
                e.k.to_string(),
                format!("{:.16e}", e.lhs),
                format!("{:.16e}", e.rhs),
                e.pass.to_string(),
                format!("{:.16e}", e.margin),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
