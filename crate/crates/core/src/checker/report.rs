use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::ratio::{self, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Estimated,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Estimated => "estimated",
        }
    }
}

/// A violation: `left` should have been at least `right`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub inputs: BTreeMap<String, String>,
    #[serde(with = "ratio::serde_str")]
    pub left: Rational,
    #[serde(with = "ratio::serde_str")]
    pub right: Rational,
    /// `left - right`, strictly negative.
    #[serde(with = "ratio::serde_str")]
    pub margin: Rational,
}

impl Witness {
    pub fn new(inputs: BTreeMap<String, String>, left: Rational, right: Rational) -> Self {
        let margin = &left - &right;
        Witness {
            inputs,
            left,
            right,
            margin,
        }
    }
}

/// A Monte Carlo point estimate with a two-sided radius at the configured
/// confidence. The radius is rounded up to a rational.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Estimate {
    pub inputs: BTreeMap<String, String>,
    #[serde(with = "ratio::serde_str")]
    pub value: Rational,
    #[serde(with = "ratio::serde_str")]
    pub radius: Rational,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stats {
    /// Number of elementary comparisons covered.
    pub instances: u64,
    /// Total number of violating instances (witness list may be truncated).
    pub violations: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub estimates: Vec<Estimate>,
    /// Smallest margin seen over all comparisons, when meaningful.
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        with = "ratio::serde_opt_str"
    )]
    pub min_margin: Option<Rational>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    /// Wall-clock time; kept out of serialized reports so they stay
    /// byte-stable.
    #[serde(skip)]
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub property: String,
    pub verdict: Verdict,
    pub witnesses: Vec<Witness>,
    pub stats: Stats,
}

/// Witnesses kept per report; `stats.violations` has the full count.
pub const MAX_WITNESSES: usize = 32;

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.verdict != Verdict::Fail
    }

    /// Builds an exact-mode report from witnesses listed in enumeration order.
    pub(crate) fn exact(property: &str, instances: u64, mut witnesses: Vec<Witness>) -> Self {
        let violations = witnesses.len() as u64;
        witnesses.truncate(MAX_WITNESSES);
        CheckReport {
            property: property.to_string(),
            verdict: if witnesses.is_empty() {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
            witnesses,
            stats: Stats {
                instances,
                violations,
                ..Stats::default()
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{}: {} ({} instances, {} violations, {:.3}s)\n",
            self.property,
            self.verdict.as_str().to_uppercase(),
            self.stats.instances,
            self.stats.violations,
            self.stats.elapsed.as_secs_f64()
        );
        if let Some(s) = self.stats.samples {
            out += &format!("  samples per estimate: {s}\n");
        }
        if let Some(m) = &self.stats.min_margin {
            out += &format!("  minimum margin: {}\n", ratio::format(m));
        }
        for note in &self.stats.notes {
            out += &format!("  note: {note}\n");
        }
        for e in &self.stats.estimates {
            out += &format!(
                "  estimate {}: {} +/- {}\n",
                fmt_inputs(&e.inputs),
                ratio::format(&e.value),
                ratio::format(&e.radius)
            );
        }
        for w in &self.witnesses {
            out += &format!(
                "  witness {}: left {} right {} margin {}\n",
                fmt_inputs(&w.inputs),
                ratio::format(&w.left),
                ratio::format(&w.right),
                ratio::format(&w.margin)
            );
        }
        out
    }
}

fn fmt_inputs(inputs: &BTreeMap<String, String>) -> String {
    inputs
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// `BTreeMap` literal for witness inputs.
macro_rules! inputs {
    ($($k:expr => $v:expr),* $(,)?) => {{
        let mut m = ::std::collections::BTreeMap::new();
        $( m.insert(String::from($k), $v.to_string()); )*
        m
    }};
}
pub(crate) use inputs;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::int;

    #[test]
    fn verdict_tracks_witnesses() {
        let pass = CheckReport::exact("p", 3, vec![]);
        assert_eq!(pass.verdict, Verdict::Pass);
        let w = Witness::new(inputs!("agent" => 1), int(0), int(1));
        assert_eq!(w.margin, int(-1));
        let fail = CheckReport::exact("p", 3, vec![w; 40]);
        assert_eq!(fail.verdict, Verdict::Fail);
        assert_eq!(fail.witnesses.len(), MAX_WITNESSES);
        assert_eq!(fail.stats.violations, 40);
    }

    #[test]
    fn json_round_trip_keeps_rationals_exact() {
        let mut r = CheckReport::exact(
            "bic",
            9,
            vec![Witness::new(inputs!("t" => "hi"), crate::ratio::frac(1, 3), int(1))],
        );
        r.stats.min_margin = Some(crate::ratio::frac(-2, 3));
        let json = r.to_json();
        assert!(json.contains("\"-2/3\""));
        assert!(!json.contains("0.33"));
        let back: CheckReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }
}
