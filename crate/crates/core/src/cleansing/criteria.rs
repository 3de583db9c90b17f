use alloc::collections::BTreeMap;
use alloc::string::ToString;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::Filters;
use crate::error::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Playback,
    Earpods,
    Trapping,
    Environment,
    Gold,
    Variance,
    Qualification,
    CertificateIntegrity,
    Headset,
}

impl Criterion {
    pub const ALL: [Criterion; 9] = [
        Criterion::Playback,
        Criterion::Earpods,
        Criterion::Trapping,
        Criterion::Environment,
        Criterion::Gold,
        Criterion::Variance,
        Criterion::Qualification,
        Criterion::CertificateIntegrity,
        Criterion::Headset,
    ];

    /// Criteria deciding whether the submission is paid.
    pub const ACCEPTANCE: [Criterion; 3] = [Criterion::Playback, Criterion::Earpods, Criterion::Trapping];

    /// Further criteria deciding whether accepted ratings enter analysis.
    pub const USABILITY: [Criterion; 5] = [
        Criterion::Environment,
        Criterion::Gold,
        Criterion::Variance,
        Criterion::Qualification,
        Criterion::CertificateIntegrity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::Playback => "playback",
            Criterion::Earpods => "earpods",
            Criterion::Trapping => "trapping",
            Criterion::Environment => "environment",
            Criterion::Gold => "gold",
            Criterion::Variance => "variance",
            Criterion::Qualification => "qualification",
            Criterion::CertificateIntegrity => "certificate_integrity",
            Criterion::Headset => "headset",
        }
    }

    /// Whether the filter takes part in the accept / usable decision.
    pub fn enabled(self, filters: &Filters) -> bool {
        match self {
            Criterion::Playback => filters.playback,
            Criterion::Earpods => filters.earpods,
            Criterion::Trapping => filters.trapping,
            Criterion::Environment => filters.environment,
            Criterion::Gold => filters.gold,
            Criterion::Variance => filters.variance,
            Criterion::Qualification => filters.qualification,
            Criterion::CertificateIntegrity => filters.certificate_integrity,
            Criterion::Headset => filters.headset,
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Criterion {
    type Err = StatsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Criterion::ALL
            .into_iter()
            .find(|c| c.as_str() == s.trim())
            .ok_or_else(|| StatsError::UnknownCriterion(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    Pass,
    Fail,
    NotApplicable,
}

impl Flag {
    pub fn from_bool(ok: bool) -> Flag {
        if ok {
            Flag::Pass
        } else {
            Flag::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Flag::Pass => "pass",
            Flag::Fail => "fail",
            Flag::NotApplicable => "not_applicable",
        }
    }

    /// Anything but a failure.
    pub fn ok(self) -> bool {
        self != Flag::Fail
    }
}

/// One flag per criterion; unset criteria read as not applicable.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CriterionFlags(BTreeMap<Criterion, Flag>);

impl CriterionFlags {
    pub fn get(&self, c: Criterion) -> Flag {
        self.0.get(&c).copied().unwrap_or(Flag::NotApplicable)
    }

    pub fn set(&mut self, c: Criterion, flag: Flag) {
        self.0.insert(c, flag);
    }

    pub fn iter(&self) -> impl Iterator<Item = (Criterion, Flag)> + '_ {
        Criterion::ALL.into_iter().map(|c| (c, self.get(c)))
    }
}

impl FromIterator<(Criterion, Flag)> for CriterionFlags {
    fn from_iter<I: IntoIterator<Item = (Criterion, Flag)>>(iter: I) -> Self {
        CriterionFlags(iter.into_iter().collect())
    }
}

/// The two-tier decision: `(accepted, usable)`. Disabled filters do not
/// contribute; the headset filter joins usability only when enabled.
pub fn decide(flags: &CriterionFlags, filters: &Filters) -> (bool, bool) {
    let holds = |c: Criterion| !c.enabled(filters) || flags.get(c).ok();
    let accepted = Criterion::ACCEPTANCE.into_iter().all(holds);
    let usable = accepted && Criterion::USABILITY.into_iter().all(holds) && holds(Criterion::Headset);
    (accepted, usable)
}

/// How accepted submissions are split into a passed and a failed group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    Criterion(Criterion),
    /// Passed = usable under the configured filters.
    AllFilters,
}

impl Grouping {
    pub fn name(self) -> &'static str {
        match self {
            Grouping::Criterion(c) => c.as_str(),
            Grouping::AllFilters => "all",
        }
    }
}

impl fmt::Display for Grouping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Grouping {
    type Err = StatsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "all" => Ok(Grouping::AllFilters),
            other => other.parse().map(Grouping::Criterion),
        }
    }
}
