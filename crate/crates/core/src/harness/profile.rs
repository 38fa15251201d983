use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub const MIN_AGE_YEARS: u32 = 65;
pub const MAX_AGE_YEARS: u32 = 85;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exclusion {
    SeverePsychiatric,
    ContinuousMedicalAssistance,
    NotIndependentDaily,
    MotorImpairment,
}

impl Exclusion {
    pub const ALL: [Exclusion; 4] =
        [Exclusion::SeverePsychiatric, Exclusion::ContinuousMedicalAssistance, Exclusion::NotIndependentDaily, Exclusion::MotorImpairment];

    pub fn as_str(self) -> &'static str {
        match self {
            Exclusion::SeverePsychiatric => "severe_psychiatric",
            Exclusion::ContinuousMedicalAssistance => "continuous_medical_assistance",
            Exclusion::NotIndependentDaily => "not_independent_daily",
            Exclusion::MotorImpairment => "motor_impairment",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticipantProfile {
    pub id: String,
    pub age_years: u32,
    pub mci_diagnosed: bool,
    pub informatics_entry_level: bool,
    #[serde(default)]
    pub exclusions: BTreeSet<Exclusion>,
}

/// A violated eligibility criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "criterion")]
pub enum Ineligibility {
    Age { years: u32 },
    NoMciDiagnosis,
    NotEntryLevel,
    Excluded { exclusion: Exclusion },
}

impl std::fmt::Display for Ineligibility {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Ineligibility::Age { years } => write!(f, "age {years} outside {MIN_AGE_YEARS}-{MAX_AGE_YEARS}"),
            Ineligibility::NoMciDiagnosis => f.write_str("no MCI diagnosis"),
            Ineligibility::NotEntryLevel => f.write_str("informatics skills above entry level"),
            Ineligibility::Excluded { exclusion } => write!(f, "exclusion {}", exclusion.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum Eligibility {
    Eligible,
    Ineligible { reasons: Vec<Ineligibility> },
}

impl Eligibility {
    pub fn is_eligible(&self) -> bool {
        matches!(self, Eligibility::Eligible)
    }
}

/// Every violated criterion is reported, in a fixed order.
pub fn validate_profile(p: &ParticipantProfile) -> Eligibility {
    let mut reasons = Vec::new();
    if !(MIN_AGE_YEARS..=MAX_AGE_YEARS).contains(&p.age_years) {
        reasons.push(Ineligibility::Age { years: p.age_years });
    }
    if !p.mci_diagnosed {
        reasons.push(Ineligibility::NoMciDiagnosis);
    }
    if !p.informatics_entry_level {
        reasons.push(Ineligibility::NotEntryLevel);
    }
    reasons.extend(p.exclusions.iter().map(|&exclusion| Ineligibility::Excluded { exclusion }));
    if reasons.is_empty() {
        Eligibility::Eligible
    } else {
        Eligibility::Ineligible { reasons }
    }
}
