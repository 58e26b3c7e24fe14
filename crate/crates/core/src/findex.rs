//! Frailty index scoring and per-deficit inspection statistics.

use serde::Serialize;
use thiserror::Error;

use crate::ingest::{Cohort, ParticipantRecord, Sex};
use crate::scores::pearson;

#[derive(Debug, Error)]
pub enum FindexError {
    #[error("participant `{0}` has no assessed deficits")]
    DegenerateRecord(String),
    #[error("cohort is empty")]
    EmptyCohort,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrailtyResult {
    pub id: String,
    pub present: usize,
    pub assessed: usize,
    pub fi: f64,
}

/// Proportion of assessed deficits that are present. Missing deficits are
/// left out of both the count and the denominator.
pub fn frailty_index(record: &ParticipantRecord) -> Result<FrailtyResult, FindexError> {
    let assessed = record.deficits.iter().flatten().count();
    if assessed == 0 {
        return Err(FindexError::DegenerateRecord(record.id.clone()));
    }
    let present = record.deficits.iter().flatten().filter(|&&d| d).count();
    Ok(FrailtyResult {
        id: record.id.clone(),
        present,
        assessed,
        fi: present as f64 / assessed as f64,
    })
}

pub fn frailty_indices(cohort: &Cohort) -> Result<Vec<FrailtyResult>, FindexError> {
    cohort.records.iter().map(frailty_index).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AgeBand {
    #[serde(rename = "65-69")]
    From65To69,
    #[serde(rename = "70-79")]
    From70To79,
    #[serde(rename = "80-89")]
    From80To89,
    #[serde(rename = "90+")]
    From90,
}

impl AgeBand {
    pub const ALL: [AgeBand; 4] = [
        AgeBand::From65To69,
        AgeBand::From70To79,
        AgeBand::From80To89,
        AgeBand::From90,
    ];

    pub fn of(age: u32) -> Option<AgeBand> {
        match age {
            65..=69 => Some(AgeBand::From65To69),
            70..=79 => Some(AgeBand::From70To79),
            80..=89 => Some(AgeBand::From80To89),
            90.. => Some(AgeBand::From90),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AgeBand::From65To69 => "65-69",
            AgeBand::From70To79 => "70-79",
            AgeBand::From80To89 => "80-89",
            AgeBand::From90 => "90+",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CriteriaConfig {
    /// Minimum participants per single-year age cell; smaller cells are
    /// merged with their older neighbours.
    pub min_cell: usize,
}

impl Default for CriteriaConfig {
    fn default() -> Self {
        Self { min_cell: 10 }
    }
}

/// Inspection statistics for one deficit. `None` marks a statistic with no
/// observed participants behind it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeficitCriteria {
    pub id: String,
    pub description: String,
    pub n_observed: usize,
    pub prevalence: Option<f64>,
    pub prevalence_male: Option<f64>,
    pub prevalence_female: Option<f64>,
    pub prevalence_by_band: [Option<f64>; 4],
    pub saturated: bool,
    pub age_corr: Option<f64>,
    /// Number of age cells entering `age_corr` after merging.
    pub age_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeficitCriteriaReport {
    pub rows: Vec<DeficitCriteria>,
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    observed: usize,
    present: usize,
}

impl Tally {
    fn add(&mut self, d: bool) {
        self.observed += 1;
        self.present += d as usize;
    }

    fn prevalence(self) -> Option<f64> {
        (self.observed > 0).then(|| self.present as f64 / self.observed as f64)
    }
}

pub fn criteria_report(
    cohort: &Cohort,
    cfg: &CriteriaConfig,
) -> Result<DeficitCriteriaReport, FindexError> {
    if cohort.is_empty() {
        return Err(FindexError::EmptyCohort);
    }
    let min_age = cohort.records.iter().map(|r| r.age).min().unwrap_or(0);
    let max_age = cohort.records.iter().map(|r| r.age).max().unwrap_or(0);
    let span = (max_age - min_age) as usize + 1;

    let rows = cohort
        .catalog
        .entries()
        .iter()
        .enumerate()
        .map(|(j, entry)| {
            let mut total = Tally::default();
            let mut by_sex = [Tally::default(); 2];
            let mut by_band = [Tally::default(); 4];
            let mut by_year = vec![Tally::default(); span];
            for r in &cohort.records {
                let Some(d) = r.deficits[j] else { continue };
                total.add(d);
                by_sex[(r.sex == Sex::Female) as usize].add(d);
                if let Some(b) = AgeBand::of(r.age) {
                    by_band[b as usize].add(d);
                }
                by_year[(r.age - min_age) as usize].add(d);
            }
            let prevalence_by_band = by_band.map(Tally::prevalence);
            let cells = merge_age_cells(min_age, &by_year, cfg.min_cell);
            let (ages, prevs): (Vec<f64>, Vec<f64>) = cells.iter().copied().unzip();
            let age_corr = if cells.len() >= 3 {
                pearson(&ages, &prevs).ok()
            } else {
                None
            };
            DeficitCriteria {
                id: entry.id.clone(),
                description: entry.description.clone(),
                n_observed: total.observed,
                prevalence: total.prevalence(),
                prevalence_male: by_sex[0].prevalence(),
                prevalence_female: by_sex[1].prevalence(),
                prevalence_by_band,
                saturated: prevalence_by_band.iter().flatten().any(|&p| p >= 1.0),
                age_corr,
                age_cells: cells.len(),
            }
        })
        .collect();
    Ok(DeficitCriteriaReport { rows })
}

/// Groups consecutive single-year tallies until each group holds at least
/// `min_cell` observations; a short trailing group joins the one before it.
/// Returns (observation-weighted mean age, prevalence) per group.
fn merge_age_cells(min_age: u32, by_year: &[Tally], min_cell: usize) -> Vec<(f64, f64)> {
    #[derive(Default, Clone, Copy)]
    struct Acc {
        observed: usize,
        present: usize,
        age_sum: f64,
    }
    let mut groups: Vec<Acc> = Vec::new();
    let mut cur = Acc::default();
    for (offset, t) in by_year.iter().enumerate() {
        if t.observed == 0 {
            continue;
        }
        cur.observed += t.observed;
        cur.present += t.present;
        cur.age_sum += (min_age as usize + offset) as f64 * t.observed as f64;
        if cur.observed >= min_cell.max(1) {
            groups.push(cur);
            cur = Acc::default();
        }
    }
    if cur.observed > 0 {
        match groups.last_mut() {
            Some(last) => {
                last.observed += cur.observed;
                last.present += cur.present;
                last.age_sum += cur.age_sum;
            }
            None => groups.push(cur),
        }
    }
    groups
        .iter()
        .map(|g| {
            (
                g.age_sum / g.observed as f64,
                g.present as f64 / g.observed as f64,
            )
        })
        .collect()
}
