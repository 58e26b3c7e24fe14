//! Seeded synthetic cohorts with a planted latent factor structure.
//!
//! Deficits follow a liability-threshold model: each participant draws
//! correlated normal latents, every item's liability is its loadings times
//! the latents plus independent noise (plus an optional age drift), and the
//! deficit is present when the liability exceeds the item's threshold.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use thiserror::Error;

use crate::ingest::{
    Cohort, DeficitCatalog, DeficitEntry, ExclusionLog, ParticipantRecord, Rule, Sex, OUTCOME_MAX,
};
use crate::linalg::sym_eigen;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    Spec(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
}

/// Share of participants per age band 65-69, 70-79, 80-89, 90-99.
pub const AGE_BAND_SHARES: [f64; 4] = [0.260, 0.472, 0.232, 0.036];
const AGE_BANDS: [(u32, u32); 4] = [(65, 69), (70, 79), (80, 89), (90, 99)];

/// Location and spread of the generated quality-of-life scores.
pub const OUTCOME_MEAN: f64 = 42.64;
pub const OUTCOME_SD: f64 = 8.11;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    pub ids: Vec<String>,
    #[serde(default)]
    pub descriptions: Vec<String>,
    /// p rows of k liability loadings.
    pub loadings: Vec<Vec<f64>>,
    /// k × k latent correlation matrix.
    pub phi: Vec<Vec<f64>>,
    /// Liability threshold per deficit; higher means rarer.
    pub thresholds: Vec<f64>,
    /// Liability shift per decade of age above 65, per deficit.
    #[serde(default)]
    pub age_drift: Vec<f64>,
    /// Outcome weight per latent factor.
    pub outcome_weights: Vec<f64>,
    #[serde(default)]
    pub outcome_sex_weight: f64,
    pub outcome_noise_sd: f64,
    pub missing_rate: f64,
    #[serde(default = "default_female_share")]
    pub female_share: f64,
    pub seed: u64,
}

fn default_female_share() -> f64 {
    0.566
}

impl SynthSpec {
    pub fn p(&self) -> usize {
        self.ids.len()
    }

    pub fn k(&self) -> usize {
        self.phi.len()
    }

    pub fn loadings_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.p(), self.k(), |i, j| self.loadings[i][j])
    }

    pub fn phi_matrix(&self) -> DMatrix<f64> {
        let k = self.k();
        DMatrix::from_fn(k, k, |i, j| self.phi[i][j])
    }

    /// Planted communality λᵢᵀ Φ λᵢ of each deficit.
    pub fn communalities(&self) -> Vec<f64> {
        let l = self.loadings_matrix();
        let lp = &l * self.phi_matrix();
        (0..self.p()).map(|i| lp.row(i).dot(&l.row(i))).collect()
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let err = |m: String| Err(SynthError::Spec(m));
        let (p, k) = (self.p(), self.k());
        if self.n == 0 {
            return err("n must be positive".into());
        }
        if p < 2 || k == 0 {
            return err(format!("need p >= 2 and k >= 1 (p = {p}, k = {k})"));
        }
        if self.loadings.len() != p || self.loadings.iter().any(|r| r.len() != k) {
            return err(format!("loadings must be {p} x {k}"));
        }
        if self.phi.iter().any(|r| r.len() != k) {
            return err(format!("phi must be {k} x {k}"));
        }
        if self.thresholds.len() != p || self.thresholds.iter().any(|t| t.is_nan()) {
            return err(format!("need {p} non-NaN thresholds"));
        }
        if !self.age_drift.is_empty() && self.age_drift.len() != p {
            return err(format!("age_drift must be empty or have {p} entries"));
        }
        if self.outcome_weights.len() != k {
            return err(format!("need {k} outcome weights"));
        }
        if !(0.0..=0.2).contains(&self.missing_rate) {
            return err(format!("missing_rate {} outside [0, 0.2]", self.missing_rate));
        }
        if !(0.0..=1.0).contains(&self.female_share) {
            return err("female_share outside [0, 1]".into());
        }
        if self.outcome_noise_sd < 0.0 {
            return err("outcome_noise_sd must be non-negative".into());
        }
        let phi = self.phi_matrix();
        for i in 0..k {
            if (phi[(i, i)] - 1.0).abs() > 1e-12 {
                return err("phi must have a unit diagonal".into());
            }
            for j in 0..i {
                if (phi[(i, j)] - phi[(j, i)]).abs() > 1e-12 {
                    return err("phi must be symmetric".into());
                }
            }
        }
        let min_eig = sym_eigen(&phi)
            .and_then(|e| e.values.last().copied())
            .unwrap_or(f64::NAN);
        if !(min_eig >= -1e-10) {
            return err("phi must be positive semidefinite".into());
        }
        if let Some((i, h2)) = self
            .communalities()
            .into_iter()
            .enumerate()
            .find(|(_, h2)| *h2 > 1.0 + 1e-12)
        {
            return err(format!("communality of `{}` is {h2} > 1", self.ids[i]));
        }
        Ok(())
    }

    /// Deficits modelled on the 58-item ELSA index. Item prevalences follow
    /// the reference marginals. Each item loads on its dominant reference
    /// subdimension, plus any secondary subdimension with a strong reference
    /// coefficient. Reference coefficients are on the phi scale, so they are
    /// divided by the item's dichotomization attenuation to reach the
    /// liability scale.
    pub fn elsa_like(n: usize, seed: u64) -> Self {
        let p = ELSA_ITEMS.len();
        let drift = 0.15;
        let mean_decades = mean_decades_above_65();
        let normal = Normal::standard();
        let loadings: Vec<Vec<f64>> = ELSA_ITEMS
            .iter()
            .map(|item| {
                let primary = (0..4)
                    .max_by(|&a, &b| item.reference[a].abs().total_cmp(&item.reference[b].abs()))
                    .unwrap_or(0);
                let scale = 1.0 / attenuation(&normal, item.prevalence);
                let mut row: Vec<f64> = item
                    .reference
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| {
                        if j == primary || v.abs() >= ELSA_SECONDARY_MIN {
                            v * scale
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let h2: f64 = (0..4)
                    .flat_map(|a| (0..4).map(move |b| (a, b)))
                    .map(|(a, b)| row[a] * ELSA_PHI[a][b] * row[b])
                    .sum();
                if h2 > ELSA_MAX_COMMUNALITY {
                    let s = (ELSA_MAX_COMMUNALITY / h2).sqrt();
                    row.iter_mut().for_each(|v| *v *= s);
                }
                row
            })
            .collect();
        let thresholds = ELSA_ITEMS
            .iter()
            .map(|item| normal.inverse_cdf(1.0 - item.prevalence) + drift * mean_decades)
            .collect();
        Self {
            n,
            ids: ELSA_ITEMS.iter().map(|i| i.id.to_string()).collect(),
            descriptions: ELSA_ITEMS.iter().map(|i| i.description.to_string()).collect(),
            loadings,
            phi: ELSA_PHI.iter().map(|r| r.to_vec()).collect(),
            thresholds,
            age_drift: vec![drift; p],
            outcome_weights: vec![-0.37, 0.08, -0.40, -0.04],
            outcome_sex_weight: 0.19,
            outcome_noise_sd: 0.8,
            missing_rate: 0.01,
            female_share: default_female_share(),
            seed,
        }
    }

    /// Simple-structure spec: `k` blocks of `per_factor` items with a common
    /// loading, thresholds cycling through `prevalences`.
    pub fn simple_structure(
        n: usize,
        k: usize,
        per_factor: usize,
        loading: f64,
        prevalences: &[f64],
        seed: u64,
    ) -> Self {
        let p = k * per_factor;
        let normal = Normal::standard();
        Self {
            n,
            ids: (1..=p).map(|i| format!("d{i:02}")).collect(),
            descriptions: Vec::new(),
            loadings: (0..p)
                .map(|i| (0..k).map(|j| if i / per_factor == j { loading } else { 0.0 }).collect())
                .collect(),
            phi: (0..k)
                .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect(),
            thresholds: (0..p)
                .map(|i| normal.inverse_cdf(1.0 - prevalences[i % prevalences.len()]))
                .collect(),
            age_drift: Vec::new(),
            outcome_weights: vec![0.0; k],
            outcome_sex_weight: 0.0,
            outcome_noise_sd: 1.0,
            missing_rate: 0.0,
            female_share: default_female_share(),
            seed,
        }
    }
}

/// φ(τ) / √(π(1 − π)) for prevalence π with τ = Φ⁻¹(1 − π).
fn attenuation(normal: &Normal, prevalence: f64) -> f64 {
    if prevalence <= 0.0 || prevalence >= 1.0 {
        return 0.0;
    }
    let t = normal.inverse_cdf(1.0 - prevalence);
    normal.pdf(t) / (prevalence * (1.0 - prevalence)).sqrt()
}

fn mean_decades_above_65() -> f64 {
    AGE_BAND_SHARES
        .iter()
        .zip(AGE_BANDS)
        .map(|(w, (lo, hi))| w * ((lo + hi) as f64 / 2.0 - 65.0) / 10.0)
        .sum()
}

/// A generated cohort together with the latent scores that produced it.
#[derive(Debug, Clone)]
pub struct Synthesized {
    pub cohort: Cohort,
    /// N × k latent factor scores, rows aligned with `cohort.records`.
    pub latents: DMatrix<f64>,
}

fn sample_age<R: Rng>(rng: &mut R) -> u32 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (share, (lo, hi)) in AGE_BAND_SHARES.iter().zip(AGE_BANDS) {
        acc += share;
        if u < acc {
            return rng.random_range(lo..=hi);
        }
    }
    let (lo, hi) = AGE_BANDS[3];
    rng.random_range(lo..=hi)
}

/// Draws a cohort from the spec. Row `i` uses its own ChaCha stream, so the
/// output is identical however the rows are scheduled.
pub fn generate(spec: &SynthSpec) -> Result<Synthesized, SynthError> {
    spec.validate()?;
    let (p, k) = (spec.p(), spec.k());
    let loadings = spec.loadings_matrix();
    // Symmetric square root of Φ maps independent normals to correlated latents.
    let root = {
        let e = sym_eigen(&spec.phi_matrix())
            .ok_or_else(|| SynthError::Spec("phi eigendecomposition failed".into()))?;
        let d = DVector::from_iterator(k, e.values.iter().map(|v| v.max(0.0).sqrt()));
        &e.vectors * DMatrix::from_diagonal(&d) * e.vectors.transpose()
    };
    let unique_sd: Vec<f64> = spec
        .communalities()
        .iter()
        .map(|h2| (1.0 - h2).max(0.0).sqrt())
        .collect();
    let latent_var = {
        let w = DVector::from_column_slice(&spec.outcome_weights);
        (w.transpose() * spec.phi_matrix() * &w)[(0, 0)]
    };
    let raw_sd = (latent_var
        + spec.outcome_sex_weight.powi(2) * spec.female_share * (1.0 - spec.female_share)
        + spec.outcome_noise_sd.powi(2))
    .sqrt();
    let sex_mean = spec.female_share * spec.outcome_sex_weight;
    let width = (spec.n.max(1) as f64).log10().floor() as usize + 1;

    let rows: Vec<(ParticipantRecord, Vec<f64>)> = (0..spec.n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(i as u64);
            let z = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
            let f = &root * z;
            let age = sample_age(&mut rng);
            let sex = if rng.random::<f64>() < spec.female_share {
                Sex::Female
            } else {
                Sex::Male
            };
            let decades = (age as f64 - 65.0) / 10.0;
            let deficits = (0..p)
                .map(|j| {
                    let noise: f64 = rng.sample(StandardNormal);
                    let drift = spec.age_drift.get(j).copied().unwrap_or(0.0);
                    let liability =
                        loadings.row(j).dot(&f.transpose()) + unique_sd[j] * noise + drift * decades;
                    let present = liability > spec.thresholds[j];
                    let missing = spec.missing_rate > 0.0 && rng.random::<f64>() < spec.missing_rate;
                    (!missing).then_some(present)
                })
                .collect();
            let noise: f64 = rng.sample(StandardNormal);
            let raw = f.dot(&DVector::from_column_slice(&spec.outcome_weights))
                + spec.outcome_sex_weight * sex.indicator()
                - sex_mean
                + spec.outcome_noise_sd * noise;
            let outcome = if raw_sd > 0.0 {
                (OUTCOME_MEAN + OUTCOME_SD * raw / raw_sd).round().clamp(0.0, OUTCOME_MAX)
            } else {
                OUTCOME_MEAN.round()
            };
            let record = ParticipantRecord {
                id: format!("S{:0width$}", i + 1),
                age,
                sex,
                deficits,
                outcome: Some(outcome),
            };
            (record, f.iter().copied().collect())
        })
        .collect();

    let latents = DMatrix::from_fn(spec.n, k, |i, j| rows[i].1[j]);
    let entries = spec
        .ids
        .iter()
        .enumerate()
        .map(|(j, id)| DeficitEntry {
            id: id.clone(),
            description: spec.descriptions.get(j).cloned().unwrap_or_default(),
            rule: Rule::Binary,
        })
        .collect();
    let catalog = DeficitCatalog::new(entries).map_err(|e| SynthError::Spec(e.to_string()))?;
    Ok(Synthesized {
        cohort: Cohort {
            records: rows.into_iter().map(|(r, _)| r).collect(),
            catalog,
            exclusion_log: ExclusionLog::default(),
            input_rows: spec.n,
        },
        latents,
    })
}

/// Tucker congruence coefficient Σxy / √(Σx² Σy²).
pub fn congruence(x: &[f64], y: &[f64]) -> f64 {
    let xy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let xx: f64 = x.iter().map(|a| a * a).sum();
    let yy: f64 = y.iter().map(|b| b * b).sum();
    if xx == 0.0 || yy == 0.0 {
        0.0
    } else {
        xy / (xx * yy).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Alignment {
    /// `permutation[j]` is the recovered column matched to planted column `j`.
    pub permutation: Vec<usize>,
    /// Sign applied to that recovered column.
    pub signs: Vec<f64>,
    /// Congruence of each planted column with its aligned match.
    pub congruence: Vec<f64>,
}

impl Alignment {
    /// Recovered columns reordered and re-signed to match the planted ones.
    pub fn apply(&self, recovered: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(recovered.nrows(), self.permutation.len(), |i, j| {
            self.signs[j] * recovered[(i, self.permutation[j])]
        })
    }
}

/// Greedy matching of recovered to planted factors by absolute congruence.
pub fn align(recovered: &DMatrix<f64>, planted: &DMatrix<f64>) -> Result<Alignment, SynthError> {
    if recovered.shape() != planted.shape() {
        return Err(SynthError::Shape(format!(
            "recovered {:?} vs planted {:?}",
            recovered.shape(),
            planted.shape()
        )));
    }
    let k = planted.ncols();
    let col = |m: &DMatrix<f64>, j: usize| m.column(j).iter().copied().collect::<Vec<_>>();
    let cong = DMatrix::from_fn(k, k, |r, q| congruence(&col(recovered, r), &col(planted, q)));

    let mut permutation = vec![usize::MAX; k];
    let mut signs = vec![1.0; k];
    let mut congruences = vec![0.0; k];
    let mut used = vec![false; k];
    for _ in 0..k {
        let mut best: Option<(usize, usize)> = None;
        for r in (0..k).filter(|&r| !used[r]) {
            for q in (0..k).filter(|&q| permutation[q] == usize::MAX) {
                if best.is_none_or(|(br, bq)| cong[(r, q)].abs() > cong[(br, bq)].abs()) {
                    best = Some((r, q));
                }
            }
        }
        let (r, q) = best.expect("an unmatched pair remains");
        used[r] = true;
        permutation[q] = r;
        signs[q] = if cong[(r, q)] < 0.0 { -1.0 } else { 1.0 };
        congruences[q] = cong[(r, q)].abs();
    }
    Ok(Alignment {
        permutation,
        signs,
        congruence: congruences,
    })
}

/// Non-dominant reference coefficients below this magnitude are planted as zero.
const ELSA_SECONDARY_MIN: f64 = 0.30;
const ELSA_MAX_COMMUNALITY: f64 = 0.85;

const ELSA_PHI: [[f64; 4]; 4] = [
    [1.0, 0.5, 0.3, 0.1],
    [0.5, 1.0, 0.2, 0.2],
    [0.3, 0.2, 1.0, 0.1],
    [0.1, 0.2, 0.1, 1.0],
];

pub struct ElsaItem {
    pub id: &'static str,
    pub description: &'static str,
    pub prevalence: f64,
    /// Four-factor reference pattern coefficients.
    pub reference: [f64; 4],
}

pub const ELSA_ITEMS: [ElsaItem; 58] = [
    ElsaItem {
        id: "hemobwa",
        description: "Difficulty walking 100m",
        prevalence: 0.164,
        reference: [0.64, 0.17, -0.03, -0.03],
    },
    ElsaItem {
        id: "hemobsi",
        description: "Difficulty sitting 2 hrs",
        prevalence: 0.121,
        reference: [0.49, -0.03, 0.01, -0.10],
    },
    ElsaItem {
        id: "hemobch",
        description: "Difficulty getting up from chair",
        prevalence: 0.271,
        reference: [0.67, -0.06, 0.00, -0.03],
    },
    ElsaItem {
        id: "hemobcs",
        description: "Difficulty climbing several flights of stairs without resting",
        prevalence: 0.383,
        reference: [0.73, -0.09, 0.01, 0.09],
    },
    ElsaItem {
        id: "hemobcl",
        description: "Difficulty climbing one flight of stairs without resting",
        prevalence: 0.179,
        reference: [0.67, 0.11, -0.01, 0.01],
    },
    ElsaItem {
        id: "hemobst",
        description: "Difficulty stooping, kneeling or crouching",
        prevalence: 0.45,
        reference: [0.69, -0.11, -0.01, 0.04],
    },
    ElsaItem {
        id: "hemobre",
        description: "Difficulty extending arms above shoulders",
        prevalence: 0.119,
        reference: [0.40, 0.15, 0.04, -0.11],
    },
    ElsaItem {
        id: "hemobpu",
        description: "Difficulty pulling or pushing large objects",
        prevalence: 0.2,
        reference: [0.66, 0.11, 0.03, -0.01],
    },
    ElsaItem {
        id: "hemobli",
        description: "Difficulty lifting or carrying weights over 10 pounds",
        prevalence: 0.261,
        reference: [0.69, 0.05, 0.03, 0.05],
    },
    ElsaItem {
        id: "hemobpi",
        description: "Difficulty picking up a 5p coin",
        prevalence: 0.077,
        reference: [0.22, 0.27, 0.01, -0.14],
    },
    ElsaItem {
        id: "headldr",
        description: "Difficulty dressing",
        prevalence: 0.154,
        reference: [0.44, 0.28, 0.02, -0.16],
    },
    ElsaItem {
        id: "headlwa",
        description: "Difficulty walking across a room",
        prevalence: 0.051,
        reference: [0.24, 0.47, -0.01, -0.19],
    },
    ElsaItem {
        id: "headlba",
        description: "Difficulty bathing",
        prevalence: 0.112,
        reference: [0.32, 0.47, 0.04, -0.14],
    },
    ElsaItem {
        id: "headlea",
        description: "Difficulty eating, such as cutting up food",
        prevalence: 0.034,
        reference: [0.05, 0.53, 0.03, -0.21],
    },
    ElsaItem {
        id: "headlbe",
        description: "Difficulty getting in and out of bed",
        prevalence: 0.074,
        reference: [0.30, 0.38, 0.05, -0.25],
    },
    ElsaItem {
        id: "headlwc",
        description: "Difficulty using the toilet",
        prevalence: 0.051,
        reference: [0.16, 0.49, 0.04, -0.26],
    },
    ElsaItem {
        id: "headlma",
        description: "Difficulty using map",
        prevalence: 0.065,
        reference: [0.00, 0.60, 0.05, 0.01],
    },
    ElsaItem {
        id: "headlpr",
        description: "Difficulty preparing a hot meal",
        prevalence: 0.07,
        reference: [0.10, 0.72, 0.03, -0.04],
    },
    ElsaItem {
        id: "headlsh",
        description: "Difficulty shopping for groceries",
        prevalence: 0.117,
        reference: [0.36, 0.48, 0.06, -0.04],
    },
    ElsaItem {
        id: "headlph",
        description: "Difficulty making phone calls",
        prevalence: 0.043,
        reference: [-0.06, 0.69, -0.02, 0.03],
    },
    ElsaItem {
        id: "headlme",
        description: "Difficulty taking medications",
        prevalence: 0.045,
        reference: [-0.05, 0.77, 0.00, 0.15],
    },
    ElsaItem {
        id: "headlhg",
        description: "Difficulty doing housework / gardening",
        prevalence: 0.194,
        reference: [0.57, 0.23, 0.04, -0.01],
    },
    ElsaItem {
        id: "headlmo",
        description: "Difficulty managing money",
        prevalence: 0.056,
        reference: [-0.02, 0.75, 0.04, 0.19],
    },
    ElsaItem {
        id: "hedimbp",
        description: "High blood pressure",
        prevalence: 0.454,
        reference: [0.24, -0.12, 0.01, 0.07],
    },
    ElsaItem {
        id: "hediman",
        description: "Angina",
        prevalence: 0.036,
        reference: [0.16, -0.01, 0.00, 0.05],
    },
    ElsaItem {
        id: "hedimmi",
        description: "Heart attack",
        prevalence: 0.035,
        reference: [0.14, 0.05, -0.03, 0.06],
    },
    ElsaItem {
        id: "hedimhf",
        description: "Congestive heart failure",
        prevalence: 0.014,
        reference: [0.16, 0.00, 0.01, 0.08],
    },
    ElsaItem {
        id: "hedimar",
        description: "Abnormal heart rhythm",
        prevalence: 0.107,
        reference: [0.19, -0.06, 0.02, 0.09],
    },
    ElsaItem {
        id: "hedimdi",
        description: "Diabetes",
        prevalence: 0.143,
        reference: [0.19, -0.05, 0.00, 0.08],
    },
    ElsaItem {
        id: "hedimst",
        description: "Stroke",
        prevalence: 0.049,
        reference: [0.14, 0.11, 0.00, 0.06],
    },
    ElsaItem {
        id: "hediblu",
        description: "Lung disease",
        prevalence: 0.068,
        reference: [0.26, -0.10, 0.00, 0.06],
    },
    ElsaItem {
        id: "hedibas",
        description: "Asthma",
        prevalence: 0.116,
        reference: [0.18, -0.09, 0.03, 0.04],
    },
    ElsaItem {
        id: "hedibar",
        description: "Arthritis",
        prevalence: 0.488,
        reference: [0.48, -0.23, 0.02, 0.02],
    },
    ElsaItem {
        id: "hedibos",
        description: "Osteoporosis",
        prevalence: 0.124,
        reference: [0.20, -0.01, 0.08, 0.00],
    },
    ElsaItem {
        id: "hedibca",
        description: "Cancer",
        prevalence: 0.1,
        reference: [0.07, 0.00, 0.03, -0.01],
    },
    ElsaItem {
        id: "hedibpd",
        description: "Parkinson's",
        prevalence: 0.012,
        reference: [0.06, 0.11, -0.02, -0.04],
    },
    ElsaItem {
        id: "hedibps",
        description: "Psychiatric condition",
        prevalence: 0.079,
        reference: [0.14, -0.05, 0.16, -0.01],
    },
    ElsaItem {
        id: "hedibad",
        description: "Alzheimer's",
        prevalence: 0.01,
        reference: [-0.13, 0.42, 0.02, 0.14],
    },
    ElsaItem {
        id: "hedibde",
        description: "Dementia",
        prevalence: 0.03,
        reference: [0.00, 0.48, -0.03, 0.29],
    },
    ElsaItem {
        id: "psceda",
        description: "Depressed",
        prevalence: 0.105,
        reference: [-0.05, 0.01, 0.72, -0.01],
    },
    ElsaItem {
        id: "pscedb",
        description: "Felt everything was an effort",
        prevalence: 0.187,
        reference: [0.31, -0.03, 0.47, 0.00],
    },
    ElsaItem {
        id: "pscedc",
        description: "Restless sleep",
        prevalence: 0.403,
        reference: [0.17, -0.12, 0.26, -0.02],
    },
    ElsaItem {
        id: "pscedd",
        description: "Lack of happiness",
        prevalence: 0.075,
        reference: [-0.10, 0.01, 0.65, -0.01],
    },
    ElsaItem {
        id: "pscede",
        description: "Loneliness",
        prevalence: 0.105,
        reference: [0.03, -0.01, 0.50, 0.03],
    },
    ElsaItem {
        id: "pscedf",
        description: "Lack of life enjoyment",
        prevalence: 0.075,
        reference: [-0.02, 0.04, 0.59, 0.01],
    },
    ElsaItem {
        id: "pscedg",
        description: "Sadness",
        prevalence: 0.169,
        reference: [-0.03, -0.03, 0.60, 0.00],
    },
    ElsaItem {
        id: "pscedh",
        description: "Could not get going much of the time",
        prevalence: 0.189,
        reference: [0.29, -0.02, 0.40, 0.05],
    },
    ElsaItem {
        id: "hehelp",
        description: "Self-reported general health",
        prevalence: 0.267,
        reference: [0.59, -0.10, 0.15, 0.08],
    },
    ElsaItem {
        id: "heeye",
        description: "Eyesight impairment",
        prevalence: 0.042,
        reference: [0.10, 0.27, 0.03, -0.04],
    },
    ElsaItem {
        id: "hehear",
        description: "Hearing impairment",
        prevalence: 0.255,
        reference: [0.17, 0.05, 0.04, 0.05],
    },
    ElsaItem {
        id: "hefla",
        description: "Fall",
        prevalence: 0.281,
        reference: [0.26, -0.01, 0.06, 0.06],
    },
    ElsaItem {
        id: "hefrac",
        description: "Hip fracture",
        prevalence: 0.011,
        reference: [0.10, 0.06, -0.02, 0.04],
    },
    ElsaItem {
        id: "heji",
        description: "Joint replacement",
        prevalence: 0.043,
        reference: [0.16, -0.09, -0.01, 0.04],
    },
    ElsaItem {
        id: "mmpain",
        description: "Pain whilst walking",
        prevalence: 0.077,
        reference: [0.30, -0.09, 0.05, -0.05],
    },
    ElsaItem {
        id: "cfdatd",
        description: "Whether correct day of month given",
        prevalence: 0.163,
        reference: [0.14, 0.07, 0.02, 0.32],
    },
    ElsaItem {
        id: "cfdatm",
        description: "Whether correct month given",
        prevalence: 0.029,
        reference: [0.11, 0.12, 0.00, 0.54],
    },
    ElsaItem {
        id: "cfdaty",
        description: "Whether correct year given",
        prevalence: 0.033,
        reference: [0.13, 0.18, 0.00, 0.55],
    },
    ElsaItem {
        id: "cfday",
        description: "Whether correct day given",
        prevalence: 0.021,
        reference: [0.04, 0.18, 0.02, 0.45],
    },
];

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec(seed: u64) -> SynthSpec {
        SynthSpec::simple_structure(300, 2, 3, 0.7, &[0.2, 0.4], seed)
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let a = generate(&small_spec(5)).unwrap();
        let b = generate(&small_spec(5)).unwrap();
        let c = generate(&small_spec(6)).unwrap();
        assert_eq!(a.cohort, b.cohort);
        assert_eq!(a.latents, b.latents);
        assert_ne!(a.cohort.records, c.cohort.records);
    }

    #[test]
    fn infinite_threshold_never_fires() {
        let mut spec = small_spec(1);
        spec.thresholds[0] = f64::INFINITY;
        let s = generate(&spec).unwrap();
        assert!(s.cohort.records.iter().all(|r| r.deficits[0] == Some(false)));
    }

    #[test]
    fn zero_missing_rate_has_no_missing_cells() {
        let s = generate(&small_spec(2)).unwrap();
        assert!(s.cohort.records.iter().all(|r| r.missing_count() == 0));
        let mut spec = small_spec(2);
        spec.missing_rate = 0.2;
        let s = generate(&spec).unwrap();
        assert!(s.cohort.records.iter().any(|r| r.missing_count() > 0));
    }

    #[test]
    fn outcomes_and_ages_are_in_range() {
        let s = generate(&SynthSpec::elsa_like(500, 3)).unwrap();
        for r in &s.cohort.records {
            let o = r.outcome.unwrap();
            assert!((0.0..=OUTCOME_MAX).contains(&o));
            assert!((65..=99).contains(&r.age));
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = small_spec(0);
        spec.missing_rate = 0.3;
        assert!(matches!(generate(&spec), Err(SynthError::Spec(_))));
        let mut spec = small_spec(0);
        spec.loadings[0] = vec![0.9, 0.9];
        assert!(matches!(generate(&spec), Err(SynthError::Spec(_))));
        let mut spec = small_spec(0);
        spec.phi = vec![vec![1.0, 1.5], vec![1.5, 1.0]];
        assert!(matches!(generate(&spec), Err(SynthError::Spec(_))));
    }

    #[test]
    fn elsa_preset_is_valid() {
        let spec = SynthSpec::elsa_like(10, 0);
        spec.validate().unwrap();
        assert_eq!(spec.p(), 58);
        assert_eq!(spec.k(), 4);
    }

    #[test]
    fn alignment_undoes_permutation_and_sign() {
        let planted = DMatrix::from_row_slice(
            6,
            2,
            &[0.7, 0.0, 0.7, 0.0, 0.7, 0.0, 0.0, 0.6, 0.0, 0.6, 0.1, 0.6],
        );
        let same = align(&planted, &planted).unwrap();
        assert!(same.congruence.iter().all(|c| (c - 1.0).abs() < 1e-12));
        let mut swapped = DMatrix::zeros(6, 2);
        swapped.set_column(0, &(-planted.column(1)));
        swapped.set_column(1, &planted.column(0));
        let a = align(&swapped, &planted).unwrap();
        assert_eq!(a.permutation, vec![1, 0]);
        assert_eq!(a.signs, vec![1.0, -1.0]);
        assert!(a.congruence.iter().all(|c| (c - 1.0).abs() < 1e-12));
        assert!((a.apply(&swapped) - &planted).amax() < 1e-15);
    }
}
