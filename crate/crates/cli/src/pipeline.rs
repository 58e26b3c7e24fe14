use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use frailty_core::corr::{
    factorability, pairwise_phi_matrix, smooth_psd, CorrMatrix, FactorabilityReport,
    DEFAULT_MIN_PAIRS,
};
use frailty_core::efa::{
    eigenvalues, extract_minres, fit_stats, parallel_analysis, FitStats, MinresConfig, NullModel,
    ParallelConfig, ParallelResult, UnrotatedSolution, RMSR_GATE,
};
use frailty_core::findex::{criteria_report, frailty_indices, CriteriaConfig, FrailtyResult};
use frailty_core::ingest::{load_catalog, parse_cohort, Cohort, CohortOptions, ExclusionLog};
use frailty_core::regress::{compare_models, fit_standardized, Design, ModelComparison, RegressionFit};
use frailty_core::rotate::{oblimin_rotate, salience, ObliminConfig, RotatedSolution, SalienceReport};
use frailty_core::scores::{regression_scores, score_correlation_report, ScoreMatrix};
use frailty_core::synth::{generate, SynthSpec};

use crate::args::{
    FactorCommand, FactorCount, InputArgs, NullKind, PaArgs, PaCommand, Preset, SynthArgs,
};
use crate::output::{g6, labelled_matrix, opt_g6, OutDir, Table};
use crate::{svg, CliError};

/// How far down the pipeline a command runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Ingest,
    Fi,
    Corr,
    Pa,
    Efa,
    Scores,
    Regress,
    Report,
}

impl Stage {
    fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Fi => "fi",
            Stage::Corr => "corr",
            Stage::Pa => "pa",
            Stage::Efa => "efa",
            Stage::Scores => "scores",
            Stage::Regress => "regress",
            Stage::Report => "report",
        }
    }
}

#[derive(Serialize)]
struct CohortSummary {
    input_rows: usize,
    retained: usize,
    deficits: usize,
    exclusions: ExclusionLog,
    outcome_observed: usize,
}

#[derive(Serialize)]
struct FactorChoice {
    requested: Option<usize>,
    auto: bool,
    suggested_by_pa: Option<usize>,
    used: Option<usize>,
}

#[derive(Serialize)]
struct RunMeta<'a> {
    tool: &'static str,
    version: &'static str,
    core_version: &'static str,
    command: &'static str,
    input: &'a InputArgs,
    #[serde(skip_serializing_if = "Option::is_none")]
    parallel_analysis: Option<&'a PaArgs>,
    #[serde(skip_serializing_if = "Option::is_none")]
    factors: Option<FactorChoice>,
    #[serde(skip_serializing_if = "Option::is_none")]
    salience_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rotation: Option<ObliminConfig>,
    minres: MinresConfig,
    min_pairs: usize,
    rmsr_gate: f64,
    cohort: CohortSummary,
    notes: Vec<String>,
    outputs: Vec<String>,
}

#[derive(Serialize)]
struct CorrSummary<'a> {
    smoothed: bool,
    min_eigenvalue_before_smoothing: f64,
    #[serde(flatten)]
    report: &'a FactorabilityReport,
}

#[derive(Serialize)]
struct EfaFit<'a> {
    n_factors: usize,
    rmsr: f64,
    rmsr_gate: f64,
    acceptable: bool,
    objective_value: f64,
    converged: bool,
    iterations: usize,
    heywood_items: Vec<&'a str>,
    ss_loadings: &'a [f64],
    prop_variance_per_factor: &'a [f64],
    rotation_criterion: f64,
    rotation_converged: bool,
    rotation_iterations: usize,
    rotation_start: usize,
    all_factors_adequate: bool,
}

fn load_cohort(input: &InputArgs) -> Result<Cohort, CliError> {
    let catalog = load_catalog(&input.catalog).map_err(CliError::core)?;
    let opts = CohortOptions {
        min_age: input.min_age,
        max_missing: input.max_missing,
        id_col: input.id_col.clone(),
        age_col: input.age_col.clone(),
        sex_col: input.sex_col.clone(),
        outcome_col: input.outcome_col.clone(),
    };
    let cohort = parse_cohort(&input.input, &catalog, &opts).map_err(CliError::core)?;
    if cohort.records.is_empty() {
        return Err(CliError::Validation(format!(
            "ingest: no participants remain in {} ({} rows read, {} excluded)",
            input.input.display(),
            cohort.input_rows,
            cohort.exclusion_log.total()
        )));
    }
    Ok(cohort)
}

fn cohort_summary(c: &Cohort) -> CohortSummary {
    CohortSummary {
        input_rows: c.input_rows,
        retained: c.records.len(),
        deficits: c.catalog.len(),
        exclusions: c.exclusion_log,
        outcome_observed: c.records.iter().filter(|r| r.outcome.is_some()).count(),
    }
}

fn write_fi(out: &mut OutDir, cohort: &Cohort, fi: &[FrailtyResult]) -> Result<(), CliError> {
    let mut t = Table::new(&["id", "present", "assessed", "fi"]);
    for f in fi {
        t.push(vec![f.id.clone(), f.present.to_string(), f.assessed.to_string(), g6(f.fi)]);
    }
    out.write_csv("fi_scores.csv", &t)?;

    let report = criteria_report(cohort, &CriteriaConfig::default()).map_err(CliError::core)?;
    let mut t = Table::new(&[
        "id",
        "description",
        "n_observed",
        "prevalence",
        "prevalence_male",
        "prevalence_female",
        "prevalence_65_69",
        "prevalence_70_79",
        "prevalence_80_89",
        "prevalence_90_plus",
        "saturated",
        "age_corr",
        "age_cells",
    ]);
    for r in &report.rows {
        let mut row = vec![
            r.id.clone(),
            r.description.clone(),
            r.n_observed.to_string(),
            opt_g6(r.prevalence),
            opt_g6(r.prevalence_male),
            opt_g6(r.prevalence_female),
        ];
        row.extend(r.prevalence_by_band.iter().map(|v| opt_g6(*v)));
        row.push(r.saturated.to_string());
        row.push(opt_g6(r.age_corr));
        row.push(r.age_cells.to_string());
        t.push(row);
    }
    out.write_csv("deficit_criteria.csv", &t)
}

fn write_counts(out: &mut OutDir, c: &CorrMatrix) -> Result<(), CliError> {
    let mut header = vec!["id".to_string()];
    header.extend(c.ids.iter().cloned());
    let mut t = Table::new(&header);
    for (i, id) in c.ids.iter().enumerate() {
        let mut row = vec![id.clone()];
        row.extend(c.n_pairs.row(i).iter().map(|n| n.to_string()));
        t.push(row);
    }
    out.write_csv("corr_npairs.csv", &t)
}

fn parallel(
    out: &mut OutDir,
    cohort: &Cohort,
    c: &CorrMatrix,
    pa: &PaArgs,
) -> Result<ParallelResult, CliError> {
    let m = cohort.deficit_matrix();
    let observed = eigenvalues(&c.r).map_err(CliError::core)?;
    let null = match pa.pa_null {
        NullKind::Normal => NullModel::Normal,
        NullKind::Binary => NullModel::Binary {
            prevalence: (0..m.ncols())
                .map(|j| {
                    let obs: Vec<bool> = m.column(j).flatten().collect();
                    obs.iter().filter(|b| **b).count() as f64 / obs.len().max(1) as f64
                })
                .collect(),
        },
    };
    let cfg = ParallelConfig {
        n_replicates: pa.replicates,
        quantile: pa.quantile,
        seed: pa.seed,
        null,
    };
    let res = parallel_analysis(m.nrows(), m.ncols(), &observed, &cfg).map_err(|e| {
        // Bad replicate counts or quantiles come straight from the flags.
        CliError::Validation(frailty_core::Error::from(e).to_string())
    })?;

    let mut t = Table::new(&["rank", "observed_eig", "pa_threshold"]);
    for (i, (o, q)) in res.observed_eigs.iter().zip(&res.random_eigs_quantile).enumerate() {
        t.push(vec![(i + 1).to_string(), g6(*o), g6(*q)]);
    }
    out.write_csv("scree.csv", &t)?;
    let plot = svg::scree(&res.observed_eigs, &res.random_eigs_quantile).map_err(CliError::Runtime)?;
    out.write_bytes("scree.svg", plot.as_bytes())?;
    out.write_json("parallel_analysis.json", &res)?;
    Ok(res)
}

fn choose_k(count: &FactorCount, pa: &ParallelResult, p: usize) -> Result<usize, CliError> {
    let k = match count.nfactors {
        Some(k) => k,
        None if pa.suggested_k == 0 => {
            return Err(CliError::Runtime(
                "efa: parallel analysis retained no factors; pass --nfactors to override".into(),
            ))
        }
        None => pa.suggested_k,
    };
    if k == 0 || k >= p {
        return Err(CliError::Validation(format!(
            "efa: number of factors must satisfy 1 <= k < {p}, got {k}"
        )));
    }
    Ok(k)
}

fn factor_labels(k: usize) -> Vec<String> {
    (1..=k).map(|j| format!("F{j}")).collect()
}

fn write_efa(
    out: &mut OutDir,
    cohort: &Cohort,
    c: &CorrMatrix,
    sol: &UnrotatedSolution,
    fit: &FitStats,
    rot: &RotatedSolution,
    sal: &SalienceReport,
) -> Result<(), CliError> {
    let k = sol.n_factors();
    let labels = factor_labels(k);
    let entries = cohort.catalog.entries();

    let mut header = vec!["id".to_string()];
    header.extend(labels.iter().cloned());
    header.extend(["communality".to_string(), "uniqueness".to_string()]);
    let mut t = Table::new(&header);
    for (i, id) in c.ids.iter().enumerate() {
        let mut row = vec![id.clone()];
        row.extend(sol.loadings.row(i).iter().map(|v| g6(*v)));
        row.push(g6(sol.communalities[i]));
        row.push(g6(sol.uniquenesses[i]));
        t.push(row);
    }
    out.write_csv("efa_unrotated.csv", &t)?;

    let mut header = vec!["id".to_string(), "description".to_string()];
    header.extend(labels.iter().cloned());
    let mut t = Table::new(&header);
    for (i, e) in entries.iter().enumerate() {
        let mut row = vec![e.id.clone(), e.description.clone()];
        row.extend(rot.pattern.row(i).iter().map(|v| g6(*v)));
        t.push(row);
    }
    out.write_csv("loadings.csv", &t)?;
    out.write_csv("phi.csv", &labelled_matrix("factor", &labels, &rot.phi))?;
    out.write_json("salience.json", sal)?;
    let heat = svg::loading_heatmap(&rot.pattern, &c.ids).map_err(CliError::Runtime)?;
    out.write_bytes("loadings.svg", heat.as_bytes())?;

    out.write_json(
        "efa_fit.json",
        &EfaFit {
            n_factors: k,
            rmsr: fit.rmsr,
            rmsr_gate: RMSR_GATE,
            acceptable: fit.acceptable(),
            objective_value: sol.objective_value,
            converged: sol.converged,
            iterations: sol.iterations,
            heywood_items: sol.heywood.iter().map(|&i| c.ids[i].as_str()).collect(),
            ss_loadings: &fit.ss_loadings,
            prop_variance_per_factor: &fit.prop_variance_per_factor,
            rotation_criterion: rot.criterion_value,
            rotation_converged: rot.converged,
            rotation_iterations: rot.iterations,
            rotation_start: rot.start,
            all_factors_adequate: sal.all_adequate(),
        },
    )
}

fn write_scores(
    out: &mut OutDir,
    scores: &ScoreMatrix,
    fi: &[FrailtyResult],
) -> Result<(), CliError> {
    let k = scores.scores.ncols();
    let mut header = vec!["id".to_string()];
    header.extend(factor_labels(k));
    header.push("fi".into());
    let mut t = Table::new(&header);
    for (i, id) in scores.ids.iter().enumerate() {
        let mut row = vec![id.clone()];
        row.extend(scores.scores.row(i).iter().map(|v| g6(*v)));
        row.push(g6(fi[i].fi));
        t.push(row);
    }
    out.write_csv("scores.csv", &t)?;
    let rep = score_correlation_report(scores, fi).map_err(CliError::core)?;
    out.write_csv("score_correlations.csv", &labelled_matrix("variable", &rep.labels, &rep.r))
}

fn regressions(
    cohort: &Cohort,
    outcome: &str,
    fi: &[FrailtyResult],
    scores: &DMatrix<f64>,
) -> Result<(RegressionFit, RegressionFit, ModelComparison), CliError> {
    let age: Vec<Option<f64>> = cohort.records.iter().map(|r| Some(r.age as f64)).collect();
    let sex: Vec<Option<f64>> = cohort.records.iter().map(|r| Some(r.sex.indicator())).collect();
    let y: Vec<Option<f64>> = cohort.records.iter().map(|r| r.outcome).collect();

    let mut m1 = Design::default();
    m1.push("fi", fi.iter().map(|f| Some(f.fi)).collect());
    m1.push("age", age.clone());
    m1.push("sex", sex.clone());

    let mut m2 = Design::default();
    for (j, label) in factor_labels(scores.ncols()).into_iter().enumerate() {
        m2.push(label, scores.column(j).iter().map(|v| Some(*v)).collect());
    }
    m2.push("age", age);
    m2.push("sex", sex);

    let f1 = fit_standardized(&m1, outcome, &y).map_err(CliError::core)?;
    let f2 = fit_standardized(&m2, outcome, &y).map_err(CliError::core)?;
    let cmp = compare_models(&f1, &f2).map_err(CliError::core)?;
    Ok((f1, f2, cmp))
}

fn write_regressions(
    out: &mut OutDir,
    fits: &(RegressionFit, RegressionFit, ModelComparison),
) -> Result<(), CliError> {
    let mut t = Table::new(&["model", "term", "beta", "se", "t", "p"]);
    for (model, fit) in [("model1", &fits.0), ("model2", &fits.1)] {
        for term in &fit.terms {
            t.push(vec![
                model.to_string(),
                term.name.clone(),
                g6(term.beta),
                g6(term.se),
                g6(term.t),
                g6(term.p),
            ]);
        }
    }
    out.write_csv("regression.csv", &t)?;
    out.write_json("model_comparison.json", &fits.2)
}

struct Options<'a> {
    pa: Option<&'a PaArgs>,
    count: Option<&'a FactorCount>,
    salience: Option<f64>,
    restarts: usize,
}

fn run(stage: Stage, input: &InputArgs, opts: Options) -> Result<(), CliError> {
    let cohort = load_cohort(input)?;
    let mut out = OutDir::create(&input.out_dir)?;
    let mut notes = Vec::new();
    let mut choice = opts.count.map(|c| FactorChoice {
        requested: c.nfactors,
        auto: c.auto_nfactors,
        suggested_by_pa: None,
        used: None,
    });
    let rotation = opts.count.map(|_| ObliminConfig {
        restarts: opts.restarts,
        seed: opts.pa.map_or(0, |p| p.seed),
        ..Default::default()
    });
    let summary = cohort_summary(&cohort);

    if stage == Stage::Ingest {
        out.write_json("ingest_summary.json", &summary)?;
    }

    let needs_fi = matches!(stage, Stage::Fi | Stage::Scores | Stage::Regress | Stage::Report);
    let fi = if needs_fi {
        let fi = frailty_indices(&cohort).map_err(CliError::core)?;
        write_fi(&mut out, &cohort, &fi)?;
        Some(fi)
    } else {
        None
    };

    if stage >= Stage::Corr {
        let m = cohort.deficit_matrix();
        let ids: Vec<String> = cohort.catalog.ids().iter().map(|s| s.to_string()).collect();
        let raw = pairwise_phi_matrix(&m, &ids, DEFAULT_MIN_PAIRS).map_err(CliError::core)?;
        out.write_csv("corr_matrix.csv", &labelled_matrix("id", &raw.ids, &raw.r))?;
        write_counts(&mut out, &raw)?;
        let c = smooth_psd(&raw).map_err(CliError::core)?;
        if c.smoothed {
            notes.push(format!(
                "phi matrix was not positive semidefinite (min eigenvalue {}); smoothed",
                g6(c.min_eig_before)
            ));
            out.write_csv("corr_matrix_smoothed.csv", &labelled_matrix("id", &c.ids, &c.r))?;
        }
        let n = cohort.records.len();
        let fr = factorability(&c, n).map_err(|e| CliError::Validation(frailty_core::Error::from(e).to_string()))?;
        notes.extend(fr.warnings.iter().cloned());
        out.write_json(
            "factorability.json",
            &CorrSummary {
                smoothed: c.smoothed,
                min_eigenvalue_before_smoothing: c.min_eig_before,
                report: &fr,
            },
        )?;

        if stage >= Stage::Pa {
            let pa_args = opts.pa.expect("factor stages carry parallel analysis flags");
            let pa = parallel(&mut out, &cohort, &c, pa_args)?;
            if let Some(ch) = choice.as_mut() {
                ch.suggested_by_pa = Some(pa.suggested_k);
            }

            if stage >= Stage::Efa {
                let count = opts.count.expect("factor stages carry a factor count");
                let k = choose_k(count, &pa, c.dim())?;
                if let Some(ch) = choice.as_mut() {
                    ch.used = Some(k);
                }
                let sol = extract_minres(&c, k, &MinresConfig::default()).map_err(CliError::core)?;
                if !sol.converged {
                    notes.push("minres did not converge within the iteration limit".into());
                }
                let fit = fit_stats(&c, &sol).map_err(CliError::core)?;
                if !fit.acceptable() {
                    notes.push(format!("RMSR {} exceeds the {} gate", g6(fit.rmsr), RMSR_GATE));
                }
                let rot = oblimin_rotate(&sol, rotation.as_ref().expect("rotation config"))
                    .map_err(CliError::core)?;
                let sal = salience(&rot.pattern, &c.ids, opts.salience.unwrap_or_default());
                for f in sal.factors.iter().filter(|f| !f.adequate) {
                    notes.push(format!(
                        "factor F{} has {} salient loadings, fewer than 3",
                        f.factor,
                        f.items.len()
                    ));
                }
                write_efa(&mut out, &cohort, &c, &sol, &fit, &rot, &sal)?;

                if stage >= Stage::Scores {
                    let fi = fi.as_ref().expect("index computed for score stages");
                    let pids: Vec<String> = cohort.records.iter().map(|r| r.id.clone()).collect();
                    let scores = regression_scores(&m, &pids, &c, &rot).map_err(CliError::core)?;
                    write_scores(&mut out, &scores, fi)?;

                    if stage >= Stage::Regress {
                        if summary.outcome_observed == 0 {
                            let msg = format!(
                                "regress: outcome column `{}` is absent or empty",
                                input.outcome_col
                            );
                            if stage == Stage::Regress {
                                return Err(CliError::Validation(msg));
                            }
                            notes.push(format!("{msg}; regression skipped"));
                        } else {
                            let fits = regressions(&cohort, &input.outcome_col, fi, &scores.scores)?;
                            write_regressions(&mut out, &fits)?;
                        }
                    }
                }
            }
        }
    }

    for n in &notes {
        eprintln!("warning: {n}");
    }
    let meta = RunMeta {
        tool: "frailty",
        version: env!("CARGO_PKG_VERSION"),
        core_version: frailty_core::VERSION,
        command: stage.name(),
        input,
        parallel_analysis: opts.pa,
        factors: choice,
        salience_threshold: opts.salience,
        rotation,
        minres: MinresConfig::default(),
        min_pairs: DEFAULT_MIN_PAIRS,
        rmsr_gate: RMSR_GATE,
        cohort: summary,
        notes,
        outputs: {
            let mut files = out.files();
            files.push("run_meta.json".into());
            files.sort();
            files
        },
    };
    out.write_json("run_meta.json", &meta)
}

pub fn run_input(stage: Stage, input: &InputArgs) -> Result<(), CliError> {
    run(
        stage,
        input,
        Options {
            pa: None,
            count: None,
            salience: None,
            restarts: 0,
        },
    )
}

pub fn run_pa(cmd: &PaCommand) -> Result<(), CliError> {
    run(
        Stage::Pa,
        &cmd.input,
        Options {
            pa: Some(&cmd.pa),
            count: None,
            salience: None,
            restarts: 0,
        },
    )
}

pub fn run_factor(stage: Stage, cmd: &FactorCommand) -> Result<(), CliError> {
    if !(0.0..1.0).contains(&cmd.salience) {
        return Err(CliError::Validation(format!(
            "--salience must lie in [0, 1), got {}",
            cmd.salience
        )));
    }
    run(
        stage,
        &cmd.input,
        Options {
            pa: Some(&cmd.pa),
            count: Some(&cmd.count),
            salience: Some(cmd.salience),
            restarts: cmd.restarts,
        },
    )
}

#[derive(Serialize)]
struct SynthMeta<'a> {
    tool: &'static str,
    version: &'static str,
    core_version: &'static str,
    command: &'static str,
    args: &'a SynthArgs,
    outputs: Vec<String>,
}

fn read_spec(path: &Path) -> Result<SynthSpec, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Runtime(format!("synth: cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("synth: invalid spec {}: {e}", path.display())))
}

pub fn run_synth(args: &SynthArgs) -> Result<(), CliError> {
    let spec = match &args.spec {
        Some(path) => read_spec(path)?,
        None => match args.preset {
            Preset::Elsa => SynthSpec::elsa_like(args.n, args.seed),
            Preset::Simple => {
                SynthSpec::simple_structure(args.n, 4, 12, 0.7, &[0.1, 0.2, 0.3, 0.4], args.seed)
            }
        },
    };
    let syn = generate(&spec).map_err(CliError::core)?;
    let mut out = OutDir::create(&args.out_dir)?;
    let mut csv = Vec::new();
    syn.cohort
        .write_csv(&mut csv, &args.outcome_col)
        .map_err(CliError::core)?;
    out.write_bytes("cohort.csv", &csv)?;
    out.write_bytes("catalog.json", syn.cohort.catalog.to_json().as_bytes())?;
    out.write_json("synth_spec.json", &spec)?;
    let mut t = Table::new(
        &std::iter::once("id".to_string())
            .chain(factor_labels(spec.k()))
            .collect::<Vec<_>>(),
    );
    for (i, r) in syn.cohort.records.iter().enumerate() {
        let mut row = vec![r.id.clone()];
        row.extend(syn.latents.row(i).iter().map(|v| g6(*v)));
        t.push(row);
    }
    out.write_csv("latents.csv", &t)?;
    let mut outputs = out.files();
    outputs.push("run_meta.json".into());
    outputs.sort();
    out.write_json(
        "run_meta.json",
        &SynthMeta {
            tool: "frailty",
            version: env!("CARGO_PKG_VERSION"),
            core_version: frailty_core::VERSION,
            command: "synth",
            args,
            outputs,
        },
    )
}
