use frailty_core::corr::{pairwise_phi_matrix, smooth_psd};
use frailty_core::efa::{extract_minres, MinresConfig};
use frailty_core::findex::{criteria_report, frailty_indices, CriteriaConfig};
use frailty_core::ingest::{parse_cohort_reader, CohortOptions, DeficitCatalog};
use frailty_core::rotate::{oblimin_rotate, ObliminConfig};
use frailty_core::scores::{pearson, regression_scores, score_correlation_report};
use frailty_core::synth::{align, generate, SynthSpec};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

// P(X > a, Y > b) for a standard bivariate normal with correlation rho, by
// Simpson quadrature of φ(x)·P(Y > b | X = x) over x.
fn orthant(a: f64, b: f64, rho: f64) -> f64 {
    let n = Normal::standard();
    let s = (1.0 - rho * rho).sqrt();
    let f = |x: f64| n.pdf(x) * n.sf((b - rho * x) / s);
    let hi = 9.0;
    let m = 4000;
    let h = (hi - a) / m as f64;
    let mut acc = f(a) + f(hi);
    for k in 1..m {
        acc += f(a + h * k as f64) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

fn expected_phi(ta: f64, tb: f64, rho: f64) -> f64 {
    let n = Normal::standard();
    let (pa, pb) = (n.sf(ta), n.sf(tb));
    (orthant(ta, tb, rho) - pa * pb) / (pa * (1.0 - pa) * pb * (1.0 - pb)).sqrt()
}

#[test]
fn synthetic_phi_matches_bivariate_normal_orthants() {
    let mut spec = SynthSpec::simple_structure(50_000, 2, 3, 0.7, &[0.1, 0.3, 0.5], 42);
    spec.loadings[1][0] = 0.5;
    spec.loadings[2][0] = 0.8;
    let s = generate(&spec).unwrap();
    let m = s.cohort.deficit_matrix();
    let c = pairwise_phi_matrix(&m, &spec.ids, 30).unwrap();
    let l = spec.loadings_matrix();
    for i in 0..6 {
        for j in 0..i {
            let rho = l.row(i).dot(&l.row(j));
            let want = expected_phi(spec.thresholds[i], spec.thresholds[j], rho);
            assert!(
                (c.r[(i, j)] - want).abs() < 0.02,
                "({i}, {j}): {} vs {want}",
                c.r[(i, j)]
            );
        }
    }
}

#[test]
fn orthant_oracle_sanity() {
    // Independence and the Sheppard formula at the medians.
    assert!((orthant(0.3, -0.2, 0.0) - Normal::standard().sf(0.3) * Normal::standard().sf(-0.2)).abs() < 1e-9);
    let rho: f64 = 0.6;
    let want = 0.25 + rho.asin() / (2.0 * std::f64::consts::PI);
    assert!((orthant(0.0, 0.0, rho) - want).abs() < 1e-9);
}

#[test]
fn synthetic_prevalences_converge() {
    let spec = SynthSpec::simple_structure(50_000, 2, 4, 0.6, &[0.05, 0.15, 0.3, 0.5], 7);
    let s = generate(&spec).unwrap();
    let report = criteria_report(&s.cohort, &CriteriaConfig::default()).unwrap();
    for (row, want) in report.rows.iter().zip([0.05, 0.15, 0.3, 0.5].iter().cycle()) {
        assert!((row.prevalence.unwrap() - want).abs() < 0.01, "{}: {:?}", row.id, row.prevalence);
    }
}

// Per-year prevalence of an age-independent deficit correlates with age only
// by chance, so across deficits r is centred on 0 with spread 1/√(cells − 1).
#[test]
fn age_independent_deficits_follow_the_null_distribution() {
    let spec = SynthSpec::simple_structure(10_000, 1, 40, 0.0, &[0.3], 3);
    let s = generate(&spec).unwrap();
    let report = criteria_report(&s.cohort, &CriteriaConfig::default()).unwrap();
    let rs: Vec<f64> = report.rows.iter().map(|r| r.age_corr.unwrap()).collect();
    let cells = report.rows[0].age_cells as f64;
    let null_sd = 1.0 / (cells - 1.0).sqrt();
    let mean = rs.iter().sum::<f64>() / rs.len() as f64;
    let sd = (rs.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (rs.len() - 1) as f64).sqrt();
    assert!(mean.abs() < 3.0 * null_sd / (rs.len() as f64).sqrt(), "mean {mean}");
    assert!(sd > 0.6 * null_sd && sd < 1.4 * null_sd, "sd {sd} vs {null_sd}");
}

#[test]
fn age_drift_raises_prevalence_with_age() {
    let mut spec = SynthSpec::simple_structure(20_000, 1, 3, 0.5, &[0.2], 8);
    spec.age_drift = vec![0.6; 3];
    let s = generate(&spec).unwrap();
    let report = criteria_report(&s.cohort, &CriteriaConfig::default()).unwrap();
    for row in &report.rows {
        let bands = row.prevalence_by_band;
        assert!(bands[0].unwrap() < bands[1].unwrap() && bands[1].unwrap() < bands[2].unwrap());
        assert!(row.age_corr.unwrap() > 0.5);
    }
}

#[test]
fn scores_recover_planted_latents() {
    let spec = SynthSpec::simple_structure(3000, 2, 10, 0.75, &[0.15, 0.25, 0.35, 0.45], 19);
    let s = generate(&spec).unwrap();
    let m = s.cohort.deficit_matrix();
    let c = smooth_psd(&pairwise_phi_matrix(&m, &spec.ids, 30).unwrap()).unwrap();
    let sol = extract_minres(&c, 2, &MinresConfig::default()).unwrap();
    let rot = oblimin_rotate(&sol, &ObliminConfig::default()).unwrap();
    let ids: Vec<String> = s.cohort.records.iter().map(|r| r.id.clone()).collect();
    let scores = regression_scores(&m, &ids, &c, &rot).unwrap();
    let a = align(&rot.pattern, &spec.loadings_matrix()).unwrap();
    let aligned = a.apply(&scores.scores);
    for j in 0..2 {
        let est: Vec<f64> = aligned.column(j).iter().copied().collect();
        let truth: Vec<f64> = s.latents.column(j).iter().copied().collect();
        let r = pearson(&est, &truth).unwrap();
        assert!(r > 0.85, "factor {j}: {r}");
    }
}

#[test]
fn dominant_factor_tracks_frailty_index_most() {
    let spec = SynthSpec::elsa_like(4000, 23);
    let s = generate(&spec).unwrap();
    let m = s.cohort.deficit_matrix();
    let c = smooth_psd(&pairwise_phi_matrix(&m, &spec.ids, 30).unwrap()).unwrap();
    let sol = extract_minres(&c, 4, &MinresConfig::default()).unwrap();
    let rot = oblimin_rotate(&sol, &ObliminConfig::default()).unwrap();
    let ids: Vec<String> = s.cohort.records.iter().map(|r| r.id.clone()).collect();
    let scores = regression_scores(&m, &ids, &c, &rot).unwrap();
    let fi = frailty_indices(&s.cohort).unwrap();
    let rep = score_correlation_report(&scores, &fi).unwrap();
    assert!(rep.r[(0, 4)] > rep.r[(3, 4)], "{}", rep.r);
    assert!(rep.r[(0, 4)] > 0.7);
}

#[test]
fn written_cohort_parses_back_identically() {
    let mut spec = SynthSpec::simple_structure(200, 2, 3, 0.6, &[0.3], 5);
    spec.missing_rate = 0.1;
    let s = generate(&spec).unwrap();
    let mut buf = Vec::new();
    s.cohort.write_csv(&mut buf, "casp19").unwrap();
    let catalog = DeficitCatalog::binary(&spec.ids).unwrap();
    let opts = CohortOptions {
        max_missing: 6,
        ..Default::default()
    };
    let back = parse_cohort_reader(buf.as_slice(), &catalog, &opts).unwrap();
    assert_eq!(back.records, s.cohort.records);
}

#[test]
fn mean_frailty_index_equals_mean_count_over_p_on_complete_data() {
    let spec = SynthSpec::simple_structure(500, 2, 5, 0.6, &[0.1, 0.2], 6);
    let s = generate(&spec).unwrap();
    let fi = frailty_indices(&s.cohort).unwrap();
    let mean_fi = fi.iter().map(|f| f.fi).sum::<f64>() / fi.len() as f64;
    let mean_count = fi.iter().map(|f| f.present as f64).sum::<f64>() / fi.len() as f64;
    assert!((mean_fi - mean_count / 10.0).abs() < 1e-12);
}
