use frailty_core::findex::{criteria_report, frailty_index, CriteriaConfig};
use frailty_core::ingest::{Cohort, DeficitCatalog, ExclusionLog, ParticipantRecord, Sex};
use proptest::prelude::*;

fn record(deficits: Vec<Option<bool>>) -> ParticipantRecord {
    ParticipantRecord {
        id: "x".into(),
        age: 70,
        sex: Sex::Female,
        deficits,
        outcome: None,
    }
}

fn cells() -> impl Strategy<Value = Vec<Option<bool>>> {
    prop::collection::vec(prop::option::weighted(0.8, any::<bool>()), 2..30)
}

proptest! {
    #[test]
    fn fi_is_a_proportion_of_assessed(d in cells()) {
        let r = record(d.clone());
        match frailty_index(&r) {
            Ok(f) => {
                let assessed = d.iter().flatten().count();
                let present = d.iter().flatten().filter(|b| **b).count();
                prop_assert_eq!(f.assessed, assessed);
                prop_assert_eq!(f.present, present);
                prop_assert!((0.0..=1.0).contains(&f.fi));
                prop_assert_eq!(f.fi, present as f64 / assessed as f64);
            }
            Err(_) => prop_assert!(d.iter().all(Option::is_none)),
        }
    }

    #[test]
    fn flipping_a_deficit_on_raises_fi(d in cells(), pick in any::<prop::sample::Index>()) {
        let absent: Vec<usize> = (0..d.len()).filter(|&i| d[i] == Some(false)).collect();
        prop_assume!(!absent.is_empty());
        let i = absent[pick.index(absent.len())];
        let before = frailty_index(&record(d.clone())).unwrap().fi;
        let mut flipped = d;
        flipped[i] = Some(true);
        prop_assert!(frailty_index(&record(flipped)).unwrap().fi > before);
    }

    #[test]
    fn prevalence_matches_brute_force(rows in prop::collection::vec(prop::collection::vec(prop::option::weighted(0.7, any::<bool>()), 3), 1..40)) {
        let records: Vec<ParticipantRecord> = rows
            .iter()
            .enumerate()
            .map(|(i, d)| ParticipantRecord {
                id: i.to_string(),
                age: 65 + (i as u32 * 7) % 35,
                sex: if i % 2 == 0 { Sex::Male } else { Sex::Female },
                deficits: d.clone(),
                outcome: None,
            })
            .collect();
        let cohort = Cohort {
            input_rows: records.len(),
            records,
            catalog: DeficitCatalog::binary(&["a", "b", "c"]).unwrap(),
            exclusion_log: ExclusionLog::default(),
        };
        let rep = criteria_report(&cohort, &CriteriaConfig::default()).unwrap();
        for (j, row) in rep.rows.iter().enumerate() {
            let obs: Vec<bool> = rows.iter().filter_map(|d| d[j]).collect();
            prop_assert_eq!(row.n_observed, obs.len());
            if obs.is_empty() {
                prop_assert!(row.prevalence.is_none());
            } else {
                let want = obs.iter().filter(|b| **b).count() as f64 / obs.len() as f64;
                prop_assert!((row.prevalence.unwrap() - want).abs() < 1e-15);
            }
            if let Some(r) = row.age_corr {
                prop_assert!((-1.0..=1.0).contains(&r));
            }
        }
    }
}
