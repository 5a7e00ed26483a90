mod common;

use std::sync::Arc;

use approx::assert_abs_diff_eq;
use pem_core::featmat::{
    build_feature_matrices, build_universe, group_matrix, CodeMode, MatrixView, WindowConfig,
};
use pem_core::ingest::build_exposure_index;
use pem_core::pipeline::{analyse, AnalysisConfig};
use pem_core::readcode::TermDictionary;
use pem_core::stats::{students_t, two_sided_p, TestVariant};
use pem_core::synth::{generate_cohort, PlantedEvent, SynthConfig};

use common::{oracle_matrices, random_small_cohort, t_tail_quadrature};

#[test]
fn quadrature_oracle_sanity() {
    // df = 1 is Cauchy, df = 2 has a closed form
    for &t in &[0.3, 1.0, 7.0] {
        let cauchy = 1.0 - 2.0 * f64::atan(t) / std::f64::consts::PI;
        assert_abs_diff_eq!(t_tail_quadrature(t, 1.0), cauchy, epsilon = 1e-12);
        let df2 = 1.0 - t / (2.0 + t * t).sqrt();
        assert_abs_diff_eq!(t_tail_quadrature(t, 2.0), df2, epsilon = 1e-12);
    }
}

#[test]
fn critical_values_against_quadrature() {
    // t(0.975, 10) = 2.228 and t(0.95, 10) = 1.812
    let frozen = [(2.228, 0.050_011_771_8), (1.812, 0.100_075_262_1)];
    for (t, expected) in frozen {
        let oracle = t_tail_quadrature(t, 10.0);
        assert_abs_diff_eq!(oracle, expected, epsilon = 1e-9);
        assert_abs_diff_eq!(two_sided_p(t, 10.0).unwrap(), oracle, epsilon = 1e-10);
    }
    for df in [1.0, 3.0, 17.0, 250.0] {
        assert_eq!(two_sided_p(0.0, df).unwrap(), 1.0);
    }
}

#[test]
fn p_value_relative_accuracy() {
    for &df in &[1.0, 2.5, 8.0, 40.0, 600.0, 10_000.0] {
        for &t in &[0.1, 0.9, 2.0, 4.5, 9.0] {
            let oracle = t_tail_quadrature(t, df);
            let p = two_sided_p(t, df).unwrap();
            assert!(
                ((p - oracle) / oracle).abs() < 1e-9,
                "df={df} t={t}: {p} vs {oracle}"
            );
        }
    }
}

#[test]
fn pooled_t_test_example() {
    let x = [30.0, 32.0, 28.0, 31.0, 29.0];
    let y = [35.0, 36.0, 34.0, 37.0, 33.0];
    let r = students_t(&x, &y, TestVariant::PooledUnpaired).unwrap();
    assert_abs_diff_eq!(r.t, -5.0, epsilon = 1e-12);
    assert_eq!(r.df, 8.0);
    let oracle = t_tail_quadrature(5.0, 8.0);
    assert_abs_diff_eq!(oracle, 1.052_825_793_4e-3, epsilon = 1e-12);
    assert_abs_diff_eq!(r.p, oracle, epsilon = 1e-12);
}

#[test]
fn large_df_approaches_normal() {
    use statrs::function::erf::erfc;
    for &t in &[0.5, 1.0, 1.96, 3.0] {
        let normal = erfc(t / std::f64::consts::SQRT_2);
        assert_abs_diff_eq!(two_sided_p(t, 1.0e4).unwrap(), normal, epsilon = 1e-4);
    }
}

#[test]
fn matrices_match_brute_force_on_random_cohorts() {
    for seed in 0..30 {
        for mode in [CodeMode::Level15, CodeMode::Level13] {
            let window = [5i64, 30, 60][seed as usize % 3];
            let (rx, ev) = random_small_cohort(seed, window);
            let oracle = oracle_matrices(&rx, &ev, mode, window);

            let idx = build_exposure_index(&rx);
            let universe = Arc::new(build_universe(&ev, mode));
            let cfg = WindowConfig {
                window_days: window as u32,
                group_size: 7,
            };
            let m = build_feature_matrices(&idx, &ev, &universe, &cfg).unwrap();

            assert_eq!(universe.keys(), oracle.keys.as_slice());
            assert_eq!(m.before.patients(), oracle.patients.as_slice());
            for r in 0..oracle.patients.len() {
                for c in 0..oracle.keys.len() {
                    assert_eq!(
                        m.before.value(r, c),
                        u32::from(oracle.before[r][c]),
                        "seed {seed} A[{r},{c}]"
                    );
                    assert_eq!(
                        m.after.value(r, c),
                        u32::from(oracle.after[r][c]),
                        "seed {seed} B[{r},{c}]"
                    );
                }
            }
            if !oracle.patients.is_empty() {
                let x = group_matrix(&m.before, 7).unwrap();
                for c in 0..oracle.keys.len() {
                    let col_sum: u32 = oracle.before.iter().map(|row| u32::from(row[c])).sum();
                    assert_eq!(x.column(c).iter().sum::<u32>(), col_sum);
                }
            }
        }
    }
}

#[test]
fn matrices_ignore_record_order_and_duplicates() {
    let (rx, ev) = random_small_cohort(99, 60);
    let cfg = WindowConfig::default();
    let build = |rx: &[_], ev: &[_]| {
        let u = Arc::new(build_universe(ev, CodeMode::Level15));
        let m = build_feature_matrices(&build_exposure_index(rx), ev, &u, &cfg).unwrap();
        let dense = |fm: &pem_core::FeatureMatrix| -> Vec<u32> {
            (0..fm.n_rows())
                .flat_map(|r| (0..fm.n_cols()).map(move |c| fm.value(r, c)))
                .collect()
        };
        (dense(&m.before), dense(&m.after))
    };
    let reference = build(&rx, &ev);
    let mut ev2 = ev.clone();
    ev2.reverse();
    ev2.extend(ev.iter().take(10).cloned());
    let mut rx2 = rx.clone();
    rx2.reverse();
    assert_eq!(build(&rx2, &ev2), reference);
}

#[test]
fn planted_event_detected_in_twenty_groups() {
    let cfg = SynthConfig {
        n_patients: 2000,
        n_null_events: 10,
        planted: vec![PlantedEvent::new("F591.00", 0.02, 4.0).unwrap()],
        seed: 11,
        ..SynthConfig::default()
    };
    let cohort = generate_cohort(&cfg).unwrap();
    let a = analyse::<f64>(
        &cohort.prescriptions,
        &cohort.events,
        &AnalysisConfig::default(),
        &TermDictionary::new(),
    )
    .unwrap();
    assert_eq!(a.n_groups(), 20);
    let planted = a
        .stats
        .iter()
        .find(|s| s.event_key.to_string() == "F591.00")
        .unwrap();
    assert!(planted.n_after > 2 * planted.n_before);
    let oracle = t_tail_quadrature(planted.test.t, planted.test.df);
    assert!(oracle < 0.05, "oracle p {oracle}");
    assert_abs_diff_eq!(planted.test.p, oracle, epsilon = 1e-10);
}
