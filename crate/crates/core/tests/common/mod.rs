//! Independent oracles for the integration and acceptance suites. Nothing
//! here calls the code paths it is used to check.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet};

use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pem_core::featmat::CodeMode;
use pem_core::ingest::{EventRecord, PrescriptionRecord};
use pem_core::readcode::{parse_readcode, Readcode};

// QUADPACK qk15 abscissae and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Kronrod-15 estimate and its distance from the embedded Gauss-7 rule.
fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let fsum = f(c - h * XGK[j]) + f(c + h * XGK[j]);
        kronrod += WGK[j] * fsum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * fsum;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

fn adapt(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (est, err) = gk15(f, a, b);
    if depth == 0 || err <= tol || err <= 1e-13 * est.abs() {
        return est;
    }
    let m = 0.5 * (a + b);
    adapt(f, a, m, tol / 2.0, depth - 1) + adapt(f, m, b, tol / 2.0, depth - 1)
}

/// Adaptive Gauss-Kronrod quadrature over `[a, b]`, pre-split into 16 panels.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    const PANELS: usize = 16;
    let h = (b - a) / PANELS as f64;
    (0..PANELS)
        .map(|i| {
            adapt(
                &f,
                a + h * i as f64,
                a + h * (i + 1) as f64,
                tol / PANELS as f64,
                30,
            )
        })
        .sum()
}

/// Two-sided tail `P(|T| >= |t|)` by integrating the t density.
///
/// With `x = sqrt(df) tan θ` the density becomes proportional to
/// `cos^(df-1) θ` on `[0, π/2)`, so both the tail and the normalizing
/// integral are over finite intervals and no gamma function is needed.
pub fn t_tail_quadrature(t: f64, df: f64) -> f64 {
    let theta_t = (t.abs() / df.sqrt()).atan();
    let half_pi = std::f64::consts::FRAC_PI_2;
    let density = |th: f64| th.cos().powf(df - 1.0);
    let total = integrate(density, 0.0, half_pi, 1e-15);
    let rough = integrate(density, theta_t, half_pi, 1e-15 * total);
    let tail = integrate(density, theta_t, half_pi, (1e-14 * rough).max(f64::MIN_POSITIVE));
    tail / total
}

/// Dense 0/1 matrices built by probing every (patient, key, day) triple.
pub struct OracleMatrices {
    pub patients: Vec<String>,
    pub keys: Vec<Readcode>,
    pub before: Vec<Vec<u8>>,
    pub after: Vec<Vec<u8>>,
}

pub fn oracle_matrices(
    prescriptions: &[PrescriptionRecord],
    events: &[EventRecord],
    mode: CodeMode,
    window_days: i64,
) -> OracleMatrices {
    let key_of = |c: Readcode| -> Readcode {
        match mode {
            CodeMode::Level15 => c,
            CodeMode::Level13 if c.level() > 3 => {
                let stem: String = c.code().chars().take(3).collect();
                parse_readcode(&stem).unwrap()
            }
            CodeMode::Level13 => c,
        }
    };
    let mut anchors: BTreeMap<String, NaiveDate> = BTreeMap::new();
    for p in prescriptions {
        let e = anchors.entry(p.patient_id.clone()).or_insert(p.date);
        if p.date < *e {
            *e = p.date;
        }
    }
    let mut keys: Vec<Readcode> = events.iter().map(|e| key_of(e.event_code)).collect();
    keys.sort();
    keys.dedup();
    let present: HashSet<(String, Readcode, NaiveDate)> = events
        .iter()
        .map(|e| (e.patient_id.clone(), key_of(e.event_code), e.date))
        .collect();

    let mut before = Vec::new();
    let mut after = Vec::new();
    for (pid, anchor) in &anchors {
        let mut b = vec![0u8; keys.len()];
        let mut a = vec![0u8; keys.len()];
        for (c, key) in keys.iter().enumerate() {
            for offset in -window_days..=window_days {
                let day = if offset < 0 {
                    *anchor - Days::new(offset.unsigned_abs())
                } else {
                    *anchor + Days::new(offset as u64)
                };
                if present.contains(&(pid.clone(), *key, day)) {
                    if offset < 0 {
                        b[c] = 1;
                    } else if offset > 0 {
                        a[c] = 1;
                    }
                }
            }
        }
        before.push(b);
        after.push(a);
    }
    OracleMatrices {
        patients: anchors.keys().cloned().collect(),
        keys,
        before,
        after,
    }
}

const CODE_POOL: [&str; 10] = [
    "N245.16", "N245111", "N245.13", "N24..00", "C34..00", "C341.00", "B33..11", "H06z000", "H06..00",
    "1M10.00",
];

/// A small random cohort: a few prescriptions per patient (some unexposed
/// patients only have events) and events scattered around the anchors,
/// including anchor-day and boundary days.
pub fn random_small_cohort(seed: u64, window: i64) -> (Vec<PrescriptionRecord>, Vec<EventRecord>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_patients = rng.gen_range(1..=50);
    let base = NaiveDate::from_ymd_opt(2010, 1, 1).unwrap();
    let mut rx = Vec::new();
    let mut ev = Vec::new();
    for i in 0..n_patients {
        let pid = format!("Q{i:03}");
        let exposed = rng.gen_bool(0.85);
        let anchor = base + Days::new(rng.gen_range(200..400));
        if exposed {
            for _ in 0..rng.gen_range(1..=3) {
                rx.push(PrescriptionRecord {
                    patient_id: pid.clone(),
                    drug_code: "PRAVA01".into(),
                    date: anchor + Days::new(rng.gen_range(0..90)),
                });
            }
        }
        for _ in 0..rng.gen_range(0..25) {
            let offset: i64 = match rng.gen_range(0..6) {
                0 => 0,
                1 => window,
                2 => -window,
                _ => rng.gen_range(-(window + 20)..=(window + 110)),
            };
            let date = if offset < 0 {
                anchor - Days::new(offset.unsigned_abs())
            } else {
                anchor + Days::new(offset as u64)
            };
            ev.push(EventRecord {
                patient_id: pid.clone(),
                event_code: parse_readcode(CODE_POOL[rng.gen_range(0..CODE_POOL.len())]).unwrap(),
                date,
            });
        }
    }
    (rx, ev)
}
