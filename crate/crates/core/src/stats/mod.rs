//! Student's t-test on grouped before/after columns and the R1/R2 ratios.

pub mod special;

use num_traits::{FromPrimitive, Num};

use crate::error::{Error, Result};
use crate::featmat::GroupedMatrix;
use crate::num::Real;
use crate::readcode::{Readcode, TermDictionary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TestVariant {
    /// Two independent samples, pooled variance, `df = nx + ny - 2`.
    #[default]
    PooledUnpaired,
    /// One-sample test on the differences `x_i - y_i`, `df = n - 1`.
    Paired,
}

impl TestVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            TestVariant::PooledUnpaired => "pooled_unpaired",
            TestVariant::Paired => "paired",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "pooled_unpaired" => Some(TestVariant::PooledUnpaired),
            "paired" => Some(TestVariant::Paired),
            _ => None,
        }
    }
}

/// Outcome of a two-sided t-test.
///
/// `t` has the sign of `mean(x) - mean(y)`. When the samples have zero
/// variance the test is `degenerate`: equal means give `t = 0, p = 1`,
/// unequal means give `t = ±∞, p = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult<F> {
    pub t: F,
    pub df: F,
    pub p: F,
    pub degenerate: bool,
}

/// Two-sided tail probability `P(|T| ≥ |t|)` of Student's t with `df`
/// degrees of freedom, evaluated as `I_{df/(df+t²)}(df/2, 1/2)`.
pub fn two_sided_p<F: Real>(t: F, df: F) -> Result<F> {
    if df.is_nan() || df <= F::zero() || !df.is_finite() {
        return Err(Error::InvalidDf(df.to_f64().unwrap_or(f64::NAN)));
    }
    if t.is_nan() {
        return Err(Error::InvalidDf(f64::NAN));
    }
    if t.is_infinite() {
        return Ok(F::zero());
    }
    let t2 = t * t;
    let denom = df + t2;
    let half = F::lit(0.5);
    let p = special::regularized_inc_beta(df * half, half, df / denom, t2 / denom);
    Ok(p.max(F::zero()).min(F::one()))
}

fn mean<F: Real>(xs: &[F]) -> F {
    xs.iter().fold(F::zero(), |acc, &v| acc + v) / F::from_count(xs.len() as u64)
}

fn sum_sq_dev<F: Real>(xs: &[F], m: F) -> F {
    xs.iter().fold(F::zero(), |acc, &v| acc + (v - m) * (v - m))
}

fn is_constant<F: Real>(xs: &[F]) -> bool {
    xs.iter().all(|&v| v == xs[0])
}

fn degenerate<F: Real>(diff: F, df: F) -> TestResult<F> {
    let (t, p) = if diff == F::zero() {
        (F::zero(), F::one())
    } else {
        (diff.signum() * F::infinity(), F::zero())
    };
    TestResult {
        t,
        df,
        p,
        degenerate: true,
    }
}

pub fn students_t<F: Real>(x: &[F], y: &[F], variant: TestVariant) -> Result<TestResult<F>> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::TooFewSamples {
            x: x.len(),
            y: y.len(),
        });
    }
    match variant {
        TestVariant::PooledUnpaired => {
            let (nx, ny) = (F::from_count(x.len() as u64), F::from_count(y.len() as u64));
            let df = nx + ny - F::lit(2.0);
            let (mx, my) = (mean(x), mean(y));
            if is_constant(x) && is_constant(y) {
                return Ok(degenerate(x[0] - y[0], df));
            }
            let pooled = (sum_sq_dev(x, mx) + sum_sq_dev(y, my)) / df;
            let se = (pooled * (nx.recip() + ny.recip())).sqrt();
            let t = (mx - my) / se;
            Ok(TestResult {
                t,
                df,
                p: two_sided_p(t, df)?,
                degenerate: false,
            })
        }
        TestVariant::Paired => {
            if x.len() != y.len() {
                return Err(Error::LengthMismatch {
                    x: x.len(),
                    y: y.len(),
                });
            }
            let d: Vec<F> = x.iter().zip(y).map(|(&a, &b)| a - b).collect();
            let n = F::from_count(d.len() as u64);
            let df = n - F::one();
            if is_constant(&d) {
                return Ok(degenerate(d[0], df));
            }
            let md = mean(&d);
            let sd = (sum_sq_dev(&d, md) / df).sqrt();
            let t = md / (sd / n.sqrt());
            Ok(TestResult {
                t,
                df,
                p: two_sided_p(t, df)?,
                degenerate: false,
            })
        }
    }
}

/// `R1 = N_A / N_B` (or `N_A` when `N_B = 0`) and `R2 = 100 · N_A / N`.
///
/// Generic over any numeric field, so an exact rational type can be used as
/// well as floats.
pub fn ratios<T>(n_before: u64, n_after: u64, n: u64) -> Result<(T, T)>
where
    T: Num + FromPrimitive + Copy,
{
    if n == 0 || n_after > n {
        return Err(Error::InvalidPopulation { n, n_after });
    }
    let conv = |v: u64| T::from_u64(v).expect("count representable");
    let na = conv(n_after);
    let r1 = if n_before == 0 { na } else { na / conv(n_before) };
    let r2 = conv(100) * na / conv(n);
    Ok((r1, r2))
}

/// Statistics for one event column.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStats<F> {
    pub event_key: Readcode,
    pub description: String,
    pub n_before: u64,
    pub n_after: u64,
    pub n: u64,
    pub r1: F,
    /// Percent of the exposed cohort.
    pub r2: F,
    pub test: TestResult<F>,
}

impl<F: Real> EventStats<F> {
    pub fn is_increase(&self) -> bool {
        self.n_after > self.n_before
    }
}

/// Runs the t-test on every column of `before` (X) against `after` (Y).
///
/// `counts_before` / `counts_after` are the binary-matrix column sums and
/// `n` the exposed cohort size. Output follows universe column order.
pub fn per_event_tests<F: Real>(
    before: &GroupedMatrix,
    after: &GroupedMatrix,
    counts_before: &[u64],
    counts_after: &[u64],
    n: u64,
    variant: TestVariant,
    dictionary: &TermDictionary,
) -> Result<Vec<EventStats<F>>> {
    if before.group_sizes() != after.group_sizes() {
        return Err(Error::ShapeMismatch("group structure of X and Y differs".into()));
    }
    let universe = before.shared_universe();
    if universe.keys() != after.shared_universe().keys() {
        return Err(Error::ShapeMismatch("column universe of X and Y differs".into()));
    }
    let cols = universe.len();
    if counts_before.len() != cols || counts_after.len() != cols {
        return Err(Error::ShapeMismatch(format!(
            "{cols} columns but {} / {} counts",
            counts_before.len(),
            counts_after.len()
        )));
    }

    let mut out = Vec::with_capacity(cols);
    let mut xs = Vec::with_capacity(before.n_groups());
    let mut ys = Vec::with_capacity(before.n_groups());
    for (col, key) in universe.keys().iter().enumerate() {
        xs.clear();
        ys.clear();
        xs.extend(before.column(col).iter().map(|&v| F::from_count(u64::from(v))));
        ys.extend(after.column(col).iter().map(|&v| F::from_count(u64::from(v))));
        let test = students_t(&xs, &ys, variant)?;
        let (r1, r2) = ratios::<F>(counts_before[col], counts_after[col], n)?;
        out.push(EventStats {
            event_key: *key,
            description: dictionary.lookup(key).to_string(),
            n_before: counts_before[col],
            n_after: counts_after[col],
            n,
            r1,
            r2,
            test,
        });
    }
    Ok(out)
}
