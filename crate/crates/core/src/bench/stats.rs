//! Sample statistics, the Welch t-test and best/average/worst labelling.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("sample of size {0} is too small (need >= 2)")]
    TooSmall(usize),
    #[error("sample contains a non-finite value")]
    NonFinite,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); `None` below two values.
pub fn sample_sd(xs: &[f64]) -> Option<f64> {
    sample_variance(xs).map(f64::sqrt)
}

fn sample_variance(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs);
    Some(xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WelchTest {
    pub t: f64,
    /// Welch-Satterthwaite degrees of freedom; infinite when both samples
    /// have zero variance.
    pub df: f64,
    /// Two-sided p-value.
    pub p: f64,
}

/// Two-sided Welch unequal-variance t-test.
///
/// When both samples have zero variance the statistic is undefined: equal
/// means give `p = 1`, different means give `p = 0`.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchTest, StatsError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(StatsError::TooSmall(s.len()));
        }
        if s.iter().any(|x| !x.is_finite()) {
            return Err(StatsError::NonFinite);
        }
    }
    let (ma, mb) = (mean(a), mean(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (qa, qb) = (
        sample_variance(a).expect("len >= 2") / na,
        sample_variance(b).expect("len >= 2") / nb,
    );
    let se2 = qa + qb;
    if se2 == 0.0 {
        return Ok(if ma == mb {
            WelchTest {
                t: 0.0,
                df: f64::INFINITY,
                p: 1.0,
            }
        } else {
            WelchTest {
                t: if ma > mb { f64::INFINITY } else { f64::NEG_INFINITY },
                df: f64::INFINITY,
                p: 0.0,
            }
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(WelchTest { t, df, p })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Best,
    Average,
    Worst,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Best => "best",
            Label::Average => "average",
            Label::Worst => "worst",
        }
    }
}

/// Labels each sample by pairwise Welch tests at `alpha` (higher is better).
///
/// A sample is `Best` when nothing is significantly better than it, `Worst`
/// when something is and it beats nothing, and `Average` otherwise.
pub fn label_samples(samples: &[&[f64]], alpha: f64) -> Result<Vec<Label>, StatsError> {
    let n = samples.len();
    let mut wins = vec![0usize; n];
    let mut losses = vec![0usize; n];
    for i in 0..n {
        for j in i + 1..n {
            let w = welch_t_test(samples[i], samples[j])?;
            if w.p < alpha {
                let (winner, loser) = if w.t > 0.0 { (i, j) } else { (j, i) };
                wins[winner] += 1;
                losses[loser] += 1;
            }
        }
    }
    Ok((0..n)
        .map(|i| match (wins[i], losses[i]) {
            (_, 0) => Label::Best,
            (0, _) => Label::Worst,
            _ => Label::Average,
        })
        .collect())
}
