//! Statistics over per-patient score vectors: Pearson correlation with a
//! Fisher-z p-value, two-sample z-tests, and a Kolmogorov-Smirnov normality
//! check against a normal fitted by sample mean and deviation.
//!
//! The KS p-value uses the asymptotic Kolmogorov distribution even though
//! the normal's parameters are estimated from the same sample. That makes
//! it conservative (p too large); Lilliefors critical values are not used.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.05;

/// One measure (e.g. sensitivity) per patient; `None` is undefined.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub values: BTreeMap<String, Option<f64>>,
}

impl ScoreVector {
    pub fn from_values<I, K>(values: I) -> Self
    where
        I: IntoIterator<Item = (K, Option<f64>)>,
        K: Into<String>,
    {
        Self {
            values: values.into_iter().map(|(k, v)| (k.into(), v)).collect(),
        }
    }

    /// Convenience for fully defined vectors keyed by position.
    pub fn from_slice(values: &[f64]) -> Self {
        Self::from_values(
            values
                .iter()
                .enumerate()
                .map(|(i, v)| (format!("{i:06}"), Some(*v))),
        )
    }

    pub fn defined(&self) -> Vec<f64> {
        self.values.values().filter_map(|v| *v).collect()
    }
}

/// Values for patients defined in both vectors, in patient order.
pub fn paired(x: &ScoreVector, y: &ScoreVector) -> (Vec<f64>, Vec<f64>) {
    x.values
        .iter()
        .filter_map(|(k, a)| Some(((*a)?, (*y.values.get(k)?)?)))
        .unzip()
}

/// Two-tailed standard-normal tail probability.
pub fn two_tailed_p(z: f64) -> f64 {
    if z.is_nan() {
        return 1.0;
    }
    erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|x| *x == v[0])
}

fn sample_variance(v: &[f64]) -> f64 {
    if is_constant(v) {
        return 0.0;
    }
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() as f64 - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    pub p: f64,
    pub n: usize,
}

pub fn pearson_r(x: &ScoreVector, y: &ScoreVector) -> Result<Correlation> {
    let (a, b) = paired(x, y);
    pearson_slices(&a, &b)
}

pub fn pearson_slices(a: &[f64], b: &[f64]) -> Result<Correlation> {
    let n = a.len().min(b.len());
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 paired values, got {n}"
        )));
    }
    let (a, b) = (&a[..n], &b[..n]);
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if is_constant(a) || is_constant(b) || saa == 0.0 || sbb == 0.0 {
        return Err(Error::ZeroVariance("correlation input is constant".into()));
    }
    let r = (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0);
    let p = if r.abs() >= 1.0 {
        0.0
    } else if n == 3 {
        1.0
    } else {
        two_tailed_p(r.atanh() * ((n - 3) as f64).sqrt())
    };
    Ok(Correlation { r, p, n })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZTest {
    pub z: f64,
    pub p: f64,
    pub significant: bool,
    pub mean_a: f64,
    pub mean_b: f64,
    pub n_a: usize,
    pub n_b: usize,
}

/// Two-sample z-test on the defined values of each vector.
pub fn z_test(a: &ScoreVector, b: &ScoreVector, alpha: f64) -> Result<ZTest> {
    z_test_slices(&a.defined(), &b.defined(), alpha)
}

pub fn z_test_slices(a: &[f64], b: &[f64], alpha: f64) -> Result<ZTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 values per sample, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (ma, mb) = (mean(a), mean(b));
    let se2 = sample_variance(a) / a.len() as f64 + sample_variance(b) / b.len() as f64;
    let diff = ma - mb;
    let z = if se2 > 0.0 {
        diff / se2.sqrt()
    } else if diff == 0.0 {
        return Err(Error::ZeroVariance(
            "both samples are constant with equal means".into(),
        ));
    } else {
        diff.signum() * f64::INFINITY
    };
    let p = two_tailed_p(z);
    Ok(ZTest {
        z,
        p,
        significant: p < alpha,
        mean_a: ma,
        mean_b: mb,
        n_a: a.len(),
        n_b: b.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub d: f64,
    pub p: f64,
    pub n: usize,
}

/// Kolmogorov survival function `Q(lambda) = 2 sum (-1)^(k-1) exp(-2 k^2 lambda^2)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

pub fn ks_normality(x: &ScoreVector) -> Result<KsResult> {
    ks_normality_slice(&x.defined())
}

pub fn ks_normality_slice(values: &[f64]) -> Result<KsResult> {
    let n = values.len();
    if n < 5 {
        return Err(Error::InsufficientData(format!(
            "need at least 5 values, got {n}"
        )));
    }
    let m = mean(values);
    let sd = sample_variance(values).sqrt();
    if sd == 0.0 {
        return Err(Error::ZeroVariance("KS input is constant".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = 0.5 * erfc(-(v - m) / (sd * std::f64::consts::SQRT_2));
            (f - i as f64 / nf).max((i + 1) as f64 / nf - f)
        })
        .fold(0.0, f64::max);
    let sq = nf.sqrt();
    let p = kolmogorov_q((sq + 0.12 + 0.11 / sq) * d);
    Ok(KsResult { d, p, n })
}

/// Symmetric matrix of pairwise correlations; the diagonal is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub cells: Vec<Vec<Option<Correlation>>>,
}

pub fn correlation_matrix(vectors: &[(String, ScoreVector)]) -> CorrelationMatrix {
    let n = vectors.len();
    let mut cells = vec![vec![None; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let c = pearson_r(&vectors[i].1, &vectors[j].1).ok();
            cells[i][j] = c;
            cells[j][i] = c;
        }
    }
    CorrelationMatrix {
        names: vectors.iter().map(|(k, _)| k.clone()).collect(),
        cells,
    }
}

fn fmt_p(p: f64) -> String {
    if p < 0.001 {
        "p < 0.001".into()
    } else {
        format!("p = {p:.3}")
    }
}

pub fn render_correlation_matrix(m: &CorrelationMatrix) -> String {
    let width = 20;
    let mut s = format!("{:<10}", "");
    for n in &m.names {
        let _ = write!(s, "{n:<width$}");
    }
    s.push('\n');
    for (i, row) in m.cells.iter().enumerate() {
        let _ = write!(s, "{:<10}", m.names[i]);
        for (j, c) in row.iter().enumerate() {
            let cell = match c {
                _ if i == j => "---".to_string(),
                Some(c) => format!("{:.2} ({})", c.r, fmt_p(c.p)),
                None => "--".to_string(),
            };
            let _ = write!(s, "{cell:<width$}");
        }
        s.push('\n');
    }
    s
}

/// Upper-triangular grid of pairwise z-tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceGrid {
    pub names: Vec<String>,
    pub means: Vec<Option<f64>>,
    pub alpha: f64,
    pub cells: Vec<Vec<Option<ZTest>>>,
}

pub fn significance_grid(vectors: &[(String, ScoreVector)], alpha: f64) -> SignificanceGrid {
    let n = vectors.len();
    let mut cells = vec![vec![None; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            cells[i][j] = z_test(&vectors[i].1, &vectors[j].1, alpha).ok();
        }
    }
    SignificanceGrid {
        names: vectors.iter().map(|(k, _)| k.clone()).collect(),
        means: vectors
            .iter()
            .map(|(_, v)| {
                let d = v.defined();
                (!d.is_empty()).then(|| mean(&d))
            })
            .collect(),
        alpha,
        cells,
    }
}

pub fn render_significance_grid(g: &SignificanceGrid) -> String {
    let width = 16;
    let mut s = format!("{:<24}", "");
    for n in &g.names {
        let _ = write!(s, "{n:<width$}");
    }
    s.push('\n');
    for i in 0..g.names.len() {
        let head = match g.means[i] {
            Some(m) => format!("{}({:05.2}%)", g.names[i], 100.0 * m),
            None => format!("{}(--)", g.names[i]),
        };
        let _ = write!(s, "{head:<24}");
        for j in 0..g.names.len() {
            let cell = if j < i {
                String::new()
            } else if j == i {
                "---".into()
            } else {
                match &g.cells[i][j] {
                    Some(t) => format!(
                        "({:05.2}%) {}",
                        100.0 * (t.mean_a - t.mean_b).abs(),
                        if t.significant { "Y" } else { "N" }
                    ),
                    None => "--".into(),
                }
            };
            let _ = write!(s, "{cell:<width$}");
        }
        s.push('\n');
    }
    s
}
