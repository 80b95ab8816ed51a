//! Binned conditional statistics of `y` (and of user fields) given a scalar `x`.

use crate::error::{invalid, Error, Result};

/// Histogram layout for conditioning on a scalar slow variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Binning {
    pub n_bins: usize,
    /// Central sample-quantile mass covered when `range` is not given.
    pub coverage: f64,
    pub range: Option<(f64, f64)>,
    /// Bins with fewer samples are flagged unusable.
    pub min_count: usize,
}

impl Default for Binning {
    fn default() -> Self {
        Self { n_bins: 40, coverage: 0.99, range: None, min_count: 100 }
    }
}

/// A field `(x_center, y) -> R^dim` averaged per bin.
pub struct NamedField<'a> {
    pub name: &'a str,
    pub dim: usize,
    pub eval: &'a (dyn Fn(f64, &[f64], &mut [f64]) + Sync),
}

/// Per-bin average of a named field with standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldStat {
    pub name: String,
    pub dim: usize,
    /// `n_bins x dim`, row-major.
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
}

impl FieldStat {
    pub fn at(&self, bin: usize) -> &[f64] {
        &self.mean[bin * self.dim..(bin + 1) * self.dim]
    }

    pub fn se_at(&self, bin: usize) -> &[f64] {
        &self.se[bin * self.dim..(bin + 1) * self.dim]
    }
}

/// Conditional statistics of `y` given `x` in fixed-width bins.
///
/// Bins with no samples report `NaN` statistics. Samples outside the bin
/// range are tallied in `underflow`/`overflow`, so
/// `sum(counts) + underflow + overflow == n_samples`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalEstimate {
    edges: Vec<f64>,
    counts: Vec<usize>,
    underflow: usize,
    overflow: usize,
    min_count: usize,
    y_dim: usize,
    mean_y: Vec<f64>,
    cov_y: Vec<f64>,
    se_mean_y: Vec<f64>,
    fields: Vec<FieldStat>,
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

impl ConditionalEstimate {
    /// Bins samples `(x_i, y_i)`; `ys` is row-major `n x y_dim`. Fields are
    /// evaluated at the bin center and the sample `y`.
    pub fn from_samples(xs: &[f64], ys: &[f64], y_dim: usize, binning: &Binning, fields: &[NamedField<'_>]) -> Result<Self> {
        let n = xs.len();
        if ys.len() != n * y_dim {
            return Err(Error::Dimension { what: "conditional samples", expected: n * y_dim, got: ys.len() });
        }
        if n == 0 || binning.n_bins == 0 {
            return invalid("need at least one sample and one bin");
        }
        if xs.iter().chain(ys).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue("conditional sample".into()));
        }
        let (lo, hi) = match binning.range {
            Some(r) => r,
            None => {
                if !(binning.coverage > 0.0 && binning.coverage <= 1.0) {
                    return invalid("coverage must lie in (0, 1]");
                }
                let mut sorted = xs.to_vec();
                sorted.sort_by(f64::total_cmp);
                let tail = 0.5 * (1.0 - binning.coverage);
                (quantile_sorted(&sorted, tail), quantile_sorted(&sorted, 1.0 - tail))
            }
        };
        if !(hi > lo) {
            return invalid(format!("empty binning range [{lo}, {hi}]"));
        }
        let nb = binning.n_bins;
        let width = (hi - lo) / nb as f64;
        let edges: Vec<f64> = (0..=nb).map(|i| lo + width * i as f64).collect();
        let centers: Vec<f64> = (0..nb).map(|i| lo + width * (i as f64 + 0.5)).collect();

        let mut bin_of = Vec::with_capacity(n);
        let (mut underflow, mut overflow) = (0, 0);
        let mut counts = vec![0usize; nb];
        for &x in xs {
            let b = if x < lo {
                underflow += 1;
                None
            } else if x > hi {
                overflow += 1;
                None
            } else {
                let i = (((x - lo) / width) as usize).min(nb - 1);
                counts[i] += 1;
                Some(i)
            };
            bin_of.push(b);
        }

        let m = y_dim;
        let mut sum = vec![0.0; nb * m];
        for (k, b) in bin_of.iter().enumerate() {
            if let Some(i) = b {
                for j in 0..m {
                    sum[i * m + j] += ys[k * m + j];
                }
            }
        }
        let mean_y: Vec<f64> = (0..nb * m).map(|idx| sum[idx] / counts[idx / m] as f64).collect();
        let mut cov = vec![0.0; nb * m * m];
        for (k, b) in bin_of.iter().enumerate() {
            if let Some(i) = b {
                for a in 0..m {
                    let da = ys[k * m + a] - mean_y[i * m + a];
                    for c in 0..m {
                        cov[i * m * m + a * m + c] += da * (ys[k * m + c] - mean_y[i * m + c]);
                    }
                }
            }
        }
        for i in 0..nb {
            let denom = counts[i] as f64 - 1.0;
            for v in &mut cov[i * m * m..(i + 1) * m * m] {
                *v = if counts[i] >= 2 { *v / denom } else { f64::NAN };
            }
        }
        let se_mean_y: Vec<f64> = (0..nb * m)
            .map(|idx| {
                let i = idx / m;
                let a = idx % m;
                (cov[i * m * m + a * m + a] / counts[i] as f64).sqrt()
            })
            .collect();

        let mut stats = Vec::with_capacity(fields.len());
        for field in fields {
            let k = field.dim;
            let mut vals = vec![0.0; n * k];
            for (s, b) in bin_of.iter().enumerate() {
                if let Some(i) = b {
                    (field.eval)(centers[*i], &ys[s * m..(s + 1) * m], &mut vals[s * k..(s + 1) * k]);
                }
            }
            let mut fsum = vec![0.0; nb * k];
            for (s, b) in bin_of.iter().enumerate() {
                if let Some(i) = b {
                    for j in 0..k {
                        fsum[i * k + j] += vals[s * k + j];
                    }
                }
            }
            let fmean: Vec<f64> = (0..nb * k).map(|idx| fsum[idx] / counts[idx / k] as f64).collect();
            let mut fss = vec![0.0; nb * k];
            for (s, b) in bin_of.iter().enumerate() {
                if let Some(i) = b {
                    for j in 0..k {
                        let dv = vals[s * k + j] - fmean[i * k + j];
                        fss[i * k + j] += dv * dv;
                    }
                }
            }
            let fse: Vec<f64> = (0..nb * k)
                .map(|idx| {
                    let c = counts[idx / k] as f64;
                    if c >= 2.0 {
                        (fss[idx] / (c - 1.0)).sqrt() / c.sqrt()
                    } else {
                        f64::NAN
                    }
                })
                .collect();
            if fmean.iter().zip(&counts.iter().flat_map(|c| std::iter::repeat_n(*c, k)).collect::<Vec<_>>()).any(|(v, c)| *c > 0 && !v.is_finite()) {
                return Err(Error::NonFiniteValue(format!("field '{}' average", field.name)));
            }
            stats.push(FieldStat { name: field.name.to_string(), dim: k, mean: fmean, se: fse });
        }

        Ok(Self {
            edges,
            counts,
            underflow,
            overflow,
            min_count: binning.min_count,
            y_dim,
            mean_y,
            cov_y: cov,
            se_mean_y,
            fields: stats,
        })
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn y_dim(&self) -> usize {
        self.y_dim
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn width(&self) -> f64 {
        self.edges[1] - self.edges[0]
    }

    pub fn center(&self, bin: usize) -> f64 {
        0.5 * (self.edges[bin] + self.edges[bin + 1])
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_bins()).map(|i| self.center(i)).collect()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn count(&self, bin: usize) -> usize {
        self.counts[bin]
    }

    pub fn underflow(&self) -> usize {
        self.underflow
    }

    pub fn overflow(&self) -> usize {
        self.overflow
    }

    pub fn n_samples(&self) -> usize {
        self.counts.iter().sum::<usize>() + self.underflow + self.overflow
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    pub fn is_usable(&self, bin: usize) -> bool {
        self.counts[bin] >= self.min_count.max(2)
    }

    pub fn usable_bins(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_bins()).filter(|&i| self.is_usable(i))
    }

    pub fn n_usable(&self) -> usize {
        self.usable_bins().count()
    }

    /// Conditional mean of `y` in `bin`.
    pub fn mean_y(&self, bin: usize) -> &[f64] {
        &self.mean_y[bin * self.y_dim..(bin + 1) * self.y_dim]
    }

    /// Standard error of the conditional mean (`stdev / sqrt(count)`).
    pub fn se_mean_y(&self, bin: usize) -> &[f64] {
        &self.se_mean_y[bin * self.y_dim..(bin + 1) * self.y_dim]
    }

    /// Conditional covariance of `y` in `bin`, row-major.
    pub fn cov_y(&self, bin: usize) -> &[f64] {
        let m2 = self.y_dim * self.y_dim;
        &self.cov_y[bin * m2..(bin + 1) * m2]
    }

    pub fn fields(&self) -> &[FieldStat] {
        &self.fields
    }

    pub fn field(&self, name: &str) -> Option<&FieldStat> {
        self.fields.iter().find(|f| f.name == name)
    }

    /// Bin containing `x`, if inside the binned range.
    pub fn bin_of(&self, x: f64) -> Option<usize> {
        let (lo, hi) = (self.edges[0], *self.edges.last().unwrap());
        if x < lo || x > hi {
            return None;
        }
        Some((((x - lo) / self.width()) as usize).min(self.n_bins() - 1))
    }

    /// Center of the usable bin closest to `x`.
    pub fn nearest_usable(&self, x: f64) -> Option<f64> {
        self.usable_bins()
            .map(|i| self.center(i))
            .min_by(|a, b| (a - x).abs().total_cmp(&(b - x).abs()))
    }
}
