//! Photon-number statistics of square-filtered light.
//!
//! For a Gaussian state the normally ordered pair correlation between sites
//! follows from Wick pairing:
//!
//! ```text
//! c_kl = <:dn_k dn_l:> = 2 Re[N_kl alpha_k conj(alpha_l)] + 2 Re[A_kl conj(alpha_k) conj(alpha_l)]
//!        + |N_kl|^2 + |A_kl|^2
//! ```
//!
//! Interval statistics are block sums of `c_kl` and of `n_k = |alpha_k|^2 + N_kk`.

use std::ops::Range;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::lattice::{Domain, Grid};
use crate::state::GaussianState;

/// Site photon numbers and normally ordered pair correlations in one domain.
#[derive(Clone, Debug, PartialEq)]
pub struct PairCorrelation {
    pub domain: Domain,
    pub n_local: Vec<f64>,
    pub c_local: Array2<f64>,
}

impl PairCorrelation {
    pub fn sites(&self) -> usize {
        self.n_local.len()
    }
}

pub fn pair_correlation_matrix(s: &GaussianState) -> PairCorrelation {
    let m = s.sites();
    let n_local: Vec<f64> = (0..m).map(|k| s.alpha[k].norm_sqr() + s.normal[[k, k]].re).collect();
    let mut c_local = Array2::zeros((m, m));
    for k in 0..m {
        let ak = s.alpha[k];
        for l in k..m {
            let al = s.alpha[l];
            let n = s.normal[[k, l]];
            let a = s.anomalous[[k, l]];
            let c = 2.0 * (n * ak * al.conj()).re
                + 2.0 * (a * ak.conj() * al.conj()).re
                + n.norm_sqr()
                + a.norm_sqr();
            c_local[[k, l]] = c;
            c_local[[l, k]] = c;
        }
    }
    PairCorrelation { domain: s.grid.domain(), n_local, c_local }
}

/// Site-index intervals `[lo, hi)` of square bandpass filters.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalSet {
    domain: Domain,
    ranges: Vec<Range<usize>>,
    /// Filter centers in the domain's coordinate, when generated from centers.
    centers: Vec<f64>,
    allow_overlap: bool,
}

impl IntervalSet {
    pub fn new(domain: Domain, sites: usize, ranges: Vec<Range<usize>>, allow_overlap: bool) -> Result<IntervalSet> {
        for r in &ranges {
            if r.start >= r.end || r.end > sites {
                return Err(Error::config(format!("interval {r:?} is empty or outside 0..{sites}")));
            }
        }
        let set = IntervalSet { domain, centers: Vec::new(), ranges, allow_overlap };
        if !allow_overlap && !set.is_disjoint() {
            return Err(Error::config("intervals overlap; pass allow_overlap to permit this"));
        }
        Ok(set)
    }

    /// Square bandpass filters `|nu_k - center| <= half_width`. Centers whose
    /// band contains no site are reported as errors.
    pub fn from_centers(grid: &Grid, centers: &[f64], half_width: f64, allow_overlap: bool) -> Result<IntervalSet> {
        if !(half_width > 0.0) {
            return Err(Error::config(format!("filter half-width must be positive, got {half_width}")));
        }
        let coords = grid.coords();
        let mut ranges = Vec::with_capacity(centers.len());
        for &c in centers {
            let lo = coords.partition_point(|&x| c - x > half_width);
            let hi = coords.partition_point(|&x| x - c <= half_width);
            if lo >= hi {
                return Err(Error::config(format!("filter centered at {c} selects no grid site")));
            }
            ranges.push(lo..hi);
        }
        let mut set = IntervalSet::new(grid.domain(), grid.sites(), ranges, allow_overlap)?;
        set.centers = centers.to_vec();
        Ok(set)
    }

    /// Adjacent filters of half-width `half_width` covering `[-window, window]`,
    /// with one filter centered on the origin. Filter edges sit at odd
    /// multiples of `half_width`.
    pub fn tiling(grid: &Grid, half_width: f64, window: f64) -> Result<IntervalSet> {
        if !(half_width > 0.0) || !(window >= half_width) {
            return Err(Error::config("tiling needs 0 < half_width <= window"));
        }
        let n = ((window - half_width) / (2.0 * half_width) + 1e-9).floor() as i64;
        let centers: Vec<f64> = (-n..=n).map(|i| 2.0 * half_width * i as f64).collect();
        IntervalSet::from_centers(grid, &centers, half_width, false)
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn allows_overlap(&self) -> bool {
        self.allow_overlap
    }

    pub fn overlaps(&self, i: usize, j: usize) -> bool {
        let (a, b) = (&self.ranges[i], &self.ranges[j]);
        a.start < b.end && b.start < a.end
    }

    pub fn is_disjoint(&self) -> bool {
        (0..self.len()).all(|i| (i + 1..self.len()).all(|j| !self.overlaps(i, j)))
    }

    /// Center coordinate of interval `i`: the generating center if known,
    /// else the midpoint of the covered sites.
    pub fn center(&self, i: usize, grid: &Grid) -> f64 {
        self.centers.get(i).copied().unwrap_or_else(|| {
            let r = &self.ranges[i];
            0.5 * (grid.coords()[r.start] + grid.coords()[r.end - 1])
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationStats {
    pub t: f64,
    pub domain: Domain,
    /// `m_i = <n_i>`.
    pub m: Vec<f64>,
    /// `c_ij = <:dn_i dn_j:>`.
    pub c: Array2<f64>,
    /// `eta_ij`; `None` where an interval carries no photons.
    pub eta: Array2<Option<f64>>,
    /// `F_i = 1 + c_ii / m_i`; `None` where `m_i = 0`.
    pub fano: Vec<Option<f64>>,
    disjoint: Vec<Vec<bool>>,
}

impl CorrelationStats {
    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn eta_diag(&self, i: usize) -> Option<f64> {
        self.eta[[i, i]]
    }

    pub fn are_disjoint(&self, i: usize, j: usize) -> bool {
        self.disjoint[i][j]
    }

    /// Worst violation of `eta_ii <= 1` and `|eta_ij| <= 1` (disjoint pairs),
    /// as `max(0, value - 1)`.
    pub fn eta_bound_excess(&self) -> f64 {
        let n = self.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let Some(e) = self.eta[[i, j]] else { continue };
                if i == j {
                    worst = worst.max(e - 1.0);
                } else if self.disjoint[i][j] {
                    worst = worst.max(e.abs() - 1.0);
                }
            }
        }
        worst
    }

    /// Largest `|F_i (1 - eta_ii) - 1|` over intervals with photons.
    pub fn fano_identity_defect(&self) -> f64 {
        (0..self.len())
            .filter_map(|i| Some((self.fano[i]?, self.eta_diag(i)?)))
            .map(|(f, e)| (f * (1.0 - e) - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// 1D prefix sums of `n_local` and 2D prefix sums of `c_local`.
#[derive(Clone, Debug)]
pub struct PrefixSums {
    sites: usize,
    mass: Vec<f64>,
    corr: Vec<f64>,
}

impl PrefixSums {
    pub fn new(pc: &PairCorrelation) -> PrefixSums {
        let m = pc.sites();
        let mut mass = vec![0.0; m + 1];
        for k in 0..m {
            mass[k + 1] = mass[k] + pc.n_local[k];
        }
        let w = m + 1;
        let mut corr = vec![0.0; w * w];
        for k in 0..m {
            let mut row = 0.0;
            for l in 0..m {
                row += pc.c_local[[k, l]];
                corr[(k + 1) * w + l + 1] = corr[k * w + l + 1] + row;
            }
        }
        PrefixSums { sites: m, mass, corr }
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn mass(&self, r: &Range<usize>) -> f64 {
        self.mass[r.end] - self.mass[r.start]
    }

    /// `sum_{k in a, l in b} c_kl`.
    pub fn corr(&self, a: &Range<usize>, b: &Range<usize>) -> f64 {
        let w = self.sites + 1;
        self.corr[a.end * w + b.end] - self.corr[a.start * w + b.end] - self.corr[a.end * w + b.start]
            + self.corr[a.start * w + b.start]
    }
}

fn check_ranges(pc: &PairCorrelation, intervals: &IntervalSet) -> Result<()> {
    if intervals.domain() != pc.domain {
        return Err(Error::contract(format!(
            "intervals are in the {} domain but the correlations are in the {} domain",
            intervals.domain(),
            pc.domain
        )));
    }
    if intervals.ranges().iter().any(|r| r.end > pc.sites()) {
        return Err(Error::contract("interval extends past the grid"));
    }
    Ok(())
}

pub fn interval_stats(pc: &PairCorrelation, intervals: &IntervalSet, t: f64) -> Result<CorrelationStats> {
    check_ranges(pc, intervals)?;
    let prefix = PrefixSums::new(pc);
    let ranges = intervals.ranges();
    let n = ranges.len();
    let m: Vec<f64> = ranges.iter().map(|r| prefix.mass(r)).collect();
    let mut c = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let v = if i == j {
                prefix.corr(&ranges[i], &ranges[j])
            } else {
                0.5 * (prefix.corr(&ranges[i], &ranges[j]) + prefix.corr(&ranges[j], &ranges[i]))
            };
            c[[i, j]] = v;
            c[[j, i]] = v;
        }
    }
    let var: Vec<f64> = (0..n).map(|i| c[[i, i]] + m[i]).collect();
    let eta = Array2::from_shape_fn((n, n), |(i, j)| {
        if m[i] > 0.0 && m[j] > 0.0 && var[i] > 0.0 && var[j] > 0.0 {
            Some(c[[i, j]] / (var[i] * var[j]).sqrt())
        } else {
            None
        }
    });
    let fano = (0..n).map(|i| (m[i] > 0.0).then(|| 1.0 + c[[i, i]] / m[i])).collect();
    let disjoint = (0..n).map(|i| (0..n).map(|j| i != j && !intervals.overlaps(i, j)).collect()).collect();
    Ok(CorrelationStats { t, domain: intervals.domain(), m, c, eta, fano, disjoint })
}

/// `D_ij = c_ii c_jj - c_ij^2`; negative values certify nonclassical correlation.
pub fn cs_test(stats: &CorrelationStats, i: usize, j: usize) -> Result<f64> {
    if i >= stats.len() || j >= stats.len() {
        return Err(Error::contract("interval index out of range"));
    }
    if !stats.are_disjoint(i, j) {
        return Err(Error::contract(format!(
            "Cauchy-Schwarz test needs two disjoint intervals, got {i} and {j}"
        )));
    }
    Ok(stats.c[[i, i]] * stats.c[[j, j]] - stats.c[[i, j]].powi(2))
}

#[derive(Clone, Debug, PartialEq)]
pub struct FanoOptimum {
    pub interval: Range<usize>,
    pub fano: f64,
    pub mass: f64,
}

/// Square bandpass with the smallest Fano factor over all contiguous
/// intervals of at least `min_width` sites. Ties go to the smaller start,
/// then the smaller width. `None` if every candidate carries no photons.
pub fn optimize_fano_filter(pc: &PairCorrelation, min_width: usize) -> Result<Option<FanoOptimum>> {
    optimize_fano_filter_above(pc, min_width, 0.0)
}

/// As [`optimize_fano_filter`], skipping candidates that pass no more than
/// `min_mass` photons. Far spectral tails carry only round-off from the
/// transform, where `1 + C / Mass` is noise divided by noise.
pub fn optimize_fano_filter_above(pc: &PairCorrelation, min_width: usize, min_mass: f64) -> Result<Option<FanoOptimum>> {
    if min_width == 0 {
        return Err(Error::config("min_width must be at least 1"));
    }
    if !(min_mass >= 0.0) || !min_mass.is_finite() {
        return Err(Error::config(format!("min_mass must be finite and non-negative, got {min_mass}")));
    }
    let prefix = PrefixSums::new(pc);
    let m = pc.sites();
    let mut best: Option<FanoOptimum> = None;
    for lo in 0..m {
        for hi in (lo + min_width)..=m {
            let r = lo..hi;
            let mass = prefix.mass(&r);
            if !(mass > min_mass) {
                continue;
            }
            let f = 1.0 + prefix.corr(&r, &r) / mass;
            if best.as_ref().is_none_or(|b| f < b.fano) {
                best = Some(FanoOptimum { interval: r, fano: f, mass });
            }
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsOptimum {
    pub first: Range<usize>,
    pub second: Range<usize>,
    pub c_first: f64,
    pub c_second: f64,
    pub c_cross: f64,
    /// Most negative `c_ii c_jj - c_ij^2`.
    pub d_min: f64,
    /// `c_ij^2 / (c_ii c_jj)`; `None` unless both `c_ii` and `c_jj` are positive.
    pub v_norm: Option<f64>,
}

/// Pair of disjoint equal-width intervals (`first` left of `second`) with the
/// most negative Cauchy-Schwarz discriminant. Ties go to the smaller first
/// start, then the smaller second start.
pub fn optimize_cs_pair(pc: &PairCorrelation, width: usize) -> Result<Option<CsOptimum>> {
    if width == 0 {
        return Err(Error::config("width must be at least 1"));
    }
    let m = pc.sites();
    if 2 * width > m {
        return Ok(None);
    }
    let prefix = PrefixSums::new(pc);
    let diag: Vec<f64> = (0..=m - width).map(|s| prefix.corr(&(s..s + width), &(s..s + width))).collect();
    let mut best: Option<CsOptimum> = None;
    for i in 0..=m - 2 * width {
        let a = i..i + width;
        for j in (i + width)..=m - width {
            let b = j..j + width;
            let cab = prefix.corr(&a, &b);
            let d = diag[i] * diag[j] - cab * cab;
            if best.as_ref().is_none_or(|o| d < o.d_min) {
                best = Some(CsOptimum {
                    first: a.clone(),
                    second: b,
                    c_first: diag[i],
                    c_second: diag[j],
                    c_cross: cab,
                    d_min: d,
                    v_norm: None,
                });
            }
        }
    }
    Ok(best.map(|mut o| {
        o.v_norm = (o.c_first > 0.0 && o.c_second > 0.0).then(|| o.c_cross * o.c_cross / (o.c_first * o.c_second));
        o
    }))
}

/// `-10 log10(F)`: positive for sub-Poissonian light.
pub fn squeezing_db(fano: f64) -> Result<f64> {
    if !(fano > 0.0) {
        return Err(Error::contract(format!("Fano factor must be positive, got {fano}")));
    }
    Ok(-10.0 * fano.log10())
}
