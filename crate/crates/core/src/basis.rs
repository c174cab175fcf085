//! B-spline and Fourier bases.
//!
//! The link function of the index model is represented as `g(s) = φ(s)ᵀd` in a
//! clamped B-spline basis. Evaluation uses the triangular derivative recursion
//! over the single non-empty knot span containing `s`, so each row of a design
//! matrix has at most `degree + 1` non-zero entries; [`LocalRows`] keeps that
//! sparsity for the fitting code.
//!
//! Functional covariates are reduced to inner products against an orthonormal
//! Fourier basis with [`fourier_design`].

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Clamped B-spline basis on `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineBasis {
    degree: usize,
    dim: usize,
    knots: Vec<f64>,
}

impl SplineBasis {
    /// Basis with equally spaced interior knots on `[lo, hi]`.
    pub fn uniform(degree: usize, dim: usize, lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
            return Err(Error::InvalidBasis(format!("domain [{lo}, {hi}] is empty")));
        }
        if dim < degree + 1 {
            return Err(Error::InvalidBasis(format!(
                "dimension {dim} is smaller than degree + 1 = {}",
                degree + 1
            )));
        }
        let n_interior = dim - degree - 1;
        let mut knots = Vec::with_capacity(dim + degree + 1);
        knots.extend(std::iter::repeat_n(lo, degree + 1));
        let step = (hi - lo) / (n_interior + 1) as f64;
        for k in 1..=n_interior {
            knots.push(lo + step * k as f64);
        }
        knots.extend(std::iter::repeat_n(hi, degree + 1));
        Self::from_knots(degree, knots)
    }

    /// Basis sized to cover a set of index values, padded by `pad` of the
    /// observed range on each side.
    pub fn for_index_range(degree: usize, dim: usize, values: &[f64], pad: f64) -> Result<Self> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in values {
            if !v.is_finite() {
                return Err(Error::Input("non-finite index value".into()));
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if values.is_empty() {
            return Err(Error::Input("no index values".into()));
        }
        let width = hi - lo;
        let margin = if width > 1e-12 * (1.0 + lo.abs().max(hi.abs())) {
            pad * width
        } else {
            0.5
        };
        Self::uniform(degree, dim, lo - margin, hi + margin)
    }

    /// Basis from an explicit knot sequence.
    pub fn from_knots(degree: usize, knots: Vec<f64>) -> Result<Self> {
        let order = degree + 1;
        if knots.len() < 2 * order {
            return Err(Error::InvalidBasis(format!(
                "{} knots cannot support degree {degree}",
                knots.len()
            )));
        }
        if knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidBasis("non-finite knot".into()));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidBasis("knots must be nondecreasing".into()));
        }
        let dim = knots.len() - order;
        let lo = knots[0];
        let hi = knots[knots.len() - 1];
        if hi <= lo {
            return Err(Error::InvalidBasis("empty domain".into()));
        }
        if knots[..order].iter().any(|&k| k != lo) || knots[dim..].iter().any(|&k| k != hi) {
            return Err(Error::InvalidBasis(
                "boundary knots must have multiplicity degree + 1".into(),
            ));
        }
        if knots[order..dim].iter().any(|&k| k <= lo || k >= hi) {
            return Err(Error::InvalidBasis(
                "interior knots must lie strictly inside the domain".into(),
            ));
        }
        Ok(Self { degree, dim, knots })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    pub fn contains(&self, s: f64) -> bool {
        let (lo, hi) = self.domain();
        s >= lo && s <= hi
    }

    /// Greville abscissae. Coefficients `a + b·ξⱼ` represent the affine
    /// function `a + b·s` exactly.
    pub fn greville(&self) -> Vec<f64> {
        let p = self.degree.max(1);
        (0..self.dim)
            .map(|j| {
                if self.degree == 0 {
                    0.5 * (self.knots[j] + self.knots[j + 1])
                } else {
                    self.knots[j + 1..=j + p].iter().sum::<f64>() / p as f64
                }
            })
            .collect()
    }

    /// Coefficients representing `intercept + slope·s`.
    pub fn affine_coefficients(&self, intercept: f64, slope: f64) -> DVector<f64> {
        DVector::from_iterator(
            self.dim,
            self.greville().into_iter().map(|x| intercept + slope * x),
        )
    }

    /// The same function space on the reflected domain `[-hi, -lo]`;
    /// basis function `j` of `self` at `s` equals basis function
    /// `dim - 1 - j` of the mirror at `-s`.
    pub fn mirrored(&self) -> Self {
        let knots = self.knots.iter().rev().map(|k| -k).collect();
        Self {
            degree: self.degree,
            dim: self.dim,
            knots,
        }
    }

    fn span(&self, s: f64) -> usize {
        let p = self.degree;
        let n = self.dim;
        if s >= self.knots[n] {
            return n - 1;
        }
        // knots[lo] <= s < knots[hi]
        let (mut lo, mut hi) = (p, n);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if s < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// Non-zero basis values and derivatives at `s` (assumed inside the
    /// domain). Writes `(n_ders + 1) × (degree + 1)` values row-major into
    /// `out` and returns the index of the first non-zero basis function.
    fn local_derivatives(&self, s: f64, n_ders: usize, out: &mut [f64]) -> usize {
        let p = self.degree;
        let u = &self.knots;
        let i = self.span(s);
        let w = p + 1;
        debug_assert!(out.len() >= (n_ders + 1) * w);

        let mut ndu = vec![0.0; w * w];
        let mut left = vec![0.0; w];
        let mut right = vec![0.0; w];
        ndu[0] = 1.0;
        for j in 1..=p {
            left[j] = s - u[i + 1 - j];
            right[j] = u[i + j] - s;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j * w + r] = right[r + 1] + left[j - r];
                let temp = ndu[r * w + j - 1] / ndu[j * w + r];
                ndu[r * w + j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j * w + j] = saved;
        }
        for j in 0..=p {
            out[j] = ndu[j * w + p];
        }
        if n_ders > 0 {
            let mut a = vec![0.0; 2 * w];
            for r in 0..=p {
                let (mut s1, mut s2) = (0usize, 1usize);
                a[0] = 1.0;
                for k in 1..=n_ders {
                    let mut d = 0.0;
                    let rk = r as isize - k as isize;
                    let pk = p as isize - k as isize;
                    if k > p {
                        out[k * w + r] = 0.0;
                        continue;
                    }
                    let pk_u = pk as usize;
                    if rk >= 0 {
                        let rk_u = rk as usize;
                        a[s2 * w] = a[s1 * w] / ndu[(pk_u + 1) * w + rk_u];
                        d = a[s2 * w] * ndu[rk_u * w + pk_u];
                    }
                    let j1: isize = if rk >= -1 { 1 } else { -rk };
                    let j2: isize = if r as isize - 1 <= pk {
                        k as isize - 1
                    } else {
                        p as isize - r as isize
                    };
                    let mut j = j1;
                    while j <= j2 {
                        let ju = j as usize;
                        let idx = (rk + j) as usize;
                        a[s2 * w + ju] =
                            (a[s1 * w + ju] - a[s1 * w + ju - 1]) / ndu[(pk_u + 1) * w + idx];
                        d += a[s2 * w + ju] * ndu[idx * w + pk_u];
                        j += 1;
                    }
                    if r as isize <= pk {
                        a[s2 * w + k] = -a[s1 * w + k - 1] / ndu[(pk_u + 1) * w + r];
                        d += a[s2 * w + k] * ndu[r * w + pk_u];
                    }
                    out[k * w + r] = d;
                    std::mem::swap(&mut s1, &mut s2);
                }
            }
            let mut factor = p as f64;
            for k in 1..=n_ders {
                for j in 0..=p {
                    out[k * w + j] *= factor;
                }
                factor *= p as f64 - k as f64;
            }
        }
        i - p
    }

    /// Local (sparse) evaluation of value and derivatives up to `n_ders` at every
    /// point in `s`. Points outside the domain are clamped to the boundary;
    /// their derivative rows are zero.
    pub fn local_rows(&self, s: &[f64], n_ders: usize) -> Result<LocalRows> {
        if n_ders > self.degree {
            return Err(Error::Unsupported(format!(
                "derivative order {n_ders} exceeds spline degree {}",
                self.degree
            )));
        }
        let w = self.degree + 1;
        let mut start = Vec::with_capacity(s.len());
        let mut vals = vec![0.0; s.len() * (n_ders + 1) * w];
        let (lo, hi) = self.domain();
        let mut buf = vec![0.0; (n_ders + 1) * w];
        for (row, &x) in s.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::Input(format!("non-finite evaluation point at row {row}")));
            }
            let outside = x < lo || x > hi;
            let xc = x.clamp(lo, hi);
            let first = self.local_derivatives(xc, n_ders, &mut buf);
            start.push(first);
            let base = row * (n_ders + 1) * w;
            vals[base..base + w].copy_from_slice(&buf[..w]);
            if !outside {
                vals[base + w..base + (n_ders + 1) * w].copy_from_slice(&buf[w..]);
            }
        }
        Ok(LocalRows {
            dim: self.dim,
            width: w,
            n_ders,
            start,
            vals,
        })
    }

    /// Dense evaluation matrix (rows = points) of the given derivative order.
    pub fn design_matrix(&self, s: &[f64], deriv_order: usize) -> Result<DMatrix<f64>> {
        Ok(self.local_rows(s, deriv_order)?.dense(deriv_order))
    }
}

/// Row-sparse evaluation of a spline basis at a set of points.
#[derive(Debug, Clone)]
pub struct LocalRows {
    dim: usize,
    width: usize,
    n_ders: usize,
    start: Vec<usize>,
    vals: Vec<f64>,
}

impl LocalRows {
    pub fn len(&self) -> usize {
        self.start.len()
    }

    pub fn is_empty(&self) -> bool {
        self.start.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// First non-zero column of `row` and its `degree + 1` values of
    /// derivative order `k`.
    #[inline]
    pub fn row(&self, row: usize, k: usize) -> (usize, &[f64]) {
        debug_assert!(k <= self.n_ders);
        let base = row * (self.n_ders + 1) * self.width + k * self.width;
        (self.start[row], &self.vals[base..base + self.width])
    }

    /// `Φ⁽ᵏ⁾ d`. Coefficients are taken relative to `d[0]` so that a
    /// constant coefficient vector reproduces its constant exactly.
    pub fn apply(&self, k: usize, d: &DVector<f64>) -> DVector<f64> {
        let shift = if k == 0 { d[0] } else { 0.0 };
        DVector::from_iterator(
            self.len(),
            (0..self.len()).map(|i| {
                let (first, v) = self.row(i, k);
                let mut acc = 0.0;
                for (j, &b) in v.iter().enumerate() {
                    acc += b * (d[first + j] - shift);
                }
                acc + shift
            }),
        )
    }

    /// `Φ⁽ᵏ⁾ᵀ v`.
    pub fn transpose_apply(&self, k: usize, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        for i in 0..self.len() {
            let (first, row) = self.row(i, k);
            let vi = v[i];
            for (j, &b) in row.iter().enumerate() {
                out[first + j] += b * vi;
            }
        }
        out
    }

    /// `Φᵀ diag(w) Φ` for the value rows.
    pub fn weighted_gram(&self, weights: &DVector<f64>) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.len() {
            let (first, row) = self.row(i, 0);
            let wi = weights[i];
            for (a, &ba) in row.iter().enumerate() {
                let wa = wi * ba;
                for (b, &bb) in row.iter().enumerate().skip(a) {
                    g[(first + a, first + b)] += wa * bb;
                }
            }
        }
        g.fill_lower_triangle_with_upper_triangle();
        g
    }

    /// Dense matrix of derivative order `k`.
    pub fn dense(&self, k: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.len(), self.dim);
        for i in 0..self.len() {
            let (first, row) = self.row(i, k);
            for (j, &b) in row.iter().enumerate() {
                m[(i, first + j)] = b;
            }
        }
        m
    }
}

/// `φ⁽ᵏ⁾(s)` as a dense vector of length `dim`.
///
/// Points outside the domain are clamped to the nearest boundary (constant
/// extrapolation), so derivatives there are zero.
pub fn eval_basis(basis: &SplineBasis, s: f64, deriv_order: usize) -> Result<DVector<f64>> {
    if !s.is_finite() {
        return Err(Error::Input(format!("evaluation point {s} is not finite")));
    }
    let rows = basis.local_rows(&[s], deriv_order)?;
    let (first, vals) = rows.row(0, deriv_order);
    let mut out = DVector::zeros(basis.dim());
    for (j, &v) in vals.iter().enumerate() {
        out[first + j] = v;
    }
    Ok(out)
}

/// Roughness penalty `∫ φ″ φ″ᵀ ds` for a spline basis.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyMatrix {
    pub entries: DMatrix<f64>,
    /// Quadrature root `R` with `entries = RᵀR`: row `q` is `√w_q φ″(s_q)ᵀ`.
    pub root: DMatrix<f64>,
    pub basis: SplineBasis,
}

impl PenaltyMatrix {
    /// `dᵀPd` as `‖Rd‖²`: nonnegative, and accurate when `d` is nearly
    /// affine, where `d·(Pd)` loses everything to cancellation.
    pub fn quadratic_form(&self, d: &DVector<f64>) -> f64 {
        (&self.root * d).norm_squared()
    }

    /// `Pd` computed as `Rᵀ(Rd)`.
    pub fn apply(&self, d: &DVector<f64>) -> DVector<f64> {
        self.root.tr_mul(&(&self.root * d))
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            if m == 1 {
                p1 = x;
                p0 = 1.0;
            } else {
                for k in 2..=m {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
            }
            // p1 = P_m(x), p0 = P_{m-1}(x)
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    (nodes, weights)
}

/// Second-derivative penalty, integrated exactly span by span.
pub fn penalty_matrix(basis: &SplineBasis) -> Result<PenaltyMatrix> {
    let p = basis.degree();
    if p < 2 {
        return Err(Error::InvalidBasis(format!(
            "second-derivative penalty needs degree >= 2, got {p}"
        )));
    }
    // integrand has degree 2(p-2); m nodes integrate degree 2m-1 exactly
    let m = (2 * (p - 2) + 1).div_ceil(2).max(1);
    let (nodes, weights) = gauss_legendre(m);
    let k = basis.dim();
    let knots = basis.knots();
    let mut entries = DMatrix::zeros(k, k);
    let mut root = DMatrix::zeros((k - p) * m, k);
    let mut row = 0;
    let mut buf = vec![0.0; 3 * (p + 1)];
    for span in p..k {
        let (a, b) = (knots[span], knots[span + 1]);
        if b <= a {
            continue;
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (&x, &w) in nodes.iter().zip(&weights) {
            let s = mid + half * x;
            let first = basis.local_derivatives(s, 2, &mut buf);
            let d2 = &buf[2 * (p + 1)..3 * (p + 1)];
            for i in 0..=p {
                for j in i..=p {
                    entries[(first + i, first + j)] += w * half * d2[i] * d2[j];
                }
                root[(row, first + i)] = (w * half).sqrt() * d2[i];
            }
            row += 1;
        }
    }
    entries.fill_lower_triangle_with_upper_triangle();
    Ok(PenaltyMatrix {
        entries,
        root: root.rows(0, row).into_owned(),
        basis: basis.clone(),
    })
}

/// Orthonormal Fourier basis on one period: a constant followed by
/// `(dim - 1) / 2` sine/cosine pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierBasis {
    dim: usize,
    period: f64,
}

impl FourierBasis {
    pub fn new(dim: usize, period: f64) -> Result<Self> {
        if dim == 0 || dim % 2 == 0 {
            return Err(Error::InvalidBasis(format!("Fourier dimension must be odd, got {dim}")));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidBasis(format!("period must be positive, got {period}")));
        }
        Ok(Self { dim, period })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Basis function `j` at offset `t` from the start of the window.
    pub fn value(&self, j: usize, t: f64) -> f64 {
        if j == 0 {
            return (1.0 / self.period).sqrt();
        }
        let harmonic = j.div_ceil(2) as f64;
        let arg = 2.0 * PI * harmonic * t / self.period;
        let scale = (2.0 / self.period).sqrt();
        if j % 2 == 1 {
            scale * arg.sin()
        } else {
            scale * arg.cos()
        }
    }
}

/// Trapezoid-rule inner products of each history with each Fourier basis
/// function. `grid` holds the sample times shared by every row.
pub fn fourier_design(
    histories: &DMatrix<f64>,
    grid: &[f64],
    basis: &FourierBasis,
) -> Result<DMatrix<f64>> {
    let t_len = grid.len();
    if histories.ncols() != t_len {
        return Err(Error::Input(format!(
            "history rows have {} samples but the grid has {t_len}",
            histories.ncols()
        )));
    }
    if t_len < 2 * basis.dim() {
        return Err(Error::UnderResolved {
            samples: t_len,
            dim: basis.dim(),
        });
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Input("history grid must be strictly increasing".into()));
    }
    let mut quad = vec![0.0; t_len];
    for i in 0..t_len - 1 {
        let h = 0.5 * (grid[i + 1] - grid[i]);
        quad[i] += h;
        quad[i + 1] += h;
    }
    let t0 = grid[0];
    // weighted basis: columns are quadrature weight × basis function
    let weighted = DMatrix::from_fn(t_len, basis.dim(), |t, j| {
        quad[t] * basis.value(j, grid[t] - t0)
    });
    Ok(histories * weighted)
}

/// A functional covariate read from a long-format `series_id,t,value` file.
#[derive(Debug, Clone, PartialEq)]
pub struct HistorySet {
    pub series_ids: Vec<String>,
    pub grid: Vec<f64>,
    pub values: DMatrix<f64>,
}

impl HistorySet {
    pub fn row_of(&self, id: &str) -> Option<usize> {
        self.series_ids.iter().position(|s| s == id)
    }
}

pub fn read_history_csv(path: &Path) -> Result<HistorySet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    parse_history(&mut reader)
}

pub fn parse_history<R: std::io::Read>(reader: &mut csv::Reader<R>) -> Result<HistorySet> {
    let headers = reader
        .headers()
        .map_err(|e| Error::Input(e.to_string()))?
        .clone();
    let expected = ["series_id", "t", "value"];
    if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h.trim() != e) {
        return Err(Error::Input(format!(
            "history header must be `series_id,t,value`, got `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut ids: Vec<String> = Vec::new();
    let mut grid: Vec<f64> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut current_times: Vec<f64> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let line_no = line + 2;
        let record = record.map_err(|e| Error::Input(format!("line {line_no}: {e}")))?;
        let id = record.get(0).unwrap_or("").trim().to_string();
        let parse = |k: usize, name: &str| -> Result<f64> {
            record
                .get(k)
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .ok_or_else(|| Error::Input(format!("line {line_no}: missing {name}")))?
                .parse::<f64>()
                .map_err(|_| Error::Input(format!("line {line_no}: {name} is not a number")))
        };
        let t = parse(1, "t")?;
        let v = parse(2, "value")?;
        if id.is_empty() {
            return Err(Error::Input(format!("line {line_no}: missing series_id")));
        }
        if ids.last() != Some(&id) {
            if ids.contains(&id) {
                return Err(Error::Input(format!(
                    "line {line_no}: series `{id}` is not contiguous; file must be sorted by (series_id, t)"
                )));
            }
            if let Some(prev) = ids.last() {
                check_grid(&mut grid, &current_times, prev)?;
            }
            ids.push(id);
            rows.push(Vec::new());
            current_times.clear();
        }
        if current_times.last().is_some_and(|&last| t <= last) {
            return Err(Error::Input(format!("line {line_no}: t is not increasing within series")));
        }
        current_times.push(t);
        rows.last_mut().expect("row pushed above").push(v);
    }
    match ids.last() {
        Some(prev) => check_grid(&mut grid, &current_times, prev)?,
        None => return Err(Error::Input("history file has no rows".into())),
    }
    let t_len = grid.len();
    let values = DMatrix::from_fn(rows.len(), t_len, |i, t| rows[i][t]);
    Ok(HistorySet {
        series_ids: ids,
        grid,
        values,
    })
}

fn check_grid(grid: &mut Vec<f64>, times: &[f64], id: &str) -> Result<()> {
    if grid.is_empty() {
        grid.extend_from_slice(times);
        Ok(())
    } else if grid.as_slice() == times {
        Ok(())
    } else {
        Err(Error::Input(format!(
            "series `{id}` does not share the common time grid"
        )))
    }
}
