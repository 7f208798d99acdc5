//! Uniform clamped cubic B-splines on an evenly spaced break-point grid.
//!
//! A spline is stored as its domain start `t0`, the interval length, and one
//! coefficient per basis function (`n + 3` coefficients for `n` intervals).
//! The knot vector is implied: the first and last break points carry
//! multiplicity four, interior break points are single. Clamping makes the
//! ends interpolate: the value at `t0` is the first coefficient and the value
//! at the domain end is the last.
//!
//! Evaluation works in the normalized coordinate `x = (t - t0) / interval_len`
//! so break points sit at integers; basis functions are evaluated with the
//! Cox-de Boor recursion on the implied knot grid.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector, Matrix4, Vector4};

/// Clamped uniform cubic B-spline.
#[derive(Debug, Clone, PartialEq)]
pub struct BSpline {
    t0: f64,
    interval_len: f64,
    coeffs: Vec<f64>,
}

/// Derivative of a [`BSpline`]: a clamped spline of lower degree on the same
/// break-point grid. Degree 2, 1 or 0 for derivative order 1, 2 or 3.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineDeriv {
    degree: usize,
    t0: f64,
    interval_len: f64,
    coeffs: Vec<f64>,
}

/// Knot value for a clamped spline of degree `deg` with `n` intervals, in
/// normalized units (break points at integers). Index runs over the implied
/// knot vector; ends are clamped to multiplicity `deg + 1`.
#[inline]
fn knot(deg: usize, n: usize, idx: usize) -> f64 {
    (idx as isize - deg as isize).clamp(0, n as isize) as f64
}

fn basis_rec(knots_deg: usize, n: usize, j: usize, d: usize, x: f64) -> f64 {
    let nf = n as f64;
    if d == 0 {
        let a = knot(knots_deg, n, j);
        let b = knot(knots_deg, n, j + 1);
        // Half-open spans, except the span ending at the domain end, which is
        // closed so the right end point evaluates without falling off.
        let inside = a <= x && (x < b || (x == b && b == nf && a < b));
        return if inside { 1.0 } else { 0.0 };
    }
    let mut v = 0.0;
    let den1 = knot(knots_deg, n, j + d) - knot(knots_deg, n, j);
    if den1 > 0.0 {
        v += (x - knot(knots_deg, n, j)) / den1 * basis_rec(knots_deg, n, j, d - 1, x);
    }
    let den2 = knot(knots_deg, n, j + d + 1) - knot(knots_deg, n, j + 1);
    if den2 > 0.0 {
        v += (knot(knots_deg, n, j + d + 1) - x) / den2 * basis_rec(knots_deg, n, j + 1, d - 1, x);
    }
    v
}

/// Basis function `j` of a clamped degree-`deg` spline with `n` intervals,
/// at normalized coordinate `x`.
pub(crate) fn basis(deg: usize, n: usize, j: usize, x: f64) -> f64 {
    basis_rec(deg, n, j, deg, x)
}

#[inline]
fn interval_index(x: f64, n: usize) -> usize {
    (x.floor() as isize).clamp(0, n as isize - 1) as usize
}

/// One backward-differencing pass: coefficients of the derivative spline
/// (degree drops by one). `deg` and `n` describe the spline being
/// differentiated; `dt` converts from normalized to real time.
fn diff_once(deg: usize, n: usize, c: &[f64], dt: f64) -> Vec<f64> {
    (0..c.len() - 1)
        .map(|j| {
            let den = knot(deg, n, j + 1 + deg) - knot(deg, n, j + 1);
            if den > 0.0 {
                deg as f64 * (c[j + 1] - c[j]) / den / dt
            } else {
                0.0
            }
        })
        .collect()
}

impl BSpline {
    /// Builds a spline from its domain start, interval length and
    /// coefficient vector (`n + 3` coefficients for `n` intervals).
    pub fn new(t0: f64, interval_len: f64, coeffs: Vec<f64>) -> Result<Self> {
        if !t0.is_finite() || !interval_len.is_finite() || interval_len <= 0.0 {
            return Err(Error::Argument(format!(
                "interval_len must be finite and > 0, got {interval_len}"
            )));
        }
        if coeffs.len() < 4 {
            return Err(Error::Degenerate(format!(
                "cubic spline needs at least 4 coefficients, got {}",
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Argument("non-finite coefficient".into()));
        }
        Ok(Self { t0, interval_len, coeffs })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn interval_len(&self) -> f64 {
        self.interval_len
    }

    pub fn n_intervals(&self) -> usize {
        self.coeffs.len() - 3
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + self.domain_len()
    }

    pub fn domain_len(&self) -> f64 {
        self.n_intervals() as f64 * self.interval_len
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Normalized coordinate of `t`, with a small relative slack so values
    /// produced by round-tripping through the domain arithmetic still count
    /// as inside.
    fn normalize(&self, t: f64) -> Result<f64> {
        let n = self.n_intervals() as f64;
        let x = (t - self.t0) / self.interval_len;
        let eps = 1e-9 * n.max(1.0);
        if !x.is_finite() || x < -eps || x > n + eps {
            return Err(Error::Domain(format!(
                "t = {t} outside spline domain [{}, {}]",
                self.t0,
                self.t_end()
            )));
        }
        Ok(x.clamp(0.0, n))
    }

    /// Spline value at `t`. Errors if `t` lies outside the domain.
    pub fn eval(&self, t: f64) -> Result<f64> {
        let n = self.n_intervals();
        let x = self.normalize(t)?;
        let i = interval_index(x, n);
        let mut acc = 0.0;
        for j in i..=i + 3 {
            acc += self.coeffs[j] * basis(3, n, j, x);
        }
        Ok(acc)
    }

    /// Derivative of the given order (1 to 3) as a degree-reduced spline.
    pub fn derivative(&self, order: usize) -> Result<SplineDeriv> {
        if !(1..=3).contains(&order) {
            return Err(Error::Argument(format!(
                "derivative order must be 1..=3, got {order}"
            )));
        }
        let n = self.n_intervals();
        let mut deg = 3;
        let mut c = self.coeffs.clone();
        for _ in 0..order {
            c = diff_once(deg, n, &c, self.interval_len);
            deg -= 1;
        }
        Ok(SplineDeriv {
            degree: deg,
            t0: self.t0,
            interval_len: self.interval_len,
            coeffs: c,
        })
    }

    /// Value plus first three derivatives at a break point `t`. The third
    /// derivative is piecewise constant, so the piece is chosen explicitly:
    /// `from_left` takes the interval ending at `t`, otherwise the one
    /// starting at `t`.
    pub(crate) fn derivs_for_piece(&self, t: f64, from_left: bool) -> Result<[f64; 4]> {
        let h = 0.5 * self.interval_len;
        let t3 = if from_left { t - h } else { t + h };
        Ok([
            self.eval(t)?,
            self.derivative(1)?.eval(t)?,
            self.derivative(2)?.eval(t)?,
            self.derivative(3)?.eval(t3)?,
        ])
    }

    /// Returns a spline whose domain starts `tau` later, restricted to the
    /// whole intervals that remain. When `tau` is an integer number of
    /// intervals the result is exact: interior coefficients are re-indexed
    /// and only the clamped-end coefficients are re-solved. Otherwise the
    /// input is sampled twice per interval and refit.
    pub fn shift_domain(&self, tau: f64) -> Result<BSpline> {
        if !tau.is_finite() || tau < 0.0 || tau >= self.domain_len() {
            return Err(Error::Domain(format!(
                "shift {tau} outside [0, {})",
                self.domain_len()
            )));
        }
        if tau == 0.0 {
            return Ok(self.clone());
        }
        let dt = self.interval_len;
        let n = self.n_intervals();
        let frac = tau / dt;
        let whole = frac.round();
        if (frac - whole).abs() <= 1e-9 && whole >= 1.0 {
            let j = whole as usize;
            return self.restrict_from(j, n - j);
        }
        let m = (n as f64 - frac + 1e-9).floor() as usize;
        if m < 1 {
            return Err(Error::Domain(format!(
                "shift {tau} leaves no whole interval"
            )));
        }
        let a = self.t0 + tau;
        let per = if m >= 2 { 2 } else { 4 };
        let step = dt / per as f64;
        let mut samples = Vec::with_capacity(m * per + 1);
        for i in 0..=m * per {
            let t = a + step * i as f64;
            samples.push((t, self.eval(t)?));
        }
        fit_least_squares(&samples, a, m, dt)
    }

    /// Exact restriction to `[t0 + j*dt, t0 + (j+m)*dt]`. Valid because the
    /// restriction of a clamped spline to whole intervals lies in the smaller
    /// clamped space: uniform interior basis functions carry over one to one,
    /// and the four coefficients at each clamped end are pinned by the end
    /// interval's polynomial.
    pub(crate) fn restrict_from(&self, j: usize, m: usize) -> Result<BSpline> {
        debug_assert!(m >= 1 && j + m <= self.n_intervals());
        let dt = self.interval_len;
        let a = self.t0 + j as f64 * dt;
        let b = a + m as f64 * dt;
        let mut d = vec![0.0; m + 3];
        for p in 4..m.saturating_sub(1) {
            // basis p is uniform in both the input and the restriction
            d[p] = self.coeffs[p + j];
        }
        let left = solve_end(m, dt, EndSide::Left, &self.derivs_for_piece(a, false)?)?;
        d[..4].copy_from_slice(&left);
        if m >= 2 {
            let right = solve_end(m, dt, EndSide::Right, &self.derivs_for_piece(b, true)?)?;
            for (q, r) in right.iter().enumerate() {
                let idx = m - 1 + q;
                if idx >= 4 {
                    d[idx] = *r;
                }
            }
        }
        BSpline::new(a, dt, d)
    }
}

impl SplineDeriv {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn interval_len(&self) -> f64 {
        self.interval_len
    }

    pub fn n_intervals(&self) -> usize {
        self.coeffs.len() - self.degree
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Derivative value at `t`. For degree 0 the function is piecewise
    /// constant and right-continuous at break points.
    pub fn eval(&self, t: f64) -> Result<f64> {
        let n = self.n_intervals();
        let nf = n as f64;
        let x = (t - self.t0) / self.interval_len;
        let eps = 1e-9 * nf.max(1.0);
        if !x.is_finite() || x < -eps || x > nf + eps {
            return Err(Error::Domain(format!(
                "t = {t} outside spline domain [{}, {}]",
                self.t0,
                self.t0 + nf * self.interval_len
            )));
        }
        let x = x.clamp(0.0, nf);
        let i = interval_index(x, n);
        let mut acc = 0.0;
        for j in i..=i + self.degree {
            acc += self.coeffs[j] * basis(self.degree, n, j, x);
        }
        Ok(acc)
    }
}

/// Which clamped end of the domain an end-condition solve targets.
#[derive(Clone, Copy)]
pub enum EndSide {
    Left,
    Right,
}

/// Solves for the four coefficients adjacent to a clamped end from the value
/// and first three derivatives of the end interval's polynomial. `targets`
/// holds value, first, second derivative at the end point and the piece's
/// (constant) third derivative.
pub fn solve_end(n: usize, dt: f64, side: EndSide, targets: &[f64; 4]) -> Result<[f64; 4]> {
    let mut g = Matrix4::zeros();
    for p in 0..4 {
        let mut c = vec![0.0; n + 3];
        let idx = match side {
            EndSide::Left => p,
            EndSide::Right => n - 1 + p,
        };
        c[idx] = 1.0;
        let s = BSpline::new(0.0, dt, c)?;
        let t = match side {
            EndSide::Left => 0.0,
            EndSide::Right => n as f64 * dt,
        };
        let from_left = matches!(side, EndSide::Right);
        let v = s.derivs_for_piece(t, from_left)?;
        for i in 0..4 {
            g[(i, p)] = v[i];
        }
    }
    let rhs = Vector4::from_column_slice(targets);
    let sol = g
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Solve("singular end-condition system".into()))?;
    Ok([sol[0], sol[1], sol[2], sol[3]])
}

/// Coefficients that make the spline a straight line: value `m` at the domain
/// start and slope `k` per interval (time measured in intervals, i.e. with
/// `interval_len = 1` the spline evaluates to `m + k * (t - t0)`).
///
/// The pattern is `m + k * (0, 1/3, 1, 2, ..., n-1, n-1/3, n)`; it requires
/// at least four intervals.
pub fn ideal_line_coeffs(m: f64, k: f64, n: usize) -> Result<Vec<f64>> {
    if n < 4 {
        return Err(Error::Argument(format!(
            "line coefficients need n >= 4 intervals, got {n}"
        )));
    }
    let mut c = Vec::with_capacity(n + 3);
    c.push(m);
    c.push(m + k / 3.0);
    for i in 1..n {
        c.push(m + k * i as f64);
    }
    c.push(m + k * (n as f64 - 1.0 / 3.0));
    c.push(m + k * n as f64);
    Ok(c)
}

/// Least-squares fit of a clamped cubic spline with `n_intervals` intervals
/// starting at `t0` to the given `(t, y)` samples. Needs at least `n + 3`
/// samples inside the domain; the solve is a backward-stable SVD with a rank
/// check.
pub fn fit_least_squares(
    samples: &[(f64, f64)],
    t0: f64,
    n_intervals: usize,
    interval_len: f64,
) -> Result<BSpline> {
    if n_intervals < 1 || !interval_len.is_finite() || interval_len <= 0.0 {
        return Err(Error::Argument(format!(
            "need n_intervals >= 1 and interval_len > 0, got {n_intervals}, {interval_len}"
        )));
    }
    let cols = n_intervals + 3;
    if samples.len() < cols {
        return Err(Error::Length(format!(
            "{} samples cannot determine {cols} coefficients",
            samples.len()
        )));
    }
    let n = n_intervals;
    let nf = n as f64;
    let eps = 1e-9 * nf.max(1.0);
    let mut a = DMatrix::zeros(samples.len(), cols);
    let mut y = DVector::zeros(samples.len());
    for (r, &(t, v)) in samples.iter().enumerate() {
        let x = (t - t0) / interval_len;
        if !x.is_finite() || x < -eps || x > nf + eps {
            return Err(Error::Domain(format!("sample t = {t} outside fit domain")));
        }
        let x = x.clamp(0.0, nf);
        let i = interval_index(x, n);
        for j in i..=i + 3 {
            a[(r, j)] = basis(3, n, j, x);
        }
        y[r] = v;
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * samples.len().max(cols) as f64 * f64::EPSILON * 8.0;
    if svd.rank(tol) < cols {
        return Err(Error::Rank(format!(
            "samples do not determine all {cols} coefficients"
        )));
    }
    let sol = svd
        .solve(&y, tol)
        .map_err(|e| Error::Solve(e.to_string()))?;
    BSpline::new(t0, interval_len, sol.iter().copied().collect())
}

/// Polynomial coefficient tables for the first four basis functions on the
/// first four intervals (normalized coordinates, `n >= 4`). `a[p][row][col]`
/// is the coefficient of `x^p` of basis function `row` on interval `col`.
/// Stored as a golden reference for tests; evaluation itself goes through
/// the recursion.
pub struct BasisTables {
    pub a: [[[f64; 4]; 4]; 4],
}

pub fn basis_tables() -> BasisTables {
    let a0 = [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 2.0, 0.0, 0.0],
        [0.0, -3.0 / 2.0, 9.0 / 2.0, 0.0],
        [0.0, 2.0 / 3.0, -22.0 / 3.0, 32.0 / 3.0],
    ];
    let a1 = [
        [-3.0, 0.0, 0.0, 0.0],
        [3.0, -3.0, 0.0, 0.0],
        [0.0, 9.0 / 2.0, -9.0 / 2.0, 0.0],
        [0.0, -2.0, 10.0, -8.0],
    ];
    let a2 = [
        [3.0, 0.0, 0.0, 0.0],
        [-9.0 / 2.0, 3.0 / 2.0, 0.0, 0.0],
        [3.0 / 2.0, -3.0, 3.0 / 2.0, 0.0],
        [0.0, 2.0, -4.0, 2.0],
    ];
    let a3 = [
        [-1.0, 0.0, 0.0, 0.0],
        [7.0 / 4.0, -1.0 / 4.0, 0.0, 0.0],
        [-11.0 / 12.0, 7.0 / 12.0, -1.0 / 6.0, 0.0],
        [1.0 / 6.0, -1.0 / 2.0, 1.0 / 2.0, -1.0 / 6.0],
    ];
    BasisTables { a: [a0, a1, a2, a3] }
}

impl BasisTables {
    /// Evaluates basis function `row` (0..4) at normalized `x` using the
    /// polynomial tables. Zero outside the tabulated four intervals.
    pub fn poly_eval(&self, row: usize, x: f64) -> f64 {
        if !(0.0..4.0).contains(&x) && x != 4.0 {
            return 0.0;
        }
        let col = (x.floor() as usize).min(3);
        let mut acc = 0.0;
        let mut xp = 1.0;
        for p in 0..4 {
            acc += self.a[p][row][col] * xp;
            xp *= x;
        }
        acc
    }
}
