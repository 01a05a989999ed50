//! Numeric check of the transient matrix built for the arithmetic tree: a
//! row-stochastic `A` with the zero pattern of its `Q` matrix and the vector
//! `X = (1, 3, 2, 5, 4, 7, 6, …)` with `XA < X` coordinatewise.
//!
//! Indices are 1-based. Row 1 and even rows are "r-rows"; odd rows `2m+1` are "s-rows".

use serde::Serialize;

/// Entry `X_j`.
pub fn x_coord(j: usize) -> f64 {
    match j {
        1 => 1.0,
        j if j % 2 == 0 => (j + 1) as f64,
        j => (j - 1) as f64,
    }
}

fn r_row_exponent(i: usize) -> usize {
    if i == 1 { 1 } else { i }
}

/// Column holding the remainder of an r-row.
fn r_row_remainder_col(i: usize) -> usize {
    if i == 1 { 3 } else { i + 3 }
}

fn is_r_row(i: usize) -> bool {
    i == 1 || i % 2 == 0
}

/// Row `i` of `A` restricted to columns `1..=width`.
pub fn a_row(i: usize, r: f64, s: f64, width: usize) -> Vec<f64> {
    let mut row = vec![0.0; width];
    if is_r_row(i) {
        let n = r_row_exponent(i);
        let rem_col = r_row_remainder_col(i);
        // r^{n+j}/(j-1)!
        let mut term = r.powi(n as i32 + 1);
        let mut removed = 0.0;
        for (j, slot) in row.iter_mut().enumerate().map(|(k, x)| (k + 1, x)) {
            if j == rem_col {
                removed = term;
            } else {
                *slot = term;
            }
            term *= r / j as f64;
        }
        if rem_col > width {
            let mut t = r.powi(n as i32 + 1);
            for j in 1..rem_col {
                t *= r / j as f64;
            }
            removed = t;
        }
        let rem = 1.0 + removed - r.powi(n as i32 + 1) * r.exp();
        if rem_col <= width {
            row[rem_col - 1] = rem;
        }
    } else {
        let m = (i - 1) / 2;
        let fact_m: f64 = (1..=m).map(|k| k as f64).product();
        let off = s.powi(m as i32) / fact_m;
        let diag = 1.0 - s.powi(m as i32) * m as f64 / fact_m;
        for j in std::iter::once(1).chain((1..m).map(|k| 2 * k)) {
            if j <= width {
                row[j - 1] = off;
            }
        }
        if 2 * m <= width {
            row[2 * m - 1] = diag;
        }
    }
    row
}

/// Column of the single 1 in row `i` of the permutation-like matrix `V`.
pub fn v_col(i: usize) -> usize {
    if is_r_row(i) { r_row_remainder_col(i) } else { i - 1 }
}

/// Upper bound on `Σ_{i > n} X_i A_{ij}` for a column `j ≤ n - 2`.
pub fn omitted_rows_bound(j: usize, r: f64, s: f64, n: usize) -> f64 {
    if r >= 1.0 {
        return f64::INFINITY;
    }
    let mut b = 0.0f64;
    // r-rows i > n (even): (i+1) r^{i+j}/(j-1)!, ratio r²(i+3)/(i+1) decreasing in i
    let fact: f64 = (1..j).map(|k| k as f64).product();
    let mut i = if (n + 1) % 2 == 0 { n + 1 } else { n + 2 };
    loop {
        let term = (i + 1) as f64 * r.powi((i + j) as i32) / fact;
        if term == 0.0 {
            break;
        }
        b += term;
        let q = r * r * (i + 3) as f64 / (i + 1) as f64;
        if q < 1.0 && term < 1e-20 * b {
            b += term * q / (1.0 - q);
            break;
        }
        i += 2;
    }
    // s-rows i = 2m+1 > n feeding column j: 2m s^m/m!, ratio s/m
    if j == 1 || j % 2 == 0 {
        let mut m = n.div_ceil(2).max(if j == 1 { 1 } else { j / 2 + 1 });
        let fact_m: f64 = (1..=m).map(|k| k as f64).product();
        let mut t = 2.0 * m as f64 * s.powi(m as i32) / fact_m;
        let mut sb = 0.0f64;
        while t > 0.0 {
            sb += t;
            let q = s / m as f64;
            if q < 1.0 && t < 1e-20 * sb {
                sb += t * q / (1.0 - q);
                break;
            }
            t *= q;
            m += 1;
        }
        b += sb;
    }
    b
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AppendixReport {
    pub r: f64,
    pub s: f64,
    pub n: usize,
    /// `0 < r < 1/3` and `0 < s < 1/10`.
    pub in_certified_range: bool,
    pub max_row_sum_deviation: f64,
    /// `min_j X_j − (XA)_j − bound_j` over the checked coordinates.
    pub min_margin: f64,
    /// Coordinates `1..=checked` are compared; the omitted row `n+1` has its diagonal in column `n`.
    pub checked: usize,
    /// 1-based coordinates where `XA < X` fails.
    pub violations: Vec<usize>,
    /// 1-based coordinates where `XV < X` fails.
    pub v_violations: Vec<usize>,
    pub pass: bool,
}

/// Builds `A` truncated to `n` rows and columns and checks row sums, `XA < X` and `XV < X`.
pub fn appendix_arith_check(r: f64, s: f64, n: usize) -> AppendixReport {
    let in_certified_range = r > 0.0 && r < 1.0 / 3.0 && s > 0.0 && s < 0.1;
    let width = n + 64;
    let rows: Vec<Vec<f64>> = (1..=n).map(|i| a_row(i, r, s, width)).collect();
    let max_row_sum_deviation = rows.iter().map(|row| (row.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max);
    let mut min_margin = f64::INFINITY;
    let mut violations = Vec::new();
    let checked = n.saturating_sub(2);
    for j in 1..=checked {
        let xa: f64 = (1..=n).map(|i| x_coord(i) * rows[i - 1][j - 1]).sum();
        let margin = x_coord(j) - xa - omitted_rows_bound(j, r, s, n);
        min_margin = min_margin.min(margin);
        if !(margin > 0.0) {
            violations.push(j);
        }
    }
    let mut xv = vec![0.0; n + 4];
    for i in 1..=n + 1 {
        let c = v_col(i);
        if c <= n {
            xv[c - 1] += x_coord(i);
        }
    }
    let v_violations: Vec<usize> = (1..=checked).filter(|&j| xv[j - 1] >= x_coord(j)).collect();
    let rows_ok = rows.iter().flatten().all(|x| *x >= 0.0) && max_row_sum_deviation < 1e-12;
    let pass = rows_ok && violations.is_empty() && v_violations.is_empty();
    AppendixReport { r, s, n, in_certified_range, max_row_sum_deviation, min_margin, checked, violations, v_violations, pass }
}
