//! Finite-difference stencils, interpolation and quadrature on uniform grids.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

/// Anything we can difference: `f64`, `PseudoVector`.
pub trait Field: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {}

impl<T> Field for T where T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T> {}

/// Order of the derivative stencils.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stencil {
    /// Three-point central, one-sided three-point at open ends.
    Second,
    /// Five-point central, one-sided five-point at open ends.
    #[default]
    Fourth,
}

impl Stencil {
    pub fn order(self) -> u32 {
        match self {
            Stencil::Second => 2,
            Stencil::Fourth => 4,
        }
    }
}

fn lin<T: Field>(terms: &[(f64, T)]) -> T {
    let mut acc = terms[0].1 * terms[0].0;
    for &(c, v) in &terms[1..] {
        acc = acc + v * c;
    }
    acc
}

/// First derivative of samples `f` with spacing `h`.
///
/// Closed grids wrap around and do not repeat the first sample at the end.
/// Grids too short for the requested stencil fall back to a lower order.
pub fn derivative<T: Field>(f: &[T], h: f64, closed: bool, stencil: Stencil) -> Vec<T> {
    let n = f.len();
    if n < 2 {
        return f.iter().map(|&x| x * 0.0).collect();
    }
    if n == 2 {
        let d = (f[1] - f[0]) * (1.0 / h);
        return vec![d, d];
    }
    let stencil = if n < 5 { Stencil::Second } else { stencil };
    let at = |i: isize| -> T { f[i.rem_euclid(n as isize) as usize] };
    (0..n)
        .map(|i| {
            let ii = i as isize;
            match stencil {
                Stencil::Second => {
                    if closed || (i > 0 && i + 1 < n) {
                        (at(ii + 1) - at(ii - 1)) * (0.5 / h)
                    } else if i == 0 {
                        lin(&[(-3.0, f[0]), (4.0, f[1]), (-1.0, f[2])]) * (0.5 / h)
                    } else {
                        lin(&[(3.0, f[n - 1]), (-4.0, f[n - 2]), (1.0, f[n - 3])]) * (0.5 / h)
                    }
                }
                Stencil::Fourth => {
                    let s = 1.0 / (12.0 * h);
                    if closed || (i >= 2 && i + 2 < n) {
                        lin(&[(1.0, at(ii - 2)), (-8.0, at(ii - 1)), (8.0, at(ii + 1)), (-1.0, at(ii + 2))]) * s
                    } else if i == 0 {
                        lin(&[(-25.0, f[0]), (48.0, f[1]), (-36.0, f[2]), (16.0, f[3]), (-3.0, f[4])]) * s
                    } else if i == 1 {
                        lin(&[(-3.0, f[0]), (-10.0, f[1]), (18.0, f[2]), (-6.0, f[3]), (1.0, f[4])]) * s
                    } else if i == n - 2 {
                        lin(&[(3.0, f[n - 1]), (10.0, f[n - 2]), (-18.0, f[n - 3]), (6.0, f[n - 4]), (-1.0, f[n - 5])])
                            * s
                    } else {
                        lin(&[
                            (25.0, f[n - 1]),
                            (-48.0, f[n - 2]),
                            (36.0, f[n - 3]),
                            (-16.0, f[n - 4]),
                            (3.0, f[n - 5]),
                        ]) * s
                    }
                }
            }
        })
        .collect()
}

/// Second derivative, as the derivative of the derivative.
pub fn second_derivative<T: Field>(f: &[T], h: f64, closed: bool, stencil: Stencil) -> Vec<T> {
    derivative(&derivative(f, h, closed, stencil), h, closed, stencil)
}

/// Value at `i + tau` (`0 <= tau <= 1`) by four-point Lagrange interpolation.
///
/// At tau = 1/2 this is `(-f[i-1] + 9 f[i] + 9 f[i+1] - f[i+2]) / 16`.
pub fn interpolate<T: Field>(f: &[T], i: usize, tau: f64, closed: bool) -> T {
    let n = f.len();
    if n == 1 {
        return f[0];
    }
    if n < 4 {
        let j = (i + 1).min(n - 1);
        return f[i] * (1.0 - tau) + f[j] * tau;
    }
    // four nodes at offsets start..start+3, with x measured from node i
    let (idx, x): ([usize; 4], f64) = if closed {
        let m = |k: isize| (k.rem_euclid(n as isize)) as usize;
        let ii = i as isize;
        ([m(ii - 1), m(ii), m(ii + 1), m(ii + 2)], 1.0 + tau)
    } else {
        let start = (i as isize - 1).clamp(0, n as isize - 4) as usize;
        ([start, start + 1, start + 2, start + 3], (i - start) as f64 + tau)
    };
    let mut acc = f[idx[0]] * 0.0;
    for j in 0..4 {
        let mut w = 1.0;
        for m in 0..4 {
            if m != j {
                w *= (x - m as f64) / (j as f64 - m as f64);
            }
        }
        acc = acc + f[idx[j]] * w;
    }
    acc
}

/// Cumulative integral of `f` from sample 0, fourth order on uniform grids.
///
/// Each cell uses the cubic through its four nearest samples.
pub fn cumulative_integral(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    for i in 0..n - 1 {
        let cell = if n < 4 {
            0.5 * h * (f[i] + f[i + 1])
        } else if i == 0 {
            h * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]) / 24.0
        } else if i == n - 2 {
            h * (9.0 * f[n - 1] + 19.0 * f[n - 2] - 5.0 * f[n - 3] + f[n - 4]) / 24.0
        } else {
            h * (-f[i - 1] + 13.0 * f[i] + 13.0 * f[i + 1] - f[i + 2]) / 24.0
        };
        out[i + 1] = out[i] + cell;
    }
    out
}

/// Uniform spacing of a grid, or `None` if it is not uniform to `1e-9`
/// relative.
pub fn uniform_step(grid: &[f64]) -> Option<f64> {
    if grid.len() < 2 {
        return None;
    }
    let h = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
    if !(h.is_finite() && h > 0.0) {
        return None;
    }
    let ok = grid.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.max(1.0));
    ok.then_some(h)
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// `n` samples of `[a, b)`, for periodic grids.
pub fn periodic_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
}

pub fn max_abs(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Median of finite values; `NaN` if none.
pub fn median(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
