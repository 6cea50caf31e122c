//! Scalar numerical building blocks: compensated summation, adaptive Simpson
//! quadrature, the Lanczos Gamma function, and fourth-order cumulative
//! integration on uniform grids.

use std::f64::consts::PI;

/// Kahan–Babuška (Neumaier) compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = KahanSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of an iterator.
pub fn kahan_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<KahanSum>().value()
}

const SIMPSON_MIN_DEPTH: u32 = 4;
const SIMPSON_MAX_DEPTH: u32 = 48;

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Every branch is refined at least four levels before the local error test
/// is trusted. A branch also stops once its correction is at rounding level,
/// so unreachable absolute tolerances do not recurse to the depth cap.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, 0)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth >= SIMPSON_MAX_DEPTH
        || (depth >= SIMPSON_MIN_DEPTH && delta.abs() <= 15.0 * tol)
        || (depth >= SIMPSON_MIN_DEPTH && delta.abs() <= 64.0 * f64::EPSILON * (left.abs() + right.abs()))
        || m <= a
        || m >= b
    {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1)
}

/// Adaptive Simpson with a tolerance relative to a coarse estimate of the
/// integral's magnitude, floored at `abs_floor`.
pub fn adaptive_simpson_rel<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_floor: f64,
) -> f64 {
    let n = 16;
    let h = (b - a) / n as f64;
    let coarse: f64 = (0..=n)
        .map(|i| {
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            w * f(a + i as f64 * h).abs()
        })
        .sum::<f64>()
        * h.abs();
    adaptive_simpson(f, a, b, (rel_tol * coarse).max(abs_floor))
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function via the Lanczos approximation (g = 7, nine terms), with the
/// reflection formula for `x < 1/2`.
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        PI / ((PI * x).sin() * gamma(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut acc = LANCZOS_COEF[0];
        for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + LANCZOS_G + 0.5;
        (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
    }
}

/// `ln(n!)` by direct summation of logarithms.
pub fn ln_factorial(n: usize) -> f64 {
    kahan_sum((2..=n).map(|k| (k as f64).ln()))
}

/// `n!` as a float; exact through `22!`, correctly rounded products beyond.
pub fn factorial(n: usize) -> f64 {
    if n > 170 {
        return f64::INFINITY;
    }
    (2..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Surface measure of the unit `(d-1)`-sphere in `R^d`: `2 π^{d/2} / Γ(d/2)`.
pub fn unit_sphere_area(d: usize) -> f64 {
    let half = d as f64 / 2.0;
    2.0 * PI.powf(half) / gamma(half)
}

/// Integrals of each cell `[x_i, x_{i+1}]` of a uniform grid with spacing `h`,
/// using the four-point (cubic) Newton–Cotes rule. Falls back to the
/// trapezoid rule when fewer than four nodes are available.
pub fn cell_integrals(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    if n < 2 {
        return Vec::new();
    }
    if n < 4 {
        return values.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).collect();
    }
    let c = h / 24.0;
    let f = values;
    let last = n - 2;
    (0..n - 1)
        .map(|i| {
            if i == 0 {
                c * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3])
            } else if i == last {
                c * (f[i - 2] - 5.0 * f[i - 1] + 19.0 * f[i] + 9.0 * f[i + 1])
            } else {
                c * (-f[i - 1] + 13.0 * f[i] + 13.0 * f[i + 1] - f[i + 2])
            }
        })
        .collect()
}

/// Running integral from the first node: `out[i] = ∫_{x_0}^{x_i} f`.
pub fn cumulative_from_start(values: &[f64], h: f64) -> Vec<f64> {
    let cells = cell_integrals(values, h);
    let mut out = Vec::with_capacity(values.len());
    let mut acc = KahanSum::new();
    out.push(0.0);
    for c in cells {
        acc.add(c);
        out.push(acc.value());
    }
    out
}

/// Running integral to the last node: `out[i] = ∫_{x_i}^{x_last} f`.
pub fn cumulative_to_end(values: &[f64], h: f64) -> Vec<f64> {
    let cells = cell_integrals(values, h);
    let mut out = vec![0.0; values.len()];
    let mut acc = KahanSum::new();
    for (i, c) in cells.iter().enumerate().rev() {
        acc.add(*c);
        out[i] = acc.value();
    }
    out
}

/// Total integral over a uniform grid with the four-point rule.
pub fn integrate_uniform(values: &[f64], h: f64) -> f64 {
    kahan_sum(cell_integrals(values, h))
}

/// Cubic Lagrange interpolation on a uniform grid starting at `x0`.
pub fn interpolate_uniform(values: &[f64], x0: f64, h: f64, x: f64) -> f64 {
    let n = values.len();
    if n == 1 {
        return values[0];
    }
    let t = (x - x0) / h;
    if n < 4 {
        let i = (t.floor() as isize).clamp(0, n as isize - 2) as usize;
        let frac = t - i as f64;
        return values[i] * (1.0 - frac) + values[i + 1] * frac;
    }
    let i = (t.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let mut acc = 0.0;
    for j in 0..4 {
        let mut basis = 1.0;
        for k in 0..4 {
            if k != j {
                basis *= (t - (i + k) as f64) / (j as f64 - k as f64);
            }
        }
        acc += basis * values[i + j];
    }
    acc
}
