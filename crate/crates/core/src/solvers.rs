//! Bracketed scalar root finding and damped fixed-point iteration.

use serde::{Deserialize, Serialize};

use crate::error::{AoiError, Result};

/// Tolerances and limits shared by the solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Initial step weight in (0, 1]; halved whenever the residual grows.
    pub damping: f64,
    /// Any iterate above this magnitude is reported as divergence.
    pub cap: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            abs_tol: 1e-10,
            rel_tol: 1e-12,
            max_iter: 10_000,
            damping: 1.0,
            cap: 1e12,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(AoiError::domain("tolerances must be positive"));
        }
        if self.max_iter == 0 {
            return Err(AoiError::domain("max_iter must be at least 1"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(AoiError::domain("damping must lie in (0, 1]"));
        }
        if !(self.cap > 0.0) {
            return Err(AoiError::domain("cap must be positive"));
        }
        Ok(())
    }
}

/// Brent's method on `[lo, hi]`, requiring `f(lo)·f(hi) <= 0`.
///
/// Stops once `|f(x)| <= abs_tol` or the bracket is narrower than
/// `rel_tol·|x|` (plus a tiny absolute floor so roots at zero terminate).
pub fn solve_scalar_bracketed<F>(mut f: F, lo: f64, hi: f64, opts: &SolveOptions) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    opts.validate()?;
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if !(fa.is_finite() && fb.is_finite()) {
        return Err(AoiError::domain(format!("non-finite function value at bracket [{lo}, {hi}]")));
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(AoiError::NoBracket { lo, hi, f_lo: fa, f_hi: fb });
    }
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut bisected = true;
    for _ in 0..opts.max_iter {
        if fb.abs() <= opts.abs_tol {
            return Ok(b);
        }
        let width = (b - a).abs();
        if width <= opts.rel_tol * b.abs() + f64::MIN_POSITIVE.sqrt() {
            return Ok(b);
        }
        let mut s = if fa != fc && fb != fc {
            a * fb * fc / ((fa - fb) * (fa - fc)) + b * fa * fc / ((fb - fa) * (fb - fc)) + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };
        let tol = 2.0 * f64::EPSILON * b.abs();
        let mid = (3.0 * a + b) / 4.0;
        let outside = !((s > mid.min(b)) && (s < mid.max(b)));
        if outside
            || (bisected && (s - b).abs() >= (b - c).abs() / 2.0)
            || (!bisected && (s - b).abs() >= (c - d).abs() / 2.0)
            || (bisected && (b - c).abs() < tol)
            || (!bisected && (c - d).abs() < tol)
        {
            s = 0.5 * (a + b);
            bisected = true;
        } else {
            bisected = false;
        }
        let fs = f(s);
        if !fs.is_finite() {
            return Err(AoiError::domain(format!("non-finite function value at {s}")));
        }
        d = c;
        c = b;
        fc = fb;
        if fa.signum() != fs.signum() {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
    }
    Err(AoiError::NoConvergence {
        context: "bracketed root".into(),
        iterations: opts.max_iter,
        residual: fb.abs(),
    })
}

/// Expand `hi` geometrically until `f` changes sign on `[lo, hi]`.
pub fn expand_bracket<F>(mut f: F, lo: f64, mut hi: f64, cap: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let flo = f(lo);
    while hi <= cap {
        let fhi = f(hi);
        if flo.signum() != fhi.signum() || fhi == 0.0 {
            return Ok((lo, hi));
        }
        hi *= 2.0;
    }
    Err(AoiError::NoBracket {
        lo,
        hi,
        f_lo: flo,
        f_hi: f(hi),
    })
}

/// Converged fixed point with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Damped Picard iteration `x <- x + α (g(x) - x)` on positive rate vectors.
///
/// Converged when `‖g(x) - x‖∞ <= abs_tol·(1 + ‖x‖∞)`; α starts at
/// `opts.damping` and halves each time the residual fails to decrease.
pub fn solve_fixed_point<G>(mut g: G, start: &[f64], opts: &SolveOptions) -> Result<FixedPoint>
where
    G: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    opts.validate()?;
    if start.is_empty() {
        return Err(AoiError::domain("empty starting point"));
    }
    let mut x = start.to_vec();
    let mut alpha = opts.damping;
    let mut last = f64::INFINITY;
    for it in 0..opts.max_iter {
        let gx = g(&x)?;
        if gx.len() != x.len() {
            return Err(AoiError::domain("fixed-point map changed dimension"));
        }
        let mut res = 0.0f64;
        let mut norm = 0.0f64;
        for (xi, gi) in x.iter().zip(&gx) {
            if !gi.is_finite() || gi.abs() > opts.cap {
                return Err(AoiError::Divergence {
                    context: String::new(),
                    cap: opts.cap,
                });
            }
            res = res.max((gi - xi).abs());
            norm = norm.max(xi.abs());
        }
        if res <= opts.abs_tol * (1.0 + norm) {
            return Ok(FixedPoint {
                x,
                iterations: it,
                residual: res,
            });
        }
        if res >= last && alpha > 1e-6 {
            alpha *= 0.5;
        }
        last = res;
        for (xi, gi) in x.iter_mut().zip(&gx) {
            *xi += alpha * (gi - *xi);
        }
    }
    let gx = g(&x)?;
    let res = x.iter().zip(&gx).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Err(AoiError::NoConvergence {
        context: String::new(),
        iterations: opts.max_iter,
        residual: res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn o() -> SolveOptions {
        SolveOptions::default()
    }

    #[test]
    fn scalar_examples() {
        let r = solve_scalar_bracketed(|x| x * x - 1.0, 0.0, 2.0, &o()).unwrap();
        assert!((r - 1.0).abs() < 1e-10);
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let r = solve_scalar_bracketed(|x| x * x - x - 1.0, 1.0, 3.0, &o()).unwrap();
        assert!((r - phi).abs() < 1e-10);
        let r = solve_scalar_bracketed(|x| 1.5 * x * x - 2.0, 0.0, 3.0, &o()).unwrap();
        assert!((r - (4.0f64 / 3.0).sqrt()).abs() < 1e-10);
        assert!((r - 1.1547005).abs() < 1e-7);
    }

    #[test]
    fn scalar_residual_bound_holds() {
        let opts = o();
        for &(c, k) in &[(1e-3, 5.0), (7.0, 0.1), (1.0, 1e4)] {
            let f = |x: f64| c * x * x * x - k;
            let r = solve_scalar_bracketed(f, 0.0, 1e6, &opts).unwrap();
            assert!(f(r).abs() <= opts.abs_tol || f(r).abs() <= 1e-6 * k, "residual {}", f(r));
        }
    }

    #[test]
    fn scalar_errors() {
        assert!(matches!(
            solve_scalar_bracketed(|x| x * x + 1.0, -1.0, 1.0, &o()),
            Err(AoiError::NoBracket { .. })
        ));
        let opts = SolveOptions { max_iter: 2, abs_tol: 1e-300, rel_tol: 1e-300, ..o() };
        assert!(matches!(
            solve_scalar_bracketed(|x| x.powi(3) - 0.3, 0.0, 1.0, &opts),
            Err(AoiError::NoConvergence { .. })
        ));
    }

    #[test]
    fn scalar_deterministic() {
        let a = solve_scalar_bracketed(|x| x.exp() - 3.0, 0.0, 5.0, &o()).unwrap();
        let b = solve_scalar_bracketed(|x| x.exp() - 3.0, 0.0, 5.0, &o()).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn fixed_point_identity() {
        let fp = solve_fixed_point(|x| Ok(x.to_vec()), &[0.3, 2.0], &o()).unwrap();
        assert_eq!(fp.x, vec![0.3, 2.0]);
        assert_eq!(fp.iterations, 0);
    }

    #[test]
    fn fixed_point_symmetric_nash() {
        // best responses sqrt(1 + rival) with c = mu = 1
        let g = |x: &[f64]| Ok(vec![(1.0 + x[1]).sqrt(), (1.0 + x[0]).sqrt()]);
        let fp = solve_fixed_point(g, &[1.0, 1.0], &o()).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        for v in &fp.x {
            assert!((v - phi).abs() < 1e-9);
        }
        let gx = g(&fp.x).unwrap();
        let res = (gx[0] - fp.x[0]).abs().max((gx[1] - fp.x[1]).abs());
        assert!(res <= 1e-10 * (1.0 + phi));
    }

    #[test]
    fn fixed_point_divergence() {
        let g = |x: &[f64]| Ok(vec![1e6 * x[0]]);
        assert!(matches!(solve_fixed_point(g, &[1.0], &o()), Err(AoiError::Divergence { .. })));
    }

    #[test]
    fn fixed_point_damping_rescues_oscillation() {
        // g(x) = 3 - 2x is not a contraction (slope -2); halved steps converge to 1
        let g = |x: &[f64]| Ok(vec![3.0 - 2.0 * x[0]]);
        let fp = solve_fixed_point(g, &[0.0], &o()).unwrap();
        assert!((fp.x[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fixed_point_max_iter() {
        let g = |x: &[f64]| Ok(vec![x[0] + 1e-3]);
        let opts = SolveOptions { max_iter: 5, ..o() };
        assert!(matches!(solve_fixed_point(g, &[1.0], &opts), Err(AoiError::NoConvergence { .. })));
    }

    #[test]
    fn options_validated() {
        assert!(SolveOptions { damping: 0.0, ..o() }.validate().is_err());
        assert!(SolveOptions { max_iter: 0, ..o() }.validate().is_err());
        assert!(SolveOptions { abs_tol: -1.0, ..o() }.validate().is_err());
    }
}
