//! Action of a matrix exponential on a vector through Arnoldi projection with
//! adaptive sub-stepping and the corrected (m + 2)-dimensional error estimate
//! of Sidje's Expokit.

use nalgebra::DMatrix;

use super::expm::expm;
use super::sparse::CsrMatrix;
use crate::{Error, Result, C64};

/// Something that can be multiplied onto a vector.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[C64], y: &mut [C64]);
    /// Upper bound (or estimate) of the induced 1-norm.
    fn norm_estimate(&self) -> f64;
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.matvec_into(x, y)
    }

    fn norm_estimate(&self) -> f64 {
        self.norm1()
    }
}

/// Settings for [`expm_multiply`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovOptions {
    /// Maximal Krylov dimension per sub-step.
    pub max_dim: usize,
    /// Target error relative to ‖v‖ over the whole interval.
    pub tol: f64,
    /// Abort after this many sub-steps.
    pub max_substeps: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions { max_dim: 30, tol: 1e-10, max_substeps: 100_000 }
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm2(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Compute `exp(t·A) v`.
pub fn expm_multiply<A: LinearOperator + ?Sized>(
    op: &A,
    v: &[C64],
    t: f64,
    opts: KrylovOptions,
) -> Result<Vec<C64>> {
    let n = op.dim();
    assert_eq!(v.len(), n, "vector length does not match operator");
    let mut w = v.to_vec();
    if t == 0.0 || n == 0 {
        return Ok(w);
    }
    let sign = t.signum();
    let t_out = t.abs();
    let anorm = op.norm_estimate().max(f64::MIN_POSITIVE);
    let beta0 = norm2(v);
    if beta0 == 0.0 {
        return Ok(w);
    }

    let m_max = opts.max_dim.min(n).max(1);
    let breakdown = anorm * 1e-14;
    let tol = opts.tol;

    // Expokit's initial step heuristic, computed in log space.
    let mf = m_max as f64;
    let ln_fact = (mf + 1.0) * ((mf + 1.0) / std::f64::consts::E).ln()
        + 0.5 * (2.0 * std::f64::consts::PI * (mf + 1.0)).ln();
    let mut tau = (((ln_fact + tol.ln() - (4.0 * beta0 * anorm).ln()) / mf).exp() / anorm).min(t_out);

    let mut t_now = 0.0;
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(m_max + 1);
    let mut av = vec![C64::new(0.0, 0.0); n];
    let mut substeps = 0;

    while t_now < t_out {
        substeps += 1;
        if substeps > opts.max_substeps {
            return Err(Error::KrylovConvergence { residual: f64::NAN });
        }
        let beta = norm2(&w);
        if beta == 0.0 {
            break;
        }
        basis.clear();
        basis.push(w.iter().map(|x| x / beta).collect());
        let mut h = DMatrix::<C64>::zeros(m_max + 2, m_max + 2);
        let mut m = m_max;
        let mut happy = false;
        let mut avnorm = 0.0;
        for j in 0..m_max {
            op.apply(&basis[j], &mut av);
            let mut p: Vec<C64> = av.iter().map(|x| x * sign).collect();
            for (i, q) in basis.iter().enumerate() {
                let hij = dot(q, &p);
                h[(i, j)] = hij;
                p.iter_mut().zip(q).for_each(|(pk, qk)| *pk -= hij * qk);
            }
            let s = norm2(&p);
            if s <= breakdown {
                happy = true;
                m = j + 1;
                break;
            }
            h[(j + 1, j)] = C64::new(s, 0.0);
            basis.push(p.into_iter().map(|x| x / s).collect());
        }
        if !happy {
            op.apply(&basis[m_max], &mut av);
            avnorm = norm2(&av);
            h[(m_max + 1, m_max)] = C64::new(1.0, 0.0);
        }

        let remaining = t_out - t_now;
        let mut rejections = 0;
        let (f_col, step) = loop {
            let tau_try = tau.min(remaining);
            if happy {
                let hm = h.view((0, 0), (m, m)).into_owned() * C64::new(remaining, 0.0);
                let f = expm(&hm);
                break (f.column(0).iter().cloned().collect::<Vec<_>>(), remaining);
            }
            let f = expm(&(h.clone() * C64::new(tau_try, 0.0)));
            let err1 = (beta * f[(m, 0)]).norm();
            let err2 = (beta * f[(m + 1, 0)]).norm() * avnorm;
            let err = if err1 > 10.0 * err2 {
                err2
            } else if err1 > err2 {
                err1 * err2 / (err1 - err2)
            } else {
                err1
            };
            let err_loc = err.max(f64::MIN_POSITIVE);
            let allowed = tol * beta0 * tau_try / t_out;
            if err_loc <= allowed {
                let next = 0.9 * tau_try * (allowed / err_loc).powf(1.0 / (m as f64 + 1.0));
                tau = next.clamp(0.2 * tau_try, 5.0 * tau_try);
                let col: Vec<C64> = (0..=m).map(|i| f[(i, 0)]).collect();
                break (col, tau_try);
            }
            rejections += 1;
            if rejections > 50 || tau_try < t_out * 1e-14 {
                return Err(Error::KrylovConvergence { residual: err_loc / beta0 });
            }
            let shrink = 0.9 * (allowed / err_loc).powf(1.0 / (m as f64 + 1.0));
            tau = tau_try * shrink.clamp(0.05, 0.5);
        };

        w.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
        for (coef, q) in f_col.iter().zip(&basis) {
            let c = coef * beta;
            w.iter_mut().zip(q).for_each(|(wk, qk)| *wk += c * qk);
        }
        t_now += step;
        if happy {
            break;
        }
    }
    Ok(w)
}
