//! Conjugate gradients for the SPD shifted systems `(I + alpha A) x = b`.

#[derive(Debug)]
pub(crate) struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Runs CG from a zero initial guess. Convergence is judged on the true
/// residual `b - M x`, recomputed whenever the recursive residual claims
/// convergence, so round-off drift in the recursion cannot fake success.
pub(crate) fn solve<F>(apply: F, b: &[f64], tol: f64, max_iter: usize) -> CgOutcome
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return CgOutcome {
            x: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rs_old = dot(&r, &r);
    let mut relative = 1.0;

    for iter in 1..=max_iter {
        let mp = apply(&p);
        let pmp = dot(&p, &mp);
        if pmp <= 0.0 || !pmp.is_finite() {
            break;
        }
        let alpha = rs_old / pmp;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * mp[i];
        }
        let rs_new = dot(&r, &r);

        if rs_new.sqrt() <= tol * b_norm {
            let mx = apply(&x);
            let true_r: Vec<f64> = b.iter().zip(&mx).map(|(bi, mi)| bi - mi).collect();
            relative = dot(&true_r, &true_r).sqrt() / b_norm;
            if relative <= tol {
                return CgOutcome {
                    x,
                    iterations: iter,
                    relative_residual: relative,
                    converged: true,
                };
            }
            // restart from the true residual
            r = true_r;
            p = r.clone();
            rs_old = dot(&r, &r);
            continue;
        }

        relative = rs_new.sqrt() / b_norm;
        let beta = rs_new / rs_old;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rs_old = rs_new;
    }

    CgOutcome {
        x,
        iterations: max_iter,
        relative_residual: relative,
        converged: false,
    }
}
