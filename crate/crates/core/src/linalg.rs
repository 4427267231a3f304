//! Conjugate gradients for the symmetric grid operators, optionally
//! restricted to the zero-mean subspace (uniform cells, so zero mean is
//! orthogonality to the constant vector in the plain dot product).

use crate::grid::dot;

#[derive(Debug, Clone, Copy)]
pub(crate) struct CgOutcome {
    pub iterations: usize,
    /// True relative residual `‖b − Ax‖ / max(‖b‖, floor)` at exit.
    pub residual: f64,
}

pub(crate) fn remove_mean(x: &mut [f64]) {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= m);
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Solves `A x = b` for symmetric `A`, positive definite on the working
/// subspace. `x` holds the initial guess on entry. With `zero_mean` the
/// iterate and residual are projected every iteration, which makes the
/// singular Neumann operator usable without pinning a cell.
///
/// On failure returns the outcome reached when the budget ran out.
pub(crate) fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
    zero_mean: bool,
    floor: f64,
) -> Result<CgOutcome, CgOutcome> {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm <= floor {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgOutcome {
            iterations: 0,
            residual: 0.0,
        });
    }
    if zero_mean {
        remove_mean(x);
    }
    let mut r = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    let mut last_true = f64::INFINITY;
    loop {
        // Recompute the true residual; restart from it if the recursive one
        // drifted.
        apply(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        if zero_mean {
            remove_mean(&mut r);
        }
        let rel = norm(&r) / bnorm;
        if rel <= tol {
            return Ok(CgOutcome {
                iterations,
                residual: rel,
            });
        }
        // Stagnation across a whole restart means round-off has the floor.
        if iterations >= max_iter || rel >= last_true {
            return Err(CgOutcome {
                iterations,
                residual: rel,
            });
        }
        last_true = rel;

        p.copy_from_slice(&r);
        let mut rr = dot(&r, &r);
        while iterations < max_iter {
            apply(&p, &mut ap);
            if zero_mean {
                remove_mean(&mut ap);
            }
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                break;
            }
            let alpha = rr / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            iterations += 1;
            let rr_new = dot(&r, &r);
            if rr_new.sqrt() / bnorm <= 0.5 * tol {
                break;
            }
            let beta = rr_new / rr;
            for i in 0..n {
                p[i] = r[i] + beta * p[i];
            }
            rr = rr_new;
        }
        if zero_mean {
            remove_mean(x);
        }
    }
}
