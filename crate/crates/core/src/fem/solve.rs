use super::SparseSystem;
use crate::error::{config_err, Error, Result};

/// Default relative residual target.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Iteration cap, in multiples of the system dimension.
const CAP_FACTOR: usize = 20;

/// Solves `A x = b` by Jacobi-preconditioned conjugate gradients from a zero guess.
pub fn solve(system: &SparseSystem, rhs: &[f64], tol: f64) -> Result<Vec<f64>> {
    solve_from(system, rhs, None, tol)
}

/// As [`solve`], starting from `guess` when given.
pub fn solve_from(
    system: &SparseSystem,
    rhs: &[f64],
    guess: Option<&[f64]>,
    tol: f64,
) -> Result<Vec<f64>> {
    let n = system.dim();
    if rhs.len() != n {
        return config_err(format!(
            "right-hand side has length {}, system has dimension {n}",
            rhs.len()
        ));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return config_err(format!("solver tolerance must lie in (0, 1), got {tol}"));
    }
    let b_norm = norm(rhs);
    if b_norm == 0.0 {
        return Ok(vec![0.0; n]);
    }

    let inv_diag: Vec<f64> = system
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let mut x = match guess {
        Some(g) if g.len() == n => g.to_vec(),
        _ => vec![0.0; n],
    };
    let mut r = system.mul_vec(&x);
    for (ri, bi) in r.iter_mut().zip(rhs) {
        *ri = bi - *ri;
    }
    let target = tol * b_norm;
    let mut r_norm = norm(&r);
    if r_norm <= target {
        return Ok(x);
    }

    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let cap = CAP_FACTOR * n.max(1);

    for _ in 0..cap {
        system.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        r_norm = norm(&r);
        if r_norm <= target {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    // recompute the true residual before reporting
    let ax = system.mul_vec(&x);
    let true_res = norm(&ax.iter().zip(rhs).map(|(a, b)| b - a).collect::<Vec<_>>());
    if true_res <= target {
        return Ok(x);
    }
    Err(Error::Solver {
        iterations: cap,
        residual: true_res / b_norm,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poisson_1d(n: usize) -> SparseSystem {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        SparseSystem::from_triplets(n, t, true)
    }

    #[test]
    fn identity_system() {
        let a = SparseSystem::identity(5);
        let b = vec![1.0, -2.0, 3.0, 0.5, 0.0];
        let x = solve(&a, &b, 1e-10).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn poisson_chain_matches_analytic_solution() {
        // -u'' = 1 on (0,1), u(0)=u(1)=0 -> u = x(1-x)/2; the 3-point stencil is exact
        let n = 49;
        let h = 1.0 / (n + 1) as f64;
        let a = poisson_1d(n);
        let b = vec![h * h; n];
        let x = solve(&a, &b, 1e-12).unwrap();
        for (i, xi) in x.iter().enumerate() {
            let s = (i + 1) as f64 * h;
            assert!((xi - 0.5 * s * (1.0 - s)).abs() < 1e-10);
        }
    }

    #[test]
    fn consistency_with_product() {
        let a = poisson_1d(30);
        let y: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = a.mul_vec(&y);
        let x = solve(&a, &b, 1e-12).unwrap();
        let err = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-8);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = poisson_1d(4);
        assert_eq!(solve(&a, &[0.0; 4], 1e-8).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn singular_system_reports_failure() {
        // pure Neumann Laplacian with an incompatible right-hand side
        let t = vec![(0, 0, 1.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 1.0)];
        let a = SparseSystem::from_triplets(2, t, true);
        match solve(&a, &[1.0, 1.0], 1e-8) {
            Err(Error::Solver { residual, .. }) => assert!(residual > 1e-8),
            other => panic!("expected solver failure, got {other:?}"),
        }
    }

    #[test]
    fn bad_tolerance_rejected() {
        assert!(solve(&SparseSystem::identity(2), &[1.0, 1.0], 1.5).is_err());
    }
}
