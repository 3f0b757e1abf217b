//! Dense helpers for the small matrices that show up at chart base points.
//! Dimensions here are the ambient dimension (2 to 4 in practice), so plain
//! row-major `Vec` storage and cubic algorithms are fine.

use crate::error::Error;
use crate::jet::Jet;
use crate::scalar::Scalar;

pub const PIVOT_EPS: f64 = 1e-10;

/// Invert a real matrix by Gauss-Jordan with partial pivoting.
pub fn invert(m: &[f64], n: usize) -> Result<Vec<f64>, Error> {
    assert_eq!(m.len(), n * n);
    let mut a = m.to_vec();
    let mut inv = identity(n);
    for col in 0..n {
        let (piv_row, piv_val) = (col..n)
            .map(|r| (r, a[r * n + col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if piv_val < PIVOT_EPS {
            return Err(Error::Degenerate {
                context: "matrix inverse",
                pivot: piv_val,
                threshold: PIVOT_EPS,
            });
        }
        if piv_row != col {
            for j in 0..n {
                a.swap(col * n + j, piv_row * n + j);
                inv.swap(col * n + j, piv_row * n + j);
            }
        }
        let p = a[col * n + col];
        for j in 0..n {
            a[col * n + j] /= p;
            inv[col * n + j] /= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r * n + col];
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                a[r * n + j] -= f * a[col * n + j];
                inv[r * n + j] -= f * inv[col * n + j];
            }
        }
    }
    Ok(inv)
}

pub fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

pub fn mat_mul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi sweeps.
pub fn symmetric_eigenvalues(m: &[f64], n: usize) -> Vec<f64> {
    let mut a = m.to_vec();
    for _sweep in 0..50 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i * n + j].abs();
            }
        }
        if off < 1e-14 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}

/// Count of (positive, negative, near-zero) eigenvalues.
pub fn symmetric_signature(m: &[f64], n: usize, tol: f64) -> (usize, usize, usize) {
    let eigs = symmetric_eigenvalues(m, n);
    let mut pos = 0;
    let mut neg = 0;
    let mut zero = 0;
    for e in eigs {
        if e > tol {
            pos += 1;
        } else if e < -tol {
            neg += 1;
        } else {
            zero += 1;
        }
    }
    (pos, neg, zero)
}

/// Gauss-Jordan inverse over any scalar, pivoting on the largest value at
/// the expansion point. Used for metric inverses along flows, where entries
/// are jets or dual numbers.
pub fn invert_generic<S: Scalar>(m: &[S], n: usize) -> Result<Vec<S>, Error> {
    assert_eq!(m.len(), n * n);
    let mut a = m.to_vec();
    let proto = &m[0];
    let mut inv: Vec<S> = (0..n * n).map(|_| proto.constant_like(0.0)).collect();
    for i in 0..n {
        inv[i * n + i] = proto.constant_like(1.0);
    }
    for col in 0..n {
        let (piv_row, piv_val) = (col..n)
            .map(|r| (r, a[r * n + col].value().abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if piv_val < PIVOT_EPS {
            return Err(Error::Degenerate {
                context: "metric inverse along path",
                pivot: piv_val,
                threshold: PIVOT_EPS,
            });
        }
        if piv_row != col {
            for j in 0..n {
                a.swap(col * n + j, piv_row * n + j);
                inv.swap(col * n + j, piv_row * n + j);
            }
        }
        let p = a[col * n + col].clone();
        for j in 0..n {
            a[col * n + j] = a[col * n + j].div(&p).map_err(|_| Error::Degenerate {
                context: "metric inverse along path",
                pivot: p.value(),
                threshold: 0.0,
            })?;
            inv[col * n + j] = inv[col * n + j].div(&p).map_err(|_| Error::Degenerate {
                context: "metric inverse along path",
                pivot: p.value(),
                threshold: 0.0,
            })?;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r * n + col].clone();
            for j in 0..n {
                a[r * n + j] = a[r * n + j].sub(&f.mul(&a[col * n + j]));
                inv[r * n + j] = inv[r * n + j].sub(&f.mul(&inv[col * n + j]));
            }
        }
    }
    Ok(inv)
}

/// Inverse of a jet-valued matrix with invertible constant part: invert the
/// constant part exactly, then sum the Neumann series of the nilpotent
/// remainder. The series terminates at the truncation order, so the result
/// is exact as a truncated expansion.
pub fn invert_jet_matrix(g: &[Jet], n: usize) -> Result<Vec<Jet>, Error> {
    assert_eq!(g.len(), n * n);
    let nvars = g[0].nvars();
    let order = g[0].order();
    let g0: Vec<f64> = g.iter().map(|j| j.constant_term()).collect();
    let g0_inv = invert(&g0, n)?;
    // B = I - g0^-1 g has zero constant term
    let mut b: Vec<Jet> = vec![Jet::constant(nvars, order, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = Jet::constant(nvars, order, if i == j { 1.0 } else { 0.0 });
            for k in 0..n {
                acc.add_scaled_assign(-g0_inv[i * n + k], &g[k * n + j]);
            }
            b[i * n + j] = acc;
        }
    }
    // N = I + B + B^2 + ... + B^order, by Horner
    let mut series: Vec<Jet> = (0..n * n)
        .map(|p| Jet::constant(nvars, order, if p / n == p % n { 1.0 } else { 0.0 }))
        .collect();
    for _ in 0..order {
        let mut next: Vec<Jet> = vec![Jet::constant(nvars, order, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = Jet::constant(nvars, order, if i == j { 1.0 } else { 0.0 });
                for k in 0..n {
                    acc = &acc + &(&b[i * n + k] * &series[k * n + j]);
                }
                next[i * n + j] = acc;
            }
        }
        series = next;
    }
    // inverse = N g0^-1
    let mut inv: Vec<Jet> = vec![Jet::constant(nvars, order, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = Jet::constant(nvars, order, 0.0);
            for k in 0..n {
                acc.add_scaled_assign(g0_inv[k * n + j], &series[i * n + k]);
            }
            inv[i * n + j] = acc;
        }
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn real_inverse_round_trip() {
        let m = [2.0, 1.0, 0.5, 1.0, 3.0, -1.0, 0.0, -1.0, 4.0];
        let inv = invert(&m, 3).unwrap();
        let prod = mat_mul(&m, &inv, 3);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(prod[i * 3 + j], expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn singular_matrix_rejected() {
        let m = [1.0, 2.0, 2.0, 4.0];
        assert!(matches!(invert(&m, 2), Err(Error::Degenerate { .. })));
    }

    #[test]
    fn signature_of_minkowski_form() {
        let m = [-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        assert_eq!(symmetric_signature(&m, 3, 1e-9), (2, 1, 0));
    }

    #[test]
    fn signature_of_indefinite_nondiagonal() {
        // eigenvalues of [[0,1],[1,0]] are +1 and -1
        let m = [0.0, 1.0, 1.0, 0.0];
        assert_eq!(symmetric_signature(&m, 2, 1e-9), (1, 1, 0));
    }

    #[test]
    fn jet_inverse_matches_generic_inverse() {
        let x = Jet::variable(2, 3, 0, 0.0).unwrap();
        let y = Jet::variable(2, 3, 1, 0.0).unwrap();
        let one = Jet::constant(2, 3, 1.0);
        // g = [[1 + x^2, x y], [x y, 2 + sin(y)]]
        let g = vec![
            &one + &(&x * &x),
            &x * &y,
            &x * &y,
            (&Jet::constant(2, 3, 2.0) + &y.sin()),
        ];
        let a = invert_jet_matrix(&g, 2).unwrap();
        let b = invert_generic(&g, 2).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).max_abs() < 1e-13);
        }
        // g * g^-1 = id to truncation order
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = Jet::constant(2, 3, 0.0);
                for k in 0..2 {
                    acc = &acc + &(&g[i * 2 + k] * &a[k * 2 + j]);
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(acc.constant_term(), expect, epsilon = 1e-13);
                assert!(acc.max_abs() - expect.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn jet_inverse_rejects_degenerate_constant_part() {
        let x = Jet::variable(1, 2, 0, 0.0).unwrap();
        let g = vec![x.clone(), x.zero_like(), x.zero_like(), x.clone()];
        assert!(matches!(
            invert_jet_matrix(&g, 2),
            Err(Error::Degenerate { .. })
        ));
    }
}
