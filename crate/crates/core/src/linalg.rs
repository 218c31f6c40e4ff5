//! Small dense complex linear-algebra helpers shared by the builders and solvers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// `X <- (X + X^H) / 2`.
pub fn hermitize(x: &mut CMat) {
    let n = x.nrows();
    for i in 0..n {
        x[(i, i)] = Complex64::new(x[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let avg = (x[(i, j)] + x[(j, i)].conj()) * 0.5;
            x[(i, j)] = avg;
            x[(j, i)] = avg.conj();
        }
    }
}

/// Real part of `v^H X v`.
pub fn quad_form(x: &CMat, v: &CVec) -> f64 {
    v.dotc(&(x * v)).re
}

/// `Re tr(A B)` for square matrices of equal size, without forming the product.
pub fn re_trace_prod(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}

/// Outer product `u u^H`.
pub fn outer(u: &CVec) -> CMat {
    u * u.adjoint()
}

/// Splits a complex vector into `[re; im]`.
pub fn to_real(v: &CVec) -> DVector<f64> {
    let n = v.len();
    DVector::from_fn(2 * n, |i, _| if i < n { v[i].re } else { v[i - n].im })
}

pub fn from_real(x: &DVector<f64>) -> CVec {
    let n = x.len() / 2;
    CVec::from_fn(n, |i, _| Complex64::new(x[i], x[i + n]))
}

/// Real symmetric matrix `Q` with `x^T Q x = v^H A v` for `x = [Re v; Im v]`
/// and Hermitian `A`.
pub fn realify_hermitian(a: &CMat) -> DMatrix<f64> {
    let n = a.nrows();
    let mut q = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = a[(i, j)];
            q[(i, j)] = z.re;
            q[(i + n, j + n)] = z.re;
            q[(i, j + n)] = -z.im;
            q[(i + n, j)] = z.im;
        }
    }
    q
}

/// Real vector `c` with `c^T x = Re{w^H v}` for `x = [Re v; Im v]`.
pub fn realify_linear(w: &CVec) -> DVector<f64> {
    to_real(w)
}

pub fn unit_modulus(v: &CVec) -> CVec {
    v.map(|z| {
        let r = z.norm();
        if r > 0.0 {
            z / r
        } else {
            Complex64::new(1.0, 0.0)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn realified_forms_match_complex_forms() {
        let a = CMat::from_fn(3, 3, |i, j| Complex64::new((i + 2 * j) as f64, i as f64 - j as f64));
        let mut h = &a * a.adjoint();
        hermitize(&mut h);
        let v = CVec::from_fn(3, |i, _| Complex64::new(0.3 * i as f64 - 0.2, 1.0 - 0.5 * i as f64));
        let w = CVec::from_fn(3, |i, _| Complex64::new(1.0 + i as f64, -0.7));
        let x = to_real(&v);
        let q = realify_hermitian(&h);
        assert!((x.dot(&(&q * &x)) - quad_form(&h, &v)).abs() < 1e-10);
        assert!((realify_linear(&w).dot(&x) - w.dotc(&v).re).abs() < 1e-12);
        assert_eq!(from_real(&x), v);
    }
}
