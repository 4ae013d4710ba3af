// Copyright 2026 flsim Contributors
// SPDX-License-Identifier: Apache-2.0

//! Matrix exponential by Padé approximation with scaling and squaring.
//!
//! Ref: N. J. Higham, "The Scaling and Squaring Method for the Matrix
//! Exponential Revisited", SIAM J. Matrix Anal. Appl. 26.4 (2005).

use num_complex::Complex64;

use super::{add, identity, lu_solve, mat_mul, one_norm, scale, sub, CMat, LinalgError};

const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.539398330063230e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Evaluates the order-m Padé numerator/denominator pair (u, v) so that
/// r_m(A) = (v - u)^{-1} (v + u).
fn pade_uv(a: &CMat, b: &[f64]) -> (CMat, CMat) {
    let n = a.nrows();
    let a2 = mat_mul(a, a);
    let id = identity(n);
    match b.len() {
        4 => {
            let u_inner = add(&scale(&a2, real(b[3])), &scale(&id, real(b[1])));
            let u = mat_mul(a, &u_inner);
            let v = add(&scale(&a2, real(b[2])), &scale(&id, real(b[0])));
            (u, v)
        }
        6 => {
            let a4 = mat_mul(&a2, &a2);
            let u_inner = add(
                &add(&scale(&a4, real(b[5])), &scale(&a2, real(b[3]))),
                &scale(&id, real(b[1])),
            );
            let u = mat_mul(a, &u_inner);
            let v = add(
                &add(&scale(&a4, real(b[4])), &scale(&a2, real(b[2]))),
                &scale(&id, real(b[0])),
            );
            (u, v)
        }
        8 => {
            let a4 = mat_mul(&a2, &a2);
            let a6 = mat_mul(&a4, &a2);
            let u_inner = add(
                &add(&scale(&a6, real(b[7])), &scale(&a4, real(b[5]))),
                &add(&scale(&a2, real(b[3])), &scale(&id, real(b[1]))),
            );
            let u = mat_mul(a, &u_inner);
            let v = add(
                &add(&scale(&a6, real(b[6])), &scale(&a4, real(b[4]))),
                &add(&scale(&a2, real(b[2])), &scale(&id, real(b[0]))),
            );
            (u, v)
        }
        10 => {
            let a4 = mat_mul(&a2, &a2);
            let a6 = mat_mul(&a4, &a2);
            let a8 = mat_mul(&a6, &a2);
            let u_inner = add(
                &add(&scale(&a8, real(b[9])), &scale(&a6, real(b[7]))),
                &add(
                    &add(&scale(&a4, real(b[5])), &scale(&a2, real(b[3]))),
                    &scale(&id, real(b[1])),
                ),
            );
            let u = mat_mul(a, &u_inner);
            let v = add(
                &add(&scale(&a8, real(b[8])), &scale(&a6, real(b[6]))),
                &add(
                    &add(&scale(&a4, real(b[4])), &scale(&a2, real(b[2]))),
                    &scale(&id, real(b[0])),
                ),
            );
            (u, v)
        }
        _ => unreachable!("unsupported pade order"),
    }
}

fn pade13_uv(a: &CMat) -> (CMat, CMat) {
    const B: [f64; 14] = [
        64764752532480000.,
        32382376266240000.,
        7771770303897600.,
        1187353796428800.,
        129060195264000.,
        10559470521600.,
        670442572800.,
        33522128640.,
        1323241920.,
        40840800.,
        960960.,
        16380.,
        182.,
        1.,
    ];
    let n = a.nrows();
    let id = identity(n);
    let a2 = mat_mul(a, a);
    let a4 = mat_mul(&a2, &a2);
    let a6 = mat_mul(&a4, &a2);

    let w1 = add(
        &add(&scale(&a6, real(B[13])), &scale(&a4, real(B[11]))),
        &scale(&a2, real(B[9])),
    );
    let w2 = add(
        &add(&scale(&a6, real(B[7])), &scale(&a4, real(B[5]))),
        &add(&scale(&a2, real(B[3])), &scale(&id, real(B[1]))),
    );
    let u = mat_mul(a, &add(&mat_mul(&a6, &w1), &w2));

    let z1 = add(
        &add(&scale(&a6, real(B[12])), &scale(&a4, real(B[10]))),
        &scale(&a2, real(B[8])),
    );
    let z2 = add(
        &add(&scale(&a6, real(B[6])), &scale(&a4, real(B[4]))),
        &add(&scale(&a2, real(B[2])), &scale(&id, real(B[0]))),
    );
    let v = add(&mat_mul(&a6, &z1), &z2);
    (u, v)
}

/// exp(A) for a square complex matrix.
pub fn expm(a: &CMat) -> Result<CMat, LinalgError> {
    if a.nrows() != a.ncols() {
        return Err(LinalgError::Dimension("expm: not square".into()));
    }
    if !super::all_finite(a) {
        return Err(LinalgError::NonFinite);
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(CMat::zeros(0, 0));
    }
    let norm = one_norm(a);

    const B3: [f64; 4] = [120., 60., 12., 1.];
    const B5: [f64; 6] = [30240., 15120., 3360., 420., 30., 1.];
    const B7: [f64; 8] = [17297280., 8648640., 1995840., 277200., 25200., 1512., 56., 1.];
    const B9: [f64; 10] = [
        17643225600.,
        8821612800.,
        2075673600.,
        302702400.,
        30270240.,
        2162160.,
        110880.,
        3960.,
        90.,
        1.,
    ];

    let (u, v, squarings) = if norm <= THETA_3 {
        let (u, v) = pade_uv(a, &B3);
        (u, v, 0u32)
    } else if norm <= THETA_5 {
        let (u, v) = pade_uv(a, &B5);
        (u, v, 0)
    } else if norm <= THETA_7 {
        let (u, v) = pade_uv(a, &B7);
        (u, v, 0)
    } else if norm <= THETA_9 {
        let (u, v) = pade_uv(a, &B9);
        (u, v, 0)
    } else {
        let s = ((norm / THETA_13).log2().ceil().max(0.0)) as u32;
        let a_scaled = scale(a, real(0.5f64.powi(s as i32)));
        let (u, v) = pade13_uv(&a_scaled);
        (u, v, s)
    };

    let num = add(&v, &u);
    let den = sub(&v, &u);
    let mut r = lu_solve(&den, &num)?;
    for _ in 0..squarings {
        r = mat_mul(&r, &r);
    }
    Ok(r)
}
