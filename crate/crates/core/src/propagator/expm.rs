//! Matrix exponential of a 4×4 complex matrix by scaling and squaring with
//! diagonal Padé approximants (degree chosen from the 1-norm).

use crate::{Mat4, C64};

const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA_13: f64 = 5.371920351148152e0;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

pub fn one_norm(a: &Mat4) -> f64 {
    (0..4)
        .map(|j| (0..4).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// exp(A).
pub fn expm(a: &Mat4) -> Mat4 {
    let norm = one_norm(a);
    if norm == 0.0 {
        return Mat4::identity();
    }
    for (degree, theta) in THETA {
        if norm <= theta {
            return pade_low(a, degree);
        }
    }
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a * C64::from(0.5f64.powi(s));
    let mut r = pade13(&scaled);
    for _ in 0..s {
        r = r * r;
    }
    r
}

fn scale(m: &Mat4, c: f64) -> Mat4 {
    m * C64::from(c)
}

fn solve(u: Mat4, v: Mat4) -> Mat4 {
    let p = v + u;
    let q = v - u;
    q.lu()
        .solve(&p)
        .expect("Padé denominator is nonsingular inside the theta bound")
}

fn pade_low(a: &Mat4, degree: usize) -> Mat4 {
    let b: &[f64] = match degree {
        3 => &B3,
        5 => &B5,
        7 => &B7,
        9 => &B9,
        _ => unreachable!("unsupported Padé degree"),
    };
    let a2 = a * a;
    let mut power = Mat4::identity();
    let mut odd = Mat4::zeros();
    let mut even = Mat4::zeros();
    for k in 0..=degree / 2 {
        even += scale(&power, b[2 * k]);
        odd += scale(&power, b[2 * k + 1]);
        power *= a2;
    }
    solve(a * odd, even)
}

fn pade13(a: &Mat4) -> Mat4 {
    let b = &B13;
    let id = Mat4::identity();
    let a2 = a * a;
    let a4 = a2 * a2;
    let a6 = a4 * a2;
    let u_inner = a6 * (scale(&a6, b[13]) + scale(&a4, b[11]) + scale(&a2, b[9]))
        + scale(&a6, b[7])
        + scale(&a4, b[5])
        + scale(&a2, b[3])
        + scale(&id, b[1]);
    let u = a * u_inner;
    let v = a6 * (scale(&a6, b[12]) + scale(&a4, b[10]) + scale(&a2, b[8]))
        + scale(&a6, b[6])
        + scale(&a4, b[4])
        + scale(&a2, b[2])
        + scale(&id, b[0]);
    solve(u, v)
}
