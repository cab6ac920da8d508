//! Integer-order Bessel functions of the first kind by Miller's downward
//! recurrence, normalized with J_0 + 2ΣJ_2k = 1.

/// J_0(x), …, J_n_max(x).
pub fn bessel_j_upto(n_max: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    // start index well above both the order and the argument
    let mut start = n_max.max(ax.ceil() as usize) + 20 + (10.0 * ax.sqrt()) as usize;
    start += start % 2;

    let mut next = 0.0; // J_{k+1}
    let mut cur = 1e-300; // J_k
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        let prev = 2.0 * k as f64 / ax * cur - next;
        next = cur;
        cur = prev;
        // rescale to stay in range
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
        }
        let order = k - 1;
        if order <= n_max {
            out[order] = cur;
        }
        if order % 2 == 0 && order > 0 {
            norm += 2.0 * cur;
        }
    }
    norm += cur;
    for (k, v) in out.iter_mut().enumerate() {
        *v /= norm;
        if x < 0.0 && k % 2 == 1 {
            *v = -*v;
        }
    }
    out
}

/// J_n(x) for any integer order.
pub fn bessel_j(n: i64, x: f64) -> f64 {
    let m = n.unsigned_abs() as usize;
    let v = bessel_j_upto(m, x)[m];
    if n < 0 && m % 2 == 1 {
        -v
    } else {
        v
    }
}
