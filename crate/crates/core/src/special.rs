//! Bessel functions of the first kind for integer order.

/// J_n(x) by Miller's backward recurrence, normalised with
/// J₀ + 2ΣJ₂ₖ = 1. Good to ~1e-15 for |x| up to a few hundred.
pub fn bessel_j(n: i32, x: f64) -> f64 {
    if n < 0 {
        let v = bessel_j(-n, x);
        return if n % 2 == 0 { v } else { -v };
    }
    if x < 0.0 {
        let v = bessel_j(n, -x);
        return if n % 2 == 0 { v } else { -v };
    }
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let n = n as usize;
    let top = n.max(x.ceil() as usize);
    let start = 2 * ((top + 30 + (40.0 * top as f64).sqrt() as usize) / 2);

    let mut next = 0.0;
    let mut cur = 1e-300;
    let mut result = 0.0;
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        // cur = J_k, compute J_{k-1}
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        if k - 1 == n {
            result = cur;
        }
        if (k - 1) % 2 == 0 && k - 1 > 0 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            next *= 1e-250;
            cur *= 1e-250;
            result *= 1e-250;
            norm *= 1e-250;
        }
    }
    norm += cur;
    result / norm
}
