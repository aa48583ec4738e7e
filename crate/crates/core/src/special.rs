//! Special functions evaluated by three-term recurrence.

/// Generalized Laguerre polynomial `L_n^{(k)}(x)` by the forward recurrence
///
/// `(j+1) L_{j+1} = (2j + 1 + k - x) L_j - (j + k) L_{j-1}`,
///
/// which is stable for the modest `x` met in phase-space work.
pub fn laguerre_assoc(n: usize, k: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + k - x;
    for j in 1..n {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + k - x) * cur - (jf + k) * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Ordinary Laguerre polynomial `L_n(x)`.
pub fn laguerre(n: usize, x: f64) -> f64 {
    laguerre_assoc(n, 0.0, x)
}

/// All of `L_0(x) ..= L_{n-1}(x)` in one pass.
pub fn laguerre_table(n: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    out.push(1.0);
    if n == 1 {
        return out;
    }
    out.push(1.0 - x);
    for j in 1..n - 1 {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 - x) * out[j] - jf * out[j - 1]) / (jf + 1.0);
        out.push(next);
    }
    out
}

/// `ln(n!)`, summed directly so it never overflows.
pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}
