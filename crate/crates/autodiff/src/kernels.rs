//! Raw numeric kernels shared by the forward and backward passes.

/// `out[m,n] = a[m,k] * b[k,n]`.
///
/// The i-k-j loop order keeps the summation over `k` in index order for every
/// output element while letting the inner loop vectorize across `n`.
/// Output columns per register tile.
const TILE: usize = 16;

pub(crate) fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    // 4 x TILE blocks of the output accumulate in registers over the whole k
    // range. Each element still sums its k products in ascending order
    // starting from zero, so results match the naive triple loop bit for bit.
    let mut i = 0;
    while i + 4 <= m {
        let mut jt = 0;
        while jt + TILE <= n {
            let mut acc = [[0.0f64; TILE]; 4];
            for kk in 0..k {
                let bs: &[f64; TILE] = b[kk * n + jt..kk * n + jt + TILE]
                    .try_into()
                    .expect("tile width");
                for (r, acc_r) in acc.iter_mut().enumerate() {
                    let ar = a[(i + r) * k + kk];
                    for (o, &bv) in acc_r.iter_mut().zip(bs) {
                        *o += ar * bv;
                    }
                }
            }
            for (r, acc_r) in acc.iter().enumerate() {
                out[(i + r) * n + jt..(i + r) * n + jt + TILE].copy_from_slice(acc_r);
            }
            jt += TILE;
        }
        if jt < n {
            for r in i..i + 4 {
                row_tail(a, b, &mut out, r, jt, k, n);
            }
        }
        i += 4;
    }
    for r in i..m {
        row_tail(a, b, &mut out, r, 0, k, n);
    }
    out
}

/// Columns `j0..n` of output row `r`, k in ascending order.
fn row_tail(a: &[f64], b: &[f64], out: &mut [f64], r: usize, j0: usize, k: usize, n: usize) {
    let row = &mut out[r * n + j0..(r + 1) * n];
    for kk in 0..k {
        let ar = a[r * k + kk];
        for (o, &bv) in row.iter_mut().zip(&b[kk * n + j0..(kk + 1) * n]) {
            *o += ar * bv;
        }
    }
}

pub(crate) fn transpose(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = a[i * cols + j];
        }
    }
    out
}

pub(crate) fn softmax_rows(x: &[f64], cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for (src, dst) in x.chunks(cols).zip(out.chunks_mut(cols)) {
        let max = src.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (d, &s) in dst.iter_mut().zip(src) {
            *d = (s - max).exp();
            sum += *d;
        }
        for d in dst.iter_mut() {
            *d /= sum;
        }
    }
    out
}

/// Normalizes each row to zero mean and unit variance. Returns the output and
/// the per-row reciprocal standard deviations.
pub(crate) fn layer_norm_rows(x: &[f64], cols: usize, eps: f64) -> (Vec<f64>, Vec<f64>) {
    let mut out = vec![0.0; x.len()];
    let mut rstd = Vec::with_capacity(x.len() / cols.max(1));
    let inv_n = 1.0 / cols as f64;
    for (src, dst) in x.chunks(cols).zip(out.chunks_mut(cols)) {
        let mut mean = 0.0;
        for &s in src {
            mean += s;
        }
        mean *= inv_n;
        let mut var = 0.0;
        for &s in src {
            var += (s - mean) * (s - mean);
        }
        var *= inv_n;
        let r = 1.0 / (var + eps).sqrt();
        for (d, &s) in dst.iter_mut().zip(src) {
            *d = (s - mean) * r;
        }
        rstd.push(r);
    }
    (out, rstd)
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

/// Tanh approximation of GELU.
pub(crate) fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

pub(crate) fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_A * x * x * x);
    let th = u.tanh();
    0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}
