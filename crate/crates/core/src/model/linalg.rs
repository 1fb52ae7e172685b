//! Dense row-major kernels used by the decoder.

/// `C = alpha * A B + beta * C` with explicit row/column strides.
///
/// `a` is `m × k`, `b` is `k × n`, `c` is `m × n`. Slices must cover every
/// addressed element.
#[allow(clippy::too_many_arguments)]
#[inline]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    let extent = |rows: usize, cols: usize, rs: usize, cs: usize| (rows - 1) * rs + (cols - 1) * cs + 1;
    if k > 0 {
        assert!(a.len() >= extent(m, k, rsa, csa), "gemm: A too short");
        assert!(b.len() >= extent(k, n, rsb, csb), "gemm: B too short");
    }
    assert!(c.len() >= extent(m, n, rsc, csc), "gemm: C too short");
    // SAFETY: every index reachable through the given shapes and strides lies
    // inside the slices, checked above; `c` does not alias `a` or `b` because
    // it is borrowed mutably.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

/// `out = x W + bias` for `x: rows × d_in`, `W: d_in × d_out`.
pub(crate) fn linear(x: &[f64], w: &[f64], bias: &[f64], rows: usize, d_in: usize, d_out: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows * d_out);
    for _ in 0..rows {
        out.extend_from_slice(bias);
    }
    gemm(rows, d_in, d_out, 1.0, x, (d_in, 1), w, (d_out, 1), 1.0, &mut out, (d_out, 1));
    out
}

/// Backward of [`linear`]: accumulates `dW += xᵀ dy`, `db += Σ dy` and
/// returns `dx = dy Wᵀ`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn linear_backward(
    x: &[f64],
    w: &[f64],
    dy: &[f64],
    rows: usize,
    d_in: usize,
    d_out: usize,
    dw: &mut [f64],
    db: &mut [f64],
) -> Vec<f64> {
    gemm(d_in, rows, d_out, 1.0, x, (1, d_in), dy, (d_out, 1), 1.0, dw, (d_out, 1));
    for row in dy.chunks_exact(d_out) {
        for (b, g) in db.iter_mut().zip(row) {
            *b += g;
        }
    }
    let mut dx = vec![0.0; rows * d_in];
    gemm(rows, d_out, d_in, 1.0, dy, (d_out, 1), w, (1, d_out), 0.0, &mut dx, (d_in, 1));
    dx
}

pub(crate) const LN_EPS: f64 = 1e-5;

pub(crate) struct LayerNormOut {
    pub out: Vec<f64>,
    pub xhat: Vec<f64>,
    pub rstd: Vec<f64>,
}

pub(crate) fn layer_norm(x: &[f64], gain: &[f64], bias: &[f64], d: usize) -> LayerNormOut {
    let rows = x.len() / d;
    let mut out = vec![0.0; x.len()];
    let mut xhat = vec![0.0; x.len()];
    let mut rstd = Vec::with_capacity(rows);
    for r in 0..rows {
        let xr = &x[r * d..(r + 1) * d];
        let mean = xr.iter().sum::<f64>() / d as f64;
        let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let rs = 1.0 / (var + LN_EPS).sqrt();
        rstd.push(rs);
        for j in 0..d {
            let h = (xr[j] - mean) * rs;
            xhat[r * d + j] = h;
            out[r * d + j] = h * gain[j] + bias[j];
        }
    }
    LayerNormOut { out, xhat, rstd }
}

pub(crate) fn layer_norm_backward(
    dout: &[f64],
    xhat: &[f64],
    rstd: &[f64],
    gain: &[f64],
    d: usize,
    dgain: &mut [f64],
    dbias: &mut [f64],
) -> Vec<f64> {
    let mut dx = vec![0.0; dout.len()];
    let mut dxhat = vec![0.0; d];
    for (r, &rs) in rstd.iter().enumerate() {
        let base = r * d;
        let mut mean_d = 0.0;
        let mut mean_dx = 0.0;
        for j in 0..d {
            let g = dout[base + j];
            dgain[j] += g * xhat[base + j];
            dbias[j] += g;
            dxhat[j] = g * gain[j];
            mean_d += dxhat[j];
            mean_dx += dxhat[j] * xhat[base + j];
        }
        mean_d /= d as f64;
        mean_dx /= d as f64;
        for j in 0..d {
            dx[base + j] = rs * (dxhat[j] - mean_d - xhat[base + j] * mean_dx);
        }
    }
    dx
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)

pub(crate) fn gelu(u: f64) -> f64 {
    0.5 * u * (1.0 + (GELU_C * (u + 0.044715 * u * u * u)).tanh())
}

pub(crate) fn gelu_grad(u: f64) -> f64 {
    let th = (GELU_C * (u + 0.044715 * u * u * u)).tanh();
    0.5 * (1.0 + th) + 0.5 * u * (1.0 - th * th) * GELU_C * (1.0 + 3.0 * 0.044715 * u * u)
}

/// Row-wise log-softmax.
pub(crate) fn log_softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_z = max + row.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    row.iter().map(|&z| z - log_z).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_matches_naive() {
        let (m, k, n) = (3, 4, 2);
        let a: Vec<f64> = (0..m * k).map(|i| i as f64 * 0.5 - 1.0).collect();
        let b: Vec<f64> = (0..k * n).map(|i| (i as f64).sin()).collect();
        let mut c = vec![1.0; m * n];
        gemm(m, k, n, 2.0, &a, (k, 1), &b, (n, 1), 0.5, &mut c, (n, 1));
        for i in 0..m {
            for j in 0..n {
                let mut s = 0.0;
                for t in 0..k {
                    s += a[i * k + t] * b[t * n + j];
                }
                assert!((c[i * n + j] - (2.0 * s + 0.5)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gelu_derivative() {
        for &u in &[-3.0, -0.7, 0.0, 0.4, 2.5] {
            let h = 1e-6;
            let fd = (gelu(u + h) - gelu(u - h)) / (2.0 * h);
            assert!((fd - gelu_grad(u)).abs() < 1e-8);
        }
    }

    #[test]
    fn layer_norm_backward_matches_fd() {
        let d = 5;
        let x = [0.3, -1.2, 2.0, 0.7, -0.1, 1.0, 1.5, -0.5, 0.0, 0.25];
        let gain = [1.0, 0.5, -0.3, 2.0, 1.1];
        let bias = [0.0, 0.1, 0.2, -0.1, 0.3];
        let w: Vec<f64> = (0..x.len()).map(|i| (i as f64 * 0.37).cos()).collect();
        let f = |x: &[f64]| -> f64 {
            let o = layer_norm(x, &gain, &bias, d);
            o.out.iter().zip(&w).map(|(a, b)| a * b).sum()
        };
        let ln = layer_norm(&x, &gain, &bias, d);
        let mut dg = vec![0.0; d];
        let mut db = vec![0.0; d];
        let dx = layer_norm_backward(&w, &ln.xhat, &ln.rstd, &gain, d, &mut dg, &mut db);
        let mut xp = x.to_vec();
        for i in 0..x.len() {
            let h = 1e-6;
            xp[i] = x[i] + h;
            let up = f(&xp);
            xp[i] = x[i] - h;
            let down = f(&xp);
            xp[i] = x[i];
            assert!(((up - down) / (2.0 * h) - dx[i]).abs() < 1e-7);
        }
    }
}
