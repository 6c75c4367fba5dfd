/// `c = alpha_c * c + a·b` where `a` is `m×k` and `b` is `k×n` after the
/// optional transposes. All operands are contiguous row-major.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_t: bool,
    b: &[f64],
    b_t: bool,
    c: &mut [f64],
    beta: f64,
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.iter_mut().for_each(|v| *v *= beta);
        return;
    }
    // stored a is m×k (row stride k) or k×m when transposed (row stride m)
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: slice lengths are checked above against the logical shapes and
    // the strides address exactly those elements.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

/// Tanh-approximated GELU.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

pub fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + 0.044715 * x * x * x);
    let t = u.tanh();
    let du = GELU_C * (1.0 + 3.0 * 0.044715 * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// In-place numerically stable softmax of one row.
pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Mean binary cross-entropy over logits, in the overflow-free form
/// `max(z,0) - z·y + ln(1 + e^{-|z|})`.
pub fn bce_loss(logits: &[f64], labels: &[bool]) -> f64 {
    debug_assert_eq!(logits.len(), labels.len());
    if logits.is_empty() {
        return 0.0;
    }
    let sum: f64 = logits
        .iter()
        .zip(labels)
        .map(|(&z, &y)| {
            let y = y as u8 as f64;
            z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
        })
        .sum();
    sum / logits.len() as f64
}

/// d(sum of per-logit BCE)/dz scaled by `scale`.
pub fn bce_grad(logits: &[f64], labels: &[bool], scale: f64) -> Vec<f64> {
    logits
        .iter()
        .zip(labels)
        .map(|(&z, &y)| (sigmoid(z) - y as u8 as f64) * scale)
        .collect()
}

/// Multi-head self-attention over `batch` sequences of `t` tokens whose
/// fused projections `[q | k | v]` are rows of `qkv` (`batch*t × 3d`).
/// Returns the per-head concatenated outputs (`batch*t × d`) and the
/// attention probabilities (`batch × heads × t × t`).
pub fn self_attention_forward(
    qkv: &[f64],
    batch: usize,
    t: usize,
    d: usize,
    heads: usize,
) -> (Vec<f64>, Vec<f64>) {
    let hd = d / heads;
    let scale = 1.0 / (hd as f64).sqrt();
    let mut out = vec![0.0; batch * t * d];
    let mut probs = vec![0.0; batch * heads * t * t];
    for b in 0..batch {
        for h in 0..heads {
            let pbase = (b * heads + h) * t * t;
            for i in 0..t {
                let qi = &qkv[(b * t + i) * 3 * d + h * hd..][..hd];
                let row = &mut probs[pbase + i * t..pbase + (i + 1) * t];
                for (j, r) in row.iter_mut().enumerate() {
                    let kj = &qkv[(b * t + j) * 3 * d + d + h * hd..][..hd];
                    *r = qi.iter().zip(kj).map(|(a, c)| a * c).sum::<f64>() * scale;
                }
                softmax_in_place(row);
                let o = &mut out[(b * t + i) * d + h * hd..][..hd];
                for j in 0..t {
                    let p = probs[pbase + i * t + j];
                    let vj = &qkv[(b * t + j) * 3 * d + 2 * d + h * hd..][..hd];
                    for (ov, vv) in o.iter_mut().zip(vj) {
                        *ov += p * vv;
                    }
                }
            }
        }
    }
    (out, probs)
}

/// Reverse pass of [`self_attention_forward`]; returns `dL/dqkv`.
pub fn self_attention_backward(
    qkv: &[f64],
    probs: &[f64],
    dout: &[f64],
    batch: usize,
    t: usize,
    d: usize,
    heads: usize,
) -> Vec<f64> {
    let hd = d / heads;
    let scale = 1.0 / (hd as f64).sqrt();
    let mut dqkv = vec![0.0; qkv.len()];
    let mut dp = vec![0.0; t];
    for b in 0..batch {
        for h in 0..heads {
            let pbase = (b * heads + h) * t * t;
            for i in 0..t {
                let doi = &dout[(b * t + i) * d + h * hd..][..hd];
                // dv_j += p_ij * do_i ; dp_ij = do_i · v_j
                for j in 0..t {
                    let p = probs[pbase + i * t + j];
                    let vrow = (b * t + j) * 3 * d + 2 * d + h * hd;
                    let mut acc = 0.0;
                    for c in 0..hd {
                        acc += doi[c] * qkv[vrow + c];
                        dqkv[vrow + c] += p * doi[c];
                    }
                    dp[j] = acc;
                }
                let prow = &probs[pbase + i * t..pbase + (i + 1) * t];
                let dot: f64 = prow.iter().zip(&dp).map(|(p, g)| p * g).sum();
                let qrow = (b * t + i) * 3 * d + h * hd;
                for j in 0..t {
                    let ds = prow[j] * (dp[j] - dot) * scale;
                    if ds == 0.0 {
                        continue;
                    }
                    let krow = (b * t + j) * 3 * d + d + h * hd;
                    for c in 0..hd {
                        dqkv[qrow + c] += ds * qkv[krow + c];
                        dqkv[krow + c] += ds * qkv[qrow + c];
                    }
                }
            }
        }
    }
    dqkv
}
