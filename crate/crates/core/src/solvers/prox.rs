//! Proximal operators of the row penalty
//! `tau1 * |u|_1 + tau2 * sum_t |u_{t+1} - u_t| + tau3 * |u|_2`.
//!
//! Every operator has an in-place slice form used by the solver loop and an
//! allocating form for callers.

/// Soft thresholding, in place.
#[inline]
pub fn soft_threshold_in_place(v: &mut [f64], tau: f64) {
    if tau <= 0.0 {
        return;
    }
    for x in v.iter_mut() {
        let a = x.abs() - tau;
        *x = if a > 0.0 { a.copysign(*x) } else { 0.0 };
    }
}

/// Block soft thresholding, in place.
#[inline]
pub fn group_shrink_in_place(v: &mut [f64], tau: f64) {
    if tau <= 0.0 {
        return;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= tau {
        v.iter_mut().for_each(|x| *x = 0.0);
    } else {
        let scale = 1.0 - tau / norm;
        v.iter_mut().for_each(|x| *x *= scale);
    }
}

/// Exact 1D total-variation denoising (Condat's direct algorithm):
/// `output = argmin_u 0.5 |u - input|^2 + lambda * sum_t |u_{t+1} - u_t|`.
pub fn tv1d_denoise(input: &[f64], lambda: f64, output: &mut [f64]) {
    let width = input.len();
    assert_eq!(width, output.len());
    if width == 0 {
        return;
    }
    if lambda <= 0.0 || width == 1 {
        output.copy_from_slice(input);
        return;
    }
    let two_lambda = 2.0 * lambda;
    let min_lambda = -lambda;
    // k: current sample, k0: start of the current segment, kplus/kminus: last
    // positions where umax = -lambda / umin = lambda.
    let (mut k, mut k0, mut kplus, mut kminus) = (0usize, 0usize, 0usize, 0usize);
    // dual variable bounds and the segment value bounds
    let (mut umin, mut umax) = (lambda, min_lambda);
    let (mut vmin, mut vmax) = (input[0] - lambda, input[0] + lambda);

    loop {
        while k == width - 1 {
            if umin < 0.0 {
                // vmin too high, negative jump
                while k0 <= kminus {
                    output[k0] = vmin;
                    k0 += 1;
                }
                k = k0;
                kminus = k0;
                vmin = input[k0];
                umin = lambda;
                umax = vmin + umin - vmax;
            } else if umax > 0.0 {
                // vmax too low, positive jump
                while k0 <= kplus {
                    output[k0] = vmax;
                    k0 += 1;
                }
                k = k0;
                kplus = k0;
                vmax = input[k0];
                umax = min_lambda;
                umin = vmax + umax - vmin;
            } else {
                vmin += umin / (k - k0 + 1) as f64;
                while k0 <= k {
                    output[k0] = vmin;
                    k0 += 1;
                }
                return;
            }
        }
        umin += input[k + 1] - vmin;
        if umin < min_lambda {
            while k0 <= kminus {
                output[k0] = vmin;
                k0 += 1;
            }
            k = k0;
            kplus = k0;
            kminus = k0;
            vmin = input[k0];
            vmax = vmin + two_lambda;
            umin = lambda;
            umax = min_lambda;
            continue;
        }
        umax += input[k + 1] - vmax;
        if umax > lambda {
            while k0 <= kplus {
                output[k0] = vmax;
                k0 += 1;
            }
            k = k0;
            kplus = k0;
            kminus = k0;
            vmax = input[k0];
            vmin = vmax - two_lambda;
            umin = lambda;
            umax = min_lambda;
        } else {
            k += 1;
            if umin >= lambda {
                kminus = k;
                vmin += (umin - lambda) / (kminus - k0 + 1) as f64;
                umin = lambda;
            }
            if umax <= min_lambda {
                kplus = k;
                vmax += (umax + lambda) / (kplus - k0 + 1) as f64;
                umax = min_lambda;
            }
        }
    }
}

/// Fused sparse group prox of one row, in place. `scratch` must have the row's
/// length. Applies the fused (TV) prox, then soft thresholding, then block
/// shrinkage; this composition is the exact prox of the summed penalty.
#[inline]
pub fn prox_fsgl_row_in_place(v: &mut [f64], scratch: &mut [f64], tau1: f64, tau2: f64, tau3: f64) {
    if tau2 > 0.0 {
        tv1d_denoise(v, tau2, scratch);
        v.copy_from_slice(scratch);
    }
    soft_threshold_in_place(v, tau1);
    group_shrink_in_place(v, tau3);
}

/// `sign(v) * max(|v| - tau, 0)` elementwise.
pub fn prox_l1(v: &[f64], tau: f64) -> Vec<f64> {
    let mut out = v.to_vec();
    soft_threshold_in_place(&mut out, tau);
    out
}

/// Prox of `tau2 * TV(u)`.
pub fn prox_flsa(v: &[f64], tau2: f64) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    tv1d_denoise(v, tau2, &mut out);
    out
}

/// `max(1 - tau3 / |v|_2, 0) * v`.
pub fn prox_group_l2(v: &[f64], tau3: f64) -> Vec<f64> {
    let mut out = v.to_vec();
    group_shrink_in_place(&mut out, tau3);
    out
}

pub fn prox_fsgl_row(v: &[f64], tau1: f64, tau2: f64, tau3: f64) -> Vec<f64> {
    let mut out = v.to_vec();
    let mut scratch = vec![0.0; v.len()];
    prox_fsgl_row_in_place(&mut out, &mut scratch, tau1, tau2, tau3);
    out
}

/// Sum of absolute successive differences.
pub fn total_variation(u: &[f64]) -> f64 {
    u.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// `0.5 |u - v|^2 + tau1 |u|_1 + tau2 TV(u) + tau3 |u|_2`, the objective each
/// prox above minimizes (with the unused taus set to zero).
pub fn row_prox_objective(u: &[f64], v: &[f64], tau1: f64, tau2: f64, tau3: f64) -> f64 {
    let fit: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() * 0.5;
    let l1: f64 = u.iter().map(|x| x.abs()).sum();
    let l2: f64 = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    fit + tau1 * l1 + tau2 * total_variation(u) + tau3 * l2
}
