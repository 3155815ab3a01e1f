//! Slice-oriented sine/cosine and fused activation kernels.
//!
//! The core is branch-free: Cody-Waite range reduction (two-part π/2
//! splitting, quotient by magic-number rounding) feeding the fdlibm minimax
//! kernels, with quadrant handling done through sign-bit arithmetic so the
//! loops vectorize. Blocks whose angles leave the reduction's accuracy
//! range are redone through the standard library, as are non-finite inputs.

use std::f64::consts::FRAC_2_PI;

/// Beyond this magnitude the two-part reduction loses accuracy (the
/// quotient times the high π/2 word stops being exact).
const REDUCTION_LIMIT: f64 = 1.0e6;

/// 2^52 + 2^51: adding then subtracting rounds to nearest integer and
/// leaves the integer in the low mantissa bits.
const MAGIC: f64 = 6_755_399_441_055_744.0;

// High and low parts of π/2.
const PIO2_HI: f64 = 1.570_796_326_734_125_61e0;
const PIO2_LO: f64 = 6.077_100_506_506_192_25e-11;

const S1: f64 = -1.666_666_666_666_663_24e-1;
const S2: f64 = 8.333_333_333_322_489_46e-3;
const S3: f64 = -1.984_126_982_985_794_93e-4;
const S4: f64 = 2.755_731_370_707_006_77e-6;
const S5: f64 = -2.505_076_025_340_686_34e-8;
const S6: f64 = 1.589_690_995_211_550_10e-10;

const C1: f64 = 4.166_666_666_666_660_19e-2;
const C2: f64 = -1.388_888_888_887_410_96e-3;
const C3: f64 = 2.480_158_728_947_672_94e-5;
const C4: f64 = -2.755_731_435_139_066_33e-7;
const C5: f64 = 2.087_572_321_298_174_83e-9;
const C6: f64 = -1.135_964_755_778_819_48e-11;

/// Branch-free sin/cos; valid for |x| ≤ [`REDUCTION_LIMIT`].
#[inline(always)]
fn core_sincos(x: f64) -> (f64, f64) {
    let shifted = x * FRAC_2_PI + MAGIC;
    let qbits = shifted.to_bits();
    let kf = shifted - MAGIC;
    let r = (x - kf * PIO2_HI) - kf * PIO2_LO;
    let z = r * r;
    let s = r + r * z * (S1 + z * (S2 + z * (S3 + z * (S4 + z * (S5 + z * S6)))));
    let c = 1.0 - 0.5 * z + z * z * (C1 + z * (C2 + z * (C3 + z * (C4 + z * (C5 + z * C6)))));
    // Quadrant q = qbits & 3: swap on odd q, negate sin for q ∈ {2,3} and
    // cos for q ∈ {1,2}. All selects are bitwise so the body stays
    // branch-free straight-line code.
    let swap_mask = 0u64.wrapping_sub(qbits & 1);
    let (sb, cb) = (s.to_bits(), c.to_bits());
    let s_raw = (sb & !swap_mask) | (cb & swap_mask);
    let c_raw = (cb & !swap_mask) | (sb & swap_mask);
    let sin_sign = (qbits & 2) << 62;
    let cos_sign = (qbits.wrapping_add(1) & 2) << 62;
    (f64::from_bits(s_raw ^ sin_sign), f64::from_bits(c_raw ^ cos_sign))
}

#[inline(always)]
fn in_range(x: f64) -> bool {
    // NaN fails the comparison and routes to the fallback.
    x.abs() <= REDUCTION_LIMIT
}

const BLOCK: usize = 256;

/// `out[i] = sin(xs[i])`.
pub fn sin_slice(xs: &[f64], out: &mut [f64]) {
    assert_eq!(xs.len(), out.len());
    for (xb, ob) in xs.chunks(BLOCK).zip(out.chunks_mut(BLOCK)) {
        let ok = xb.iter().fold(true, |acc, &x| acc & in_range(x));
        if ok {
            for (o, &x) in ob.iter_mut().zip(xb) {
                *o = core_sincos(x).0;
            }
        } else {
            for (o, &x) in ob.iter_mut().zip(xb) {
                *o = if in_range(x) { core_sincos(x).0 } else { x.sin() };
            }
        }
    }
}

/// `sin_out[i] = sin(xs[i])`, `cos_out[i] = cos(xs[i])`.
pub fn sincos_slice(xs: &[f64], sin_out: &mut [f64], cos_out: &mut [f64]) {
    assert_eq!(xs.len(), sin_out.len());
    assert_eq!(xs.len(), cos_out.len());
    for ((xb, sb), cb) in
        xs.chunks(BLOCK).zip(sin_out.chunks_mut(BLOCK)).zip(cos_out.chunks_mut(BLOCK))
    {
        let ok = xb.iter().fold(true, |acc, &x| acc & in_range(x));
        if ok {
            for ((&x, s), c) in xb.iter().zip(sb.iter_mut()).zip(cb.iter_mut()) {
                (*s, *c) = core_sincos(x);
            }
        } else {
            for ((&x, s), c) in xb.iter().zip(sb.iter_mut()).zip(cb.iter_mut()) {
                (*s, *c) = if in_range(x) { core_sincos(x) } else { x.sin_cos() };
            }
        }
    }
}

/// Fused trainable-activation forward: `out[i] = Σ_t C_t sin(Ω_t a[i] + Φ_t)`.
///
/// Blocks are kept cache-resident across the term loop.
pub fn staf_forward_slice(a: &[f64], out: &mut [f64], amp: &[f64], freq: &[f64], phase: &[f64]) {
    assert_eq!(a.len(), out.len());
    let tau = amp.len();
    for (ab, ob) in a.chunks(BLOCK).zip(out.chunks_mut(BLOCK)) {
        let max_abs = ab.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        let max_freq = freq.iter().fold(0.0f64, |m, &w| m.max(w.abs()));
        let max_phase = phase.iter().fold(0.0f64, |m, &p| m.max(p.abs()));
        ob.iter_mut().for_each(|v| *v = 0.0);
        if max_abs * max_freq + max_phase <= REDUCTION_LIMIT {
            for t in 0..tau {
                let (c_t, w_t, p_t) = (amp[t], freq[t], phase[t]);
                for (o, &x) in ob.iter_mut().zip(ab.iter()) {
                    *o += c_t * core_sincos(w_t * x + p_t).0;
                }
            }
        } else {
            for t in 0..tau {
                let (c_t, w_t, p_t) = (amp[t], freq[t], phase[t]);
                for (o, &x) in ob.iter_mut().zip(ab.iter()) {
                    let angle = w_t * x + p_t;
                    *o += c_t
                        * if in_range(angle) { core_sincos(angle).0 } else { angle.sin() };
                }
            }
        }
    }
}

/// Fused trainable-activation backward for one shared parameter group.
///
/// Writes `da[i] = upstream[i] · Σ_t C_t Ω_t cos(Ω_t a[i] + Φ_t)` and
/// returns per-term sums `(ΣU·sin, C·ΣU·a·cos, C·ΣU·cos)` — the amplitude,
/// frequency, and phase gradients. The sums run over four fixed
/// interleaved lanes merged at the end, so they are deterministic while
/// leaving no loop-carried dependency to serialize the loop.
pub fn staf_backward_slice(
    a: &[f64],
    upstream: &[f64],
    da: &mut [f64],
    amp: &[f64],
    freq: &[f64],
    phase: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    assert_eq!(a.len(), upstream.len());
    assert_eq!(a.len(), da.len());
    const LANES: usize = 8;
    let tau = amp.len();
    let mut acc_us = vec![[0.0f64; LANES]; tau];
    let mut acc_uac = vec![[0.0f64; LANES]; tau];
    let mut acc_uc = vec![[0.0f64; LANES]; tau];
    da.iter_mut().for_each(|v| *v = 0.0);
    let max_freq = freq.iter().fold(0.0f64, |m, &w| m.max(w.abs()));
    let max_phase = phase.iter().fold(0.0f64, |m, &p| m.max(p.abs()));
    for i0 in (0..a.len()).step_by(BLOCK) {
        let i1 = (i0 + BLOCK).min(a.len());
        let a_blk = &a[i0..i1];
        let max_abs = a_blk.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        let fast = max_abs * max_freq + max_phase <= REDUCTION_LIMIT;
        let u_blk = &upstream[i0..i1];
        let quads = a_blk.len() / LANES * LANES;
        for t in 0..tau {
            let (c_t, w_t, p_t) = (amp[t], freq[t], phase[t]);
            let mut l_us = [0.0f64; LANES];
            let mut l_uac = [0.0f64; LANES];
            let mut l_uc = [0.0f64; LANES];
            let da_blk = &mut da[i0..i1];
            if fast {
                // Fixed-size array views keep the lane loop free of bounds
                // checks, which is what lets it vectorize.
                let a_q = a_blk[..quads].chunks_exact(LANES);
                let u_q = u_blk[..quads].chunks_exact(LANES);
                let d_q = da_blk[..quads].chunks_exact_mut(LANES);
                for ((aq, uq), dq) in a_q.zip(u_q).zip(d_q) {
                    let aq: &[f64; LANES] = aq.try_into().expect("exact chunk");
                    let uq: &[f64; LANES] = uq.try_into().expect("exact chunk");
                    let dq: &mut [f64; LANES] = dq.try_into().expect("exact chunk");
                    for j in 0..LANES {
                        let (s, c) = core_sincos(w_t * aq[j] + p_t);
                        let u = uq[j];
                        l_us[j] += u * s;
                        let uc = u * c;
                        l_uac[j] += uc * aq[j];
                        l_uc[j] += uc;
                        dq[j] += uc * c_t * w_t;
                    }
                }
                for ((&x, &u), d) in
                    a_blk[quads..].iter().zip(&u_blk[quads..]).zip(&mut da_blk[quads..])
                {
                    let (s, c) = core_sincos(w_t * x + p_t);
                    l_us[0] += u * s;
                    let uc = u * c;
                    l_uac[0] += uc * x;
                    l_uc[0] += uc;
                    *d += uc * c_t * w_t;
                }
            } else {
                for ((&x, &u), d) in a_blk.iter().zip(u_blk).zip(da_blk.iter_mut()) {
                    let angle = w_t * x + p_t;
                    let (s, c) =
                        if in_range(angle) { core_sincos(angle) } else { angle.sin_cos() };
                    l_us[0] += u * s;
                    let uc = u * c;
                    l_uac[0] += uc * x;
                    l_uc[0] += uc;
                    *d += uc * c_t * w_t;
                }
            }
            for j in 0..LANES {
                acc_us[t][j] += l_us[j];
                acc_uac[t][j] += l_uac[j];
                acc_uc[t][j] += l_uc[j];
            }
        }
    }
    let dc: Vec<f64> = acc_us.iter().map(|l| l.iter().sum()).collect();
    let dw: Vec<f64> =
        (0..tau).map(|t| amp[t] * acc_uac[t].iter().sum::<f64>()).collect();
    let dphi: Vec<f64> =
        (0..tau).map(|t| amp[t] * acc_uc[t].iter().sum::<f64>()).collect();
    (dc, dw, dphi)
}

/// Plain-sine forward: `out[i] = sin(ω a[i])`.
pub fn sine_forward_slice(a: &[f64], out: &mut [f64], omega: f64) {
    assert_eq!(a.len(), out.len());
    for (ab, ob) in a.chunks(BLOCK).zip(out.chunks_mut(BLOCK)) {
        let ok = ab.iter().fold(true, |acc, &x| acc & in_range(omega * x));
        if ok {
            for (o, &x) in ob.iter_mut().zip(ab) {
                *o = core_sincos(omega * x).0;
            }
        } else {
            for (o, &x) in ob.iter_mut().zip(ab) {
                let angle = omega * x;
                *o = if in_range(angle) { core_sincos(angle).0 } else { angle.sin() };
            }
        }
    }
}

/// Plain-sine backward: `da[i] = upstream[i] · ω cos(ω a[i])`.
pub fn sine_backward_slice(a: &[f64], upstream: &[f64], da: &mut [f64], omega: f64) {
    assert_eq!(a.len(), upstream.len());
    assert_eq!(a.len(), da.len());
    for ((ab, ub), db) in
        a.chunks(BLOCK).zip(upstream.chunks(BLOCK)).zip(da.chunks_mut(BLOCK))
    {
        let ok = ab.iter().fold(true, |acc, &x| acc & in_range(omega * x));
        if ok {
            for ((&x, &u), d) in ab.iter().zip(ub).zip(db.iter_mut()) {
                *d = u * omega * core_sincos(omega * x).1;
            }
        } else {
            for ((&x, &u), d) in ab.iter().zip(ub).zip(db.iter_mut()) {
                let angle = omega * x;
                let c = if in_range(angle) { core_sincos(angle).1 } else { angle.cos() };
                *d = u * omega * c;
            }
        }
    }
}
