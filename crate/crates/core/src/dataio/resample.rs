//! Band-limited rate conversion with a Hann-windowed sinc kernel.

/// Resample `input` from `in_rate` to `out_rate`.
///
/// When downsampling, the kernel is stretched by the rate ratio so its
/// cutoff sits below the output Nyquist (anti-aliasing). Kernel weights are
/// renormalized per output sample, which keeps DC gain at exactly 1 at the
/// signal edges.
pub fn resample(input: &[f64], in_rate: u32, out_rate: u32) -> Vec<f64> {
    if in_rate == out_rate || input.is_empty() {
        return input.to_vec();
    }
    let ratio = out_rate as f64 / in_rate as f64;
    let out_len = ((input.len() as u64 * out_rate as u64) / in_rate as u64) as usize;
    let out_len = out_len.max(1);

    // cutoff relative to the input Nyquist
    let scale = ratio.min(1.0) * 0.95;
    let half_width = (16.0 / scale).ceil();

    let mut out = Vec::with_capacity(out_len);
    for i in 0..out_len {
        let center = i as f64 / ratio;
        let lo = (center - half_width).ceil().max(0.0) as usize;
        let hi = ((center + half_width).floor() as usize).min(input.len() - 1);
        let mut acc = 0.0;
        let mut wsum = 0.0;
        for (j, &x) in input.iter().enumerate().take(hi + 1).skip(lo) {
            let d = j as f64 - center;
            let w = windowed_sinc(d, scale, half_width);
            acc += w * x;
            wsum += w;
        }
        out.push(if wsum.abs() > 1e-30 { acc / wsum } else { 0.0 });
    }
    out
}

fn windowed_sinc(d: f64, scale: f64, half_width: f64) -> f64 {
    let t = d / half_width;
    if t.abs() >= 1.0 {
        return 0.0;
    }
    let window = 0.5 + 0.5 * (std::f64::consts::PI * t).cos();
    scale * sinc(scale * d) * window
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}
