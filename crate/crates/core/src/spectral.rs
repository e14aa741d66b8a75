//! Multichannel STFT and frame phase alignment.
//!
//! Frame `i`, bin `ω` is `Σ_{t<T} w(t) p(t + iD) e^{−j2πωt/T}` with no
//! padding and no normalization. Only bins `0..=T/2` are stored; the rest
//! follow from conjugate symmetry of real input.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::linalg::CVector;
use crate::{Error, Result};

/// Analysis window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Rectangular,
    /// Symmetric Hamming, `0.54 − 0.46 cos(2πt/(T−1))`.
    Hamming,
    /// Symmetric Hann, `0.5 − 0.5 cos(2πt/(T−1))`.
    Hann,
}

impl Window {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        let denom = (len.max(2) - 1) as f64;
        (0..len)
            .map(|t| {
                let c = libm::cos(2.0 * PI * t as f64 / denom);
                match self {
                    Window::Rectangular => 1.0,
                    Window::Hamming => 0.54 - 0.46 * c,
                    Window::Hann => 0.5 - 0.5 * c,
                }
            })
            .collect()
    }
}

/// Frame length `T`, hop `D`, window and sample rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StftParams {
    pub frame_len: usize,
    pub hop: usize,
    pub window: Window,
    pub fs: f64,
}

impl StftParams {
    pub fn new(frame_len: usize, hop: usize, window: Window, fs: f64) -> Result<Self> {
        if frame_len == 0 || hop == 0 || hop > frame_len {
            return Err(Error::InvalidParameter(alloc::format!(
                "need 0 < hop ≤ frame length, got hop {hop} and frame length {frame_len}"
            )));
        }
        if !(fs > 0.0) || !fs.is_finite() {
            return Err(Error::InvalidParameter(alloc::format!(
                "sample rate must be positive, got {fs}"
            )));
        }
        Ok(Self {
            frame_len,
            hop,
            window,
            fs,
        })
    }

    /// Frames per second.
    pub fn frame_rate(&self) -> f64 {
        self.fs / self.hop as f64
    }

    /// Frame duration in seconds.
    pub fn frame_duration(&self) -> f64 {
        self.frame_len as f64 / self.fs
    }

    /// Centre time of frame `i` in seconds, `(T/2 + iD)/fs`.
    pub fn frame_center_time(&self, i: usize) -> f64 {
        (self.frame_len as f64 / 2.0 + (i * self.hop) as f64) / self.fs
    }

    /// Number of stored bins, `T/2 + 1`.
    pub fn stored_bins(&self) -> usize {
        self.frame_len / 2 + 1
    }

    /// Centre frequency of bin `ω` in Hz.
    pub fn bin_frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.fs / self.frame_len as f64
    }

    /// Stored bin whose centre is closest to `freq_hz` (lower bin on ties).
    pub fn nearest_bin(&self, freq_hz: f64) -> usize {
        let b = libm::round(freq_hz * self.frame_len as f64 / self.fs);
        (b.max(0.0) as usize).min(self.stored_bins() - 1)
    }

    /// Stored bins with centre frequency in `[lo, hi]` Hz.
    pub fn bins_in_range(&self, lo: f64, hi: f64) -> Vec<usize> {
        (0..self.stored_bins())
            .filter(|&b| {
                let f = self.bin_frequency(b);
                f >= lo && f <= hi
            })
            .collect()
    }

    /// `⌊(L − T)/D⌋ + 1`, or 0 when `L < T`.
    pub fn frame_count(&self, len: usize) -> usize {
        if len < self.frame_len {
            0
        } else {
            (len - self.frame_len) / self.hop + 1
        }
    }

    /// Samples needed for `frames` frames.
    pub fn samples_for_frames(&self, frames: usize) -> usize {
        if frames == 0 {
            0
        } else {
            self.frame_len + (frames - 1) * self.hop
        }
    }
}

/// STFT frames of a multichannel signal, stored `[frame][mic][bin]` for
/// bins `0..=T/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct StftFrames {
    params: StftParams,
    mics: usize,
    frames: usize,
    data: Vec<Complex64>,
}

impl StftFrames {
    pub fn params(&self) -> &StftParams {
        &self.params
    }

    pub fn mic_count(&self) -> usize {
        self.mics
    }

    pub fn frame_count(&self) -> usize {
        self.frames
    }

    /// Total bin count `T`.
    pub fn bin_count(&self) -> usize {
        self.params.frame_len
    }

    fn offset(&self, frame: usize, mic: usize) -> usize {
        (frame * self.mics + mic) * self.params.stored_bins()
    }

    /// All-zero frames, e.g. for filling from an external source.
    pub fn zeros(params: StftParams, mics: usize, frames: usize) -> Self {
        Self {
            params,
            mics,
            frames,
            data: vec![Complex64::new(0.0, 0.0); frames * mics * params.stored_bins()],
        }
    }

    /// Sets one value; bins above `T/2` store the conjugate at `T − bin`.
    pub fn set(&mut self, frame: usize, mic: usize, bin: usize, value: Complex64) {
        let t = self.params.frame_len;
        let b = bin % t;
        let o = self.offset(frame, mic);
        if b < self.params.stored_bins() {
            self.data[o + b] = value;
        } else {
            self.data[o + t - b] = value.conj();
        }
    }

    /// Value at any bin `0..T`; bins above `T/2` are conjugates.
    pub fn get(&self, frame: usize, mic: usize, bin: usize) -> Complex64 {
        let t = self.params.frame_len;
        let stored = self.params.stored_bins();
        let b = bin % t;
        if b < stored {
            self.data[self.offset(frame, mic) + b]
        } else {
            self.data[self.offset(frame, mic) + (t - b)].conj()
        }
    }

    /// Stored bins of one frame and microphone.
    pub fn spectrum(&self, frame: usize, mic: usize) -> &[Complex64] {
        let o = self.offset(frame, mic);
        &self.data[o..o + self.params.stored_bins()]
    }

    /// Pressure vector `p(i, ω)` across microphones.
    pub fn snapshot(&self, frame: usize, bin: usize) -> CVector {
        CVector::from_iterator(self.mics, (0..self.mics).map(|m| self.get(frame, m, bin)))
    }

    /// Keeps frames `start..start + count`.
    pub fn slice(&self, start: usize, count: usize) -> Result<Self> {
        if start + count > self.frames {
            return Err(Error::InsufficientData(alloc::format!(
                "frames {start}..{} requested from {}",
                start + count,
                self.frames
            )));
        }
        let per = self.mics * self.params.stored_bins();
        Ok(Self {
            params: self.params,
            mics: self.mics,
            frames: count,
            data: self.data[start * per..(start + count) * per].to_vec(),
        })
    }
}

/// STFT of every channel.
pub fn stft(signals: &[Vec<f64>], params: &StftParams) -> Result<StftFrames> {
    let mics = signals.len();
    if mics == 0 {
        return Err(Error::InsufficientData("no channels".into()));
    }
    let len = signals[0].len();
    if signals.iter().any(|s| s.len() != len) {
        return Err(Error::InvalidParameter("channels differ in length".into()));
    }
    let frames = params.frame_count(len);
    if frames == 0 {
        return Err(Error::InsufficientData(alloc::format!(
            "signal of {len} samples is shorter than one {}-sample frame",
            params.frame_len
        )));
    }
    let t = params.frame_len;
    let stored = params.stored_bins();
    let w = params.window.coefficients(t);
    let mut data = vec![Complex64::new(0.0, 0.0); frames * mics * stored];
    let mut engine = Dft::new(t);
    let mut buf = vec![Complex64::new(0.0, 0.0); t];
    for i in 0..frames {
        for (m, sig) in signals.iter().enumerate() {
            let seg = &sig[i * params.hop..i * params.hop + t];
            for (b, (&x, &wt)) in buf.iter_mut().zip(seg.iter().zip(w.iter())) {
                *b = Complex64::new(x * wt, 0.0);
            }
            engine.forward(&mut buf);
            let o = (i * mics + m) * stored;
            data[o..o + stored].copy_from_slice(&buf[..stored]);
        }
    }
    Ok(StftFrames {
        params: *params,
        mics,
        frames,
        data,
    })
}

/// Multiplies frame `i` by `e^{−j2πDω(i − reference)/T}` at every bin.
pub fn time_align(frames: &StftFrames, reference: usize) -> Result<StftFrames> {
    rotate_phases(frames, reference, -1.0)
}

/// Inverse of [`time_align`] for the same reference frame.
pub fn time_unalign(frames: &StftFrames, reference: usize) -> Result<StftFrames> {
    rotate_phases(frames, reference, 1.0)
}

fn rotate_phases(frames: &StftFrames, reference: usize, sign: f64) -> Result<StftFrames> {
    if reference >= frames.frames {
        return Err(Error::InvalidParameter(alloc::format!(
            "reference frame {reference} outside {} frames",
            frames.frames
        )));
    }
    let mut out = frames.clone();
    let t = frames.params.frame_len as f64;
    let d = frames.params.hop as f64;
    let stored = frames.params.stored_bins();
    for i in 0..frames.frames {
        let lag = i as f64 - reference as f64;
        for m in 0..frames.mics {
            let o = out.offset(i, m);
            for b in 0..stored {
                let phase = sign * 2.0 * PI * d * b as f64 * lag / t;
                out.data[o + b] *= Complex64::from_polar(1.0, phase);
            }
        }
    }
    Ok(out)
}

/// Linear convolution `y[t] = Σ_τ h[τ] x[t − τ]` for `t < x.len()`, with
/// `x` zero before the first sample, computed block-wise by overlap-save.
pub fn overlap_save(x: &[f64], h: &[f64]) -> Vec<f64> {
    if x.is_empty() || h.is_empty() {
        return vec![0.0; x.len()];
    }
    let taps = h.len();
    let n = (2 * taps).next_power_of_two().max(64);
    let step = n - (taps - 1);
    let mut engine = Dft::new(n);
    let mut hf: Vec<Complex64> = (0..n)
        .map(|t| Complex64::new(h.get(t).copied().unwrap_or(0.0), 0.0))
        .collect();
    engine.forward(&mut hf);
    let scale = 1.0 / n as f64;
    let mut y = vec![0.0; x.len()];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut start = 0;
    while start < x.len() {
        for (j, b) in buf.iter_mut().enumerate() {
            let idx = (start + j) as isize - (taps as isize - 1);
            let v = if idx >= 0 { x.get(idx as usize).copied().unwrap_or(0.0) } else { 0.0 };
            *b = Complex64::new(v, 0.0);
        }
        engine.forward(&mut buf);
        for (b, &g) in buf.iter_mut().zip(hf.iter()) {
            *b = (*b * g).conj();
        }
        engine.forward(&mut buf);
        let end = (start + step).min(x.len());
        for (t, out) in y[start..end].iter_mut().enumerate() {
            *out = buf[taps - 1 + t].re * scale;
        }
        start = end;
    }
    y
}

#[cfg(feature = "std")]
struct Dft {
    fft: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

#[cfg(feature = "std")]
impl Dft {
    fn new(len: usize) -> Self {
        Self {
            fft: rustfft::FftPlanner::new().plan_fft_forward(len),
        }
    }

    fn forward(&mut self, buf: &mut [Complex64]) {
        self.fft.process(buf);
    }
}

#[cfg(not(feature = "std"))]
struct Dft {
    twiddle: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

#[cfg(not(feature = "std"))]
impl Dft {
    fn new(len: usize) -> Self {
        Self {
            twiddle: (0..len)
                .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / len as f64))
                .collect(),
            scratch: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    fn forward(&mut self, buf: &mut [Complex64]) {
        direct_dft(buf, &self.twiddle, &mut self.scratch);
    }
}

#[cfg(any(test, not(feature = "std")))]
fn direct_dft(buf: &mut [Complex64], twiddle: &[Complex64], scratch: &mut [Complex64]) {
    let n = buf.len();
    for (k, out) in scratch.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (t, &x) in buf.iter().enumerate() {
            acc += x * twiddle[(k * t) % n];
        }
        *out = acc;
    }
    buf.copy_from_slice(scratch);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(window: Window) -> StftParams {
        StftParams::new(256, 128, window, 10_000.0).unwrap()
    }

    #[test]
    fn overlap_save_matches_direct() {
        let x: Vec<f64> = (0..700).map(|t| libm::sin(0.37 * t as f64) + 0.01 * t as f64).collect();
        let h: Vec<f64> = (0..37).map(|t| libm::cos(0.2 * t as f64) / (1.0 + t as f64)).collect();
        let y = overlap_save(&x, &h);
        for t in [0usize, 5, 36, 37, 200, 699] {
            let want: f64 = (0..h.len()).filter(|&k| k <= t).map(|k| h[k] * x[t - k]).sum();
            assert!((y[t] - want).abs() < 1e-10, "{t}");
        }
    }

    #[test]
    fn constant_signal_is_dc_only() {
        let p = params(Window::Rectangular);
        let f = stft(&[vec![1.0; 1024]], &p).unwrap();
        assert_eq!(f.frame_count(), 7);
        for i in 0..f.frame_count() {
            assert!((f.get(i, 0, 0) - Complex64::new(256.0, 0.0)).norm() < 1e-9);
            for b in 1..256 {
                assert!(f.get(i, 0, b).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn bin_centred_tone_is_one_bin_pair() {
        let p = params(Window::Rectangular);
        let w0 = 37;
        let x: Vec<f64> = (0..512)
            .map(|t| libm::cos(2.0 * PI * w0 as f64 * t as f64 / 256.0))
            .collect();
        let f = stft(&[x], &p).unwrap();
        for b in 0..256 {
            let v = f.get(0, 0, b).norm();
            if b == w0 || b == 256 - w0 {
                assert!((v - 128.0).abs() < 1e-9);
            } else {
                assert!(v < 1e-9, "bin {b}: {v}");
            }
        }
    }

    #[test]
    fn frame_timing() {
        let p = params(Window::Hamming);
        assert_eq!(p.frame_rate(), 78.125);
        assert!((60.0 / p.frame_rate() - 0.768).abs() < 1e-12);
        assert_eq!(p.frame_duration(), 0.0256);
        assert_eq!(p.frame_center_time(2), (128.0 + 256.0) / 10_000.0);
        assert_eq!(p.frame_count(255), 0);
        assert_eq!(p.frame_count(256 + 59 * 128), 60);
        assert_eq!(p.samples_for_frames(60), 256 + 59 * 128);
        assert_eq!(p.nearest_bin(3100.0), 79);
        let band = p.bins_in_range(1800.0, 2700.0);
        assert_eq!(band.first(), Some(&47));
        assert_eq!(band.last(), Some(&69));
    }

    #[test]
    fn short_signal_is_rejected() {
        let p = params(Window::Hamming);
        assert!(matches!(stft(&[vec![0.0; 100]], &p), Err(Error::InsufficientData(_))));
        assert!(StftParams::new(256, 300, Window::Hamming, 1e4).is_err());
    }

    #[test]
    fn parseval_rectangular() {
        let p = StftParams::new(64, 16, Window::Rectangular, 1000.0).unwrap();
        let x: Vec<f64> = (0..400).map(|t| libm::sin(0.37 * t as f64) + 0.1 * (t % 7) as f64).collect();
        let f = stft(core::slice::from_ref(&x), &p).unwrap();
        for i in 0..f.frame_count() {
            let spec: f64 = (0..64).map(|b| f.get(i, 0, b).norm_sqr()).sum();
            let time: f64 = x[i * 16..i * 16 + 64].iter().map(|v| v * v).sum();
            assert!((spec - 64.0 * time).abs() / spec < 1e-9);
        }
    }

    #[test]
    fn alignment_contract() {
        let p = params(Window::Hamming);
        let w0 = 79;
        let x: Vec<f64> = (0..256 + 20 * 128)
            .map(|t| libm::sin(2.0 * PI * w0 as f64 * t as f64 / 256.0 + 0.3))
            .collect();
        let f = stft(&[x], &p).unwrap();
        let a = time_align(&f, 0).unwrap();
        assert_eq!(a.spectrum(0, 0), f.spectrum(0, 0));
        let ref_phase = a.get(0, 0, w0).arg();
        for i in 1..a.frame_count() {
            let d = (a.get(i, 0, w0) / a.get(0, 0, w0)).arg();
            assert!(d.abs() < 1e-9, "frame {i}: {d} vs {ref_phase}");
        }
        let back = time_unalign(&time_align(&f, 5).unwrap(), 5).unwrap();
        for i in 0..f.frame_count() {
            for (u, v) in back.spectrum(i, 0).iter().zip(f.spectrum(i, 0)) {
                assert!((u - v).norm() < 1e-12 * (1.0 + v.norm()));
            }
        }
        assert!(time_align(&f, 99).is_err());
    }

    #[test]
    fn fft_matches_direct_dft() {
        let n = 32;
        let x: Vec<Complex64> = (0..n).map(|t| Complex64::new(libm::cos(t as f64 * 1.3), 0.2 * t as f64)).collect();
        let tw: Vec<Complex64> = (0..n)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
            .collect();
        let mut a = x.clone();
        let mut scratch = vec![Complex64::new(0.0, 0.0); n];
        direct_dft(&mut a, &tw, &mut scratch);
        let mut b = x;
        Dft::new(n).forward(&mut b);
        for (u, v) in a.iter().zip(b.iter()) {
            assert!((u - v).norm() < 1e-10);
        }
    }
}
