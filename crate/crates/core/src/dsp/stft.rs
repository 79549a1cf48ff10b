//! STFT analysis and weighted overlap-add inversion.

use ndarray::Array2;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::{ComplexSpectrogram, DspConfig, DspError, Waveform, WindowKind};

pub(crate) fn window_values(kind: WindowKind, size: usize) -> Vec<f64> {
    match kind {
        // Periodic Hann: exact COLA for hop = size/4.
        WindowKind::Hann => (0..size)
            .map(|n| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / size as f64).cos()))
            .collect(),
        WindowKind::Rectangular => vec![1.0; size],
    }
}

pub(crate) fn n_frames(len: usize, cfg: &DspConfig) -> Result<usize, DspError> {
    if len < cfg.window_size {
        return Err(DspError::UtteranceTooShort { len, window: cfg.window_size });
    }
    Ok(1 + (len - cfg.window_size) / cfg.hop_size)
}

/// Windowed-frame DFT of `w`. Frame `t` covers samples
/// `[t*hop, t*hop + window_size)`; frames are zero-padded to `fft_size` and
/// only the one-sided spectrum is kept.
pub fn stft(w: &Waveform, cfg: &DspConfig) -> Result<ComplexSpectrogram, DspError> {
    cfg.validate()?;
    let frames = n_frames(w.samples.len(), cfg)?;
    let bins = cfg.n_bins();
    let window = window_values(cfg.window, cfg.window_size);

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(cfg.fft_size);

    let mut magnitude = Array2::zeros((frames, bins));
    let mut phase = Array2::zeros((frames, bins));
    let mut buf = vec![Complex64::default(); cfg.fft_size];

    for t in 0..frames {
        let start = t * cfg.hop_size;
        for (n, slot) in buf.iter_mut().enumerate() {
            let sample = if n < cfg.window_size {
                w.samples[start + n] * window[n]
            } else {
                0.0
            };
            *slot = Complex64::new(sample, 0.0);
        }
        fft.process(&mut buf);
        for k in 0..bins {
            magnitude[[t, k]] = buf[k].norm();
            phase[[t, k]] = buf[k].arg();
        }
    }
    ComplexSpectrogram::new(magnitude, phase)
}

/// Least-squares weighted overlap-add inverse of [`stft`].
///
/// Each frame spectrum is Hermitian-extended, inverse-transformed, windowed
/// again and accumulated; the result is normalized by the summed squared
/// window. For a COLA window/hop pair this reproduces the input exactly on
/// the fully-overlapped interior.
pub fn istft(s: &ComplexSpectrogram, cfg: &DspConfig) -> Result<Waveform, DspError> {
    cfg.validate()?;
    let bins = cfg.n_bins();
    if s.magnitude.ncols() != bins {
        return Err(DspError::ShapeMismatch {
            expected: format!("{} spectrum bins", bins),
            got: format!("{}", s.magnitude.ncols()),
        });
    }
    let frames = s.n_frames();
    let window = window_values(cfg.window, cfg.window_size);
    let out_len = if frames == 0 {
        0
    } else {
        (frames - 1) * cfg.hop_size + cfg.window_size
    };

    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(cfg.fft_size);

    let mut acc = vec![0.0f64; out_len];
    let mut norm = vec![0.0f64; out_len];
    let mut buf = vec![Complex64::default(); cfg.fft_size];

    for t in 0..frames {
        for k in 0..bins {
            buf[k] = Complex64::from_polar(s.magnitude[[t, k]], s.phase[[t, k]]);
        }
        for k in bins..cfg.fft_size {
            buf[k] = buf[cfg.fft_size - k].conj();
        }
        ifft.process(&mut buf);
        let start = t * cfg.hop_size;
        let scale = 1.0 / cfg.fft_size as f64;
        for n in 0..cfg.window_size {
            // Real part projects onto real signals; bins 0 and N/2 may carry
            // arbitrary phase during Griffin-Lim iterations.
            acc[start + n] += buf[n].re * scale * window[n];
            norm[start + n] += window[n] * window[n];
        }
    }

    let samples = acc
        .iter()
        .zip(norm.iter())
        .map(|(&a, &n)| if n > 1e-12 { a / n } else { 0.0 })
        .collect();
    // The spectrogram carries no sample rate; callers that care overwrite it.
    Waveform::new(samples, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;
    use rand::Rng;

    fn cfg_small() -> DspConfig {
        DspConfig {
            fft_size: 64,
            window_size: 64,
            hop_size: 16,
            ..DspConfig::default()
        }
    }

    /// Direct O(N^2) DFT magnitude of one windowed frame.
    fn dft_frame_magnitude(frame: &[f64], fft_size: usize) -> Vec<f64> {
        let bins = fft_size / 2 + 1;
        (0..bins)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (n, &x) in frame.iter().enumerate() {
                    let ang = -2.0 * std::f64::consts::PI * (k * n) as f64 / fft_size as f64;
                    re += x * ang.cos();
                    im += x * ang.sin();
                }
                (re * re + im * im).sqrt()
            })
            .collect()
    }

    #[test]
    fn zero_waveform_gives_zero_magnitude() {
        let w = Waveform::new(vec![0.0; 1000], 16000).unwrap();
        let s = stft(&w, &cfg_small()).unwrap();
        assert!(s.magnitude.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn impulse_with_rectangular_window_is_flat() {
        let mut samples = vec![0.0; 16];
        samples[0] = 1.0;
        let w = Waveform::new(samples, 16000).unwrap();
        let cfg = DspConfig {
            fft_size: 16,
            window_size: 16,
            hop_size: 16,
            window: WindowKind::Rectangular,
            ..DspConfig::default()
        };
        let s = stft(&w, &cfg).unwrap();
        assert_eq!(s.n_frames(), 1);
        for &m in s.magnitude.row(0) {
            assert!((m - 1.0).abs() < 1e-12, "bin magnitude {m}");
        }
    }

    #[test]
    fn sine_440hz_peaks_at_bin_28() {
        let sr = 16000u32;
        let samples: Vec<f64> = (0..8000)
            .map(|n| (2.0 * std::f64::consts::PI * 440.0 * n as f64 / sr as f64).sin())
            .collect();
        let w = Waveform::new(samples, sr).unwrap();
        let cfg = DspConfig::default(); // fft 1024, window 800, hop 200
        let s = stft(&w, &cfg).unwrap();

        // Independent oracle: direct DFT of the first windowed frame.
        let window = window_values(cfg.window, cfg.window_size);
        let frame: Vec<f64> = (0..cfg.window_size).map(|n| w.samples[n] * window[n]).collect();
        let oracle = dft_frame_magnitude(&frame, cfg.fft_size);
        let oracle_argmax = oracle
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(oracle_argmax, 28); // round(440 * 1024 / 16000)

        for t in 0..s.n_frames() {
            let row = s.magnitude.row(t);
            let argmax = row.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
            assert_eq!(argmax, 28, "frame {t}");
        }
    }

    #[test]
    fn too_short_input_errors() {
        let w = Waveform::new(vec![0.0; 10], 16000).unwrap();
        let err = stft(&w, &cfg_small()).unwrap_err();
        assert!(err.to_string().contains("utterance too short"));
    }

    #[test]
    fn frame_count_formula() {
        let cfg = cfg_small();
        let w = Waveform::new(vec![0.1; 200], 16000).unwrap();
        let s = stft(&w, &cfg).unwrap();
        assert_eq!(s.n_frames(), 1 + (200 - 64) / 16);
    }

    #[test]
    fn zero_spectrogram_inverts_to_zero() {
        let cfg = cfg_small();
        let s = ComplexSpectrogram::new(Array2::zeros((5, 33)), Array2::zeros((5, 33))).unwrap();
        let w = istft(&s, &cfg).unwrap();
        assert!(w.samples.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn istft_shape_mismatch_errors() {
        let cfg = cfg_small();
        let s = ComplexSpectrogram::new(Array2::zeros((5, 20)), Array2::zeros((5, 20))).unwrap();
        assert!(istft(&s, &cfg).is_err());
    }

    #[test]
    fn cola_round_trip_hann_quarter_hop() {
        let mut rng = derive_rng(11, "stft-roundtrip");
        let samples: Vec<f64> = (0..2000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w = Waveform::new(samples, 16000).unwrap();
        let cfg = cfg_small();
        let s = stft(&w, &cfg).unwrap();
        let r = istft(&s, &cfg).unwrap();

        let lo = cfg.window_size;
        let hi = r.samples.len() - cfg.window_size;
        let mut max_err = 0.0f64;
        for i in lo..hi {
            max_err = max_err.max((r.samples[i] - w.samples[i]).abs());
        }
        assert!(max_err < 1e-6, "interior max abs error {max_err}");
    }

    #[test]
    fn white_noise_round_trip_relative_l2() {
        // Independent oracle: the identity. Interior relative L2 must vanish.
        let mut rng = derive_rng(3, "stft-noise");
        let samples: Vec<f64> = (0..4000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w = Waveform::new(samples, 16000).unwrap();
        let cfg = DspConfig {
            fft_size: 256,
            window_size: 256,
            hop_size: 64,
            ..DspConfig::default()
        };
        let s = stft(&w, &cfg).unwrap();
        let r = istft(&s, &cfg).unwrap();
        let lo = cfg.window_size;
        let hi = r.samples.len() - cfg.window_size;
        let (mut num, mut den) = (0.0f64, 0.0f64);
        for i in lo..hi {
            num += (r.samples[i] - w.samples[i]).powi(2);
            den += w.samples[i].powi(2);
        }
        assert!((num / den).sqrt() < 1e-6);
    }

    #[test]
    fn parseval_per_frame() {
        let mut rng = derive_rng(5, "stft-parseval");
        let samples: Vec<f64> = (0..1000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w = Waveform::new(samples, 16000).unwrap();
        let cfg = cfg_small();
        let s = stft(&w, &cfg).unwrap();
        let window = window_values(cfg.window, cfg.window_size);

        for t in 0..s.n_frames() {
            let mut spec_energy = 0.0;
            for k in 0..cfg.n_bins() {
                let m2 = s.magnitude[[t, k]].powi(2);
                let weight = if k == 0 || k == cfg.fft_size / 2 { 1.0 } else { 2.0 };
                spec_energy += weight * m2;
            }
            let start = t * cfg.hop_size;
            let time_energy: f64 = (0..cfg.window_size)
                .map(|n| (w.samples[start + n] * window[n]).powi(2))
                .sum();
            let rel = (spec_energy / cfg.fft_size as f64 - time_energy).abs()
                / time_energy.max(1e-30);
            assert!(rel < 1e-6, "frame {t}: relative energy error {rel}");
        }
    }
}
