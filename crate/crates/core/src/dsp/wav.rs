//! RIFF/WAVE I/O: PCM 16-bit signed little-endian, mono.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::{DspError, Waveform};

/// Reads a mono 16-bit PCM wav; samples are normalized to [-1, 1) by
/// dividing by 32768.
pub fn read_wav(path: &Path) -> Result<Waveform, DspError> {
    let reader = WavReader::open(path)?;
    let spec = reader.spec();
    if spec.channels != 1 || spec.bits_per_sample != 16 || spec.sample_format != SampleFormat::Int {
        return Err(DspError::WavFormat {
            path: path.display().to_string(),
            detail: format!(
                "expected mono 16-bit PCM, got {} channel(s), {} bits, {:?}",
                spec.channels, spec.bits_per_sample, spec.sample_format
            ),
        });
    }
    let sample_rate = spec.sample_rate;
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| f64::from(v) / 32768.0))
        .collect::<Result<Vec<_>, _>>()?;
    Waveform::new(samples, sample_rate)
}

/// Writes a mono 16-bit PCM wav; samples are clamped to [-1, 1] and scaled
/// by 32767.
pub fn write_wav(path: &Path, w: &Waveform) -> Result<(), DspError> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: w.sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path, spec)?;
    for &x in &w.samples {
        let v = (x.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        writer.write_sample(v)?;
    }
    writer.finalize()?;
    Ok(())
}
