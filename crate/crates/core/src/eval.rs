//! Rhythm-transfer evaluation: speaking rates, per-phoneme duration
//! distributions (Gaussian KDE) and distribution distances.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::corpus::{AlignmentSegment, PhonemeInventory};
use crate::seqmodels::Posteriorgram;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty input")]
    EmptyInput,
    #[error("no speech content")]
    NoSpeech,
    #[error("bandwidth must be > 0, got {0}")]
    InvalidBandwidth(f64),
    #[error("profiles use different grids")]
    GridMismatch,
}

/// Syllable-proxy speaking rate: vowel-class segments per second of
/// non-silence speech.
pub fn speaking_rate(
    segments: &[AlignmentSegment],
    inventory: &PhonemeInventory,
) -> Result<f64, EvalError> {
    if segments.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let silence = inventory.silence();
    let mut nuclei = 0usize;
    let mut speech = 0.0f64;
    for s in segments {
        if Some(s.phoneme_id) == silence {
            continue;
        }
        speech += s.duration();
        if inventory.is_vowel(s.phoneme_id) {
            nuclei += 1;
        }
    }
    if speech <= 0.0 {
        return Err(EvalError::NoSpeech);
    }
    Ok(nuclei as f64 / speech)
}

/// Per-utterance rates with their mean and (population) standard deviation.
#[derive(Debug, Clone)]
pub struct SpeakingRateSummary {
    pub rates: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

pub fn speaking_rate_summary(
    utterances: &[Vec<AlignmentSegment>],
    inventory: &PhonemeInventory,
) -> Result<SpeakingRateSummary, EvalError> {
    if utterances.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let rates: Result<Vec<f64>, EvalError> =
        utterances.iter().map(|u| speaking_rate(u, inventory)).collect();
    let rates = rates?;
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    let var = rates.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / rates.len() as f64;
    Ok(SpeakingRateSummary { rates, mean, std: var.sqrt() })
}

/// Gaussian KDE evaluated on a grid:
/// `f(x) = (1/n) * sum_i phi((x - d_i)/h) / h`.
pub fn gaussian_kde(samples: &[f64], bandwidth: f64, grid: &[f64]) -> Vec<f64> {
    let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * bandwidth * samples.len() as f64);
    grid.iter()
        .map(|&x| {
            samples
                .iter()
                .map(|&d| {
                    let u = (x - d) / bandwidth;
                    (-0.5 * u * u).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect()
}

/// Per-phoneme duration densities over a shared grid.
#[derive(Debug, Clone)]
pub struct RhythmProfile {
    pub bandwidth: f64,
    pub grid: Vec<f64>,
    /// Phoneme id -> density values over `grid`.
    pub densities: BTreeMap<usize, Vec<f64>>,
    /// Phoneme id -> number of duration samples behind the density.
    pub counts: BTreeMap<usize, usize>,
}

/// Default evaluation grid: `points` values spanning `[0, max + 5h]`.
pub fn default_grid(segments: &[&[AlignmentSegment]], bandwidth: f64, points: usize) -> Vec<f64> {
    let max = segments
        .iter()
        .flat_map(|s| s.iter())
        .map(|s| s.duration())
        .fold(0.0f64, f64::max);
    let hi = max + 5.0 * bandwidth;
    (0..points).map(|i| hi * i as f64 / (points - 1) as f64).collect()
}

/// Builds per-phoneme KDE profiles on an explicit grid. Phonemes with zero
/// samples are simply absent from the maps.
pub fn rhythm_profile_on_grid(
    alignments: &[&[AlignmentSegment]],
    bandwidth: f64,
    grid: Vec<f64>,
) -> Result<RhythmProfile, EvalError> {
    if !(bandwidth > 0.0) {
        return Err(EvalError::InvalidBandwidth(bandwidth));
    }
    let mut durations: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for segs in alignments {
        for s in *segs {
            durations.entry(s.phoneme_id).or_default().push(s.duration());
        }
    }
    let mut densities = BTreeMap::new();
    let mut counts = BTreeMap::new();
    for (ph, ds) in &durations {
        densities.insert(*ph, gaussian_kde(ds, bandwidth, &grid));
        counts.insert(*ph, ds.len());
    }
    Ok(RhythmProfile { bandwidth, grid, densities, counts })
}

/// Profiles on the default `[0, max + 5h]` 512-point grid.
pub fn rhythm_profile(
    alignments: &[&[AlignmentSegment]],
    bandwidth: f64,
) -> Result<RhythmProfile, EvalError> {
    if !(bandwidth > 0.0) {
        return Err(EvalError::InvalidBandwidth(bandwidth));
    }
    let grid = default_grid(alignments, bandwidth, 512);
    rhythm_profile_on_grid(alignments, bandwidth, grid)
}

/// Trapezoidal integral over the profile grid.
pub fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    grid.windows(2)
        .zip(values.windows(2))
        .map(|(g, v)| 0.5 * (v[0] + v[1]) * (g[1] - g[0]))
        .sum()
}

/// Integrated L1 distance between the two profiles' densities, per phoneme
/// present in both; range [0, 2].
pub fn profile_distance(
    p: &RhythmProfile,
    q: &RhythmProfile,
) -> Result<BTreeMap<usize, f64>, EvalError> {
    if p.grid.len() != q.grid.len()
        || p.grid.iter().zip(q.grid.iter()).any(|(a, b)| (a - b).abs() > 1e-12)
    {
        return Err(EvalError::GridMismatch);
    }
    let mut out = BTreeMap::new();
    for (ph, pd) in &p.densities {
        if let Some(qd) = q.densities.get(ph) {
            let diff: Vec<f64> = pd.iter().zip(qd.iter()).map(|(a, b)| (a - b).abs()).collect();
            out.insert(*ph, trapezoid(&p.grid, &diff));
        }
    }
    Ok(out)
}

/// Converts argmax runs of a posteriorgram into alignment segments, each
/// run becoming one segment of `run length * hop` seconds.
pub fn converted_duration_extraction(
    p: &Posteriorgram,
    hop_seconds: f64,
) -> Vec<AlignmentSegment> {
    let labels = p.argmax_labels();
    let mut segments = Vec::new();
    let mut run_start = 0usize;
    for t in 1..=labels.len() {
        if t == labels.len() || labels[t] != labels[run_start] {
            segments.push(AlignmentSegment {
                phoneme_id: labels[run_start],
                start: run_start as f64 * hop_seconds,
                end: t as f64 * hop_seconds,
            });
            run_start = t;
        }
    }
    segments
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(ph: usize, start: f64, end: f64) -> AlignmentSegment {
        AlignmentSegment { phoneme_id: ph, start, end }
    }

    fn inv() -> PhonemeInventory {
        PhonemeInventory::cmu_stress()
    }

    #[test]
    fn twelve_vowels_in_three_seconds_is_four_per_second() {
        let inventory = inv();
        let vowel = inventory.index_of("AA1").unwrap();
        let segs: Vec<AlignmentSegment> =
            (0..12).map(|i| seg(vowel, i as f64 * 0.25, (i + 1) as f64 * 0.25)).collect();
        let r = speaking_rate(&segs, &inventory).unwrap();
        assert!((r - 4.0).abs() < 1e-12);
    }

    #[test]
    fn all_silence_is_an_error() {
        let inventory = inv();
        let sil = inventory.silence().unwrap();
        let segs = vec![seg(sil, 0.0, 1.0)];
        assert!(matches!(speaking_rate(&segs, &inventory), Err(EvalError::NoSpeech)));
        assert!(matches!(speaking_rate(&[], &inventory), Err(EvalError::EmptyInput)));
    }

    #[test]
    fn silence_excluded_from_speech_duration() {
        let inventory = inv();
        let vowel = inventory.index_of("IY1").unwrap();
        let sil = inventory.silence().unwrap();
        let segs = vec![seg(vowel, 0.0, 0.5), seg(sil, 0.5, 1.5), seg(vowel, 1.5, 2.0)];
        // 2 nuclei / 1.0 s speech
        assert!((speaking_rate(&segs, &inventory).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn stretching_times_divides_rate_exactly() {
        let inventory = inv();
        let vowel = inventory.index_of("EH1").unwrap();
        let n = inventory.index_of("N").unwrap();
        let base = vec![seg(vowel, 0.0, 0.1), seg(n, 0.1, 0.18), seg(vowel, 0.18, 0.31)];
        let k = 2.5;
        let stretched: Vec<AlignmentSegment> =
            base.iter().map(|s| seg(s.phoneme_id, s.start * k, s.end * k)).collect();
        let r1 = speaking_rate(&base, &inventory).unwrap();
        let r2 = speaking_rate(&stretched, &inventory).unwrap();
        assert!((r1 / k - r2).abs() < 1e-12);
    }

    #[test]
    fn single_sample_kde_peak_value() {
        let h = 0.125;
        let v = gaussian_kde(&[0.1], h, &[0.1]);
        let expected = 1.0 / (h * (2.0 * std::f64::consts::PI).sqrt());
        assert!((v[0] - expected).abs() < 1e-9);
        assert!((v[0] - 3.1915).abs() < 1e-4);
    }

    #[test]
    fn kde_integrates_to_one_over_wide_grid() {
        let h = 0.125;
        let samples = [0.05, 0.08, 0.2, 0.5];
        let (lo, hi) = (0.05 - 5.0 * h, 0.5 + 5.0 * h);
        let grid: Vec<f64> = (0..2000).map(|i| lo + (hi - lo) * i as f64 / 1999.0).collect();
        let density = gaussian_kde(&samples, h, &grid);
        let integral = trapezoid(&grid, &density);
        assert!((integral - 1.0).abs() < 0.01, "integral {integral}");
    }

    #[test]
    fn two_sample_kde_matches_bruteforce_pointwise() {
        let h = 0.07;
        let samples = [0.11, 0.34];
        let grid: Vec<f64> = (0..100).map(|i| i as f64 * 0.01).collect();
        let got = gaussian_kde(&samples, h, &grid);
        for (i, &x) in grid.iter().enumerate() {
            let mut oracle = 0.0;
            for &d in &samples {
                let u: f64 = (x - d) / h;
                oracle += (-0.5 * u * u).exp() / ((2.0 * std::f64::consts::PI).sqrt() * h);
            }
            oracle /= samples.len() as f64;
            assert!((got[i] - oracle).abs() < 1e-9, "grid point {i}");
        }
    }

    #[test]
    fn kde_union_is_weighted_average_of_parts() {
        let h = 0.1;
        let a = [0.1, 0.2, 0.3];
        let b = [0.5, 0.6];
        let union: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
        let grid: Vec<f64> = (0..64).map(|i| i as f64 * 0.02).collect();
        let fa = gaussian_kde(&a, h, &grid);
        let fb = gaussian_kde(&b, h, &grid);
        let fu = gaussian_kde(&union, h, &grid);
        let (wa, wb) = (a.len() as f64 / union.len() as f64, b.len() as f64 / union.len() as f64);
        for i in 0..grid.len() {
            assert!((fu[i] - (wa * fa[i] + wb * fb[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn identical_profiles_have_zero_distance() {
        let segs = vec![seg(3, 0.0, 0.1), seg(3, 0.1, 0.25), seg(4, 0.25, 0.3)];
        let p = rhythm_profile(&[&segs], 0.125).unwrap();
        let d = profile_distance(&p, &p).unwrap();
        assert!(d.values().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn disjoint_supports_approach_two() {
        let h = 0.05;
        let near = vec![seg(1, 0.0, 0.1)];
        let far = vec![seg(1, 0.0, 0.1 + 10.0 * h)]; // means 10h apart
        let grid: Vec<f64> = (0..4000).map(|i| -1.0 + i as f64 * 0.001).collect();
        let p = rhythm_profile_on_grid(&[&near], h, grid.clone()).unwrap();
        let q = rhythm_profile_on_grid(&[&far], h, grid).unwrap();
        let d = profile_distance(&p, &q).unwrap();
        assert!((d[&1] - 2.0).abs() < 0.01, "distance {}", d[&1]);
    }

    #[test]
    fn coarse_grid_distance_close_to_fine_grid_oracle() {
        let h = 0.125;
        let a = vec![seg(2, 0.0, 0.06), seg(2, 0.06, 0.13), seg(2, 0.13, 0.19)];
        let b = vec![seg(2, 0.0, 0.12), seg(2, 0.12, 0.25), seg(2, 0.25, 0.38)];
        let span = 0.38 + 5.0 * h;
        let coarse: Vec<f64> = (0..100).map(|i| span * i as f64 / 99.0).collect();
        let fine: Vec<f64> = (0..10000).map(|i| span * i as f64 / 9999.0).collect();
        let dist = |grid: Vec<f64>| {
            let p = rhythm_profile_on_grid(&[&a], h, grid.clone()).unwrap();
            let q = rhythm_profile_on_grid(&[&b], h, grid).unwrap();
            profile_distance(&p, &q).unwrap()[&2]
        };
        let (dc, df) = (dist(coarse), dist(fine));
        assert!((dc - df).abs() < 0.01, "coarse {dc} vs fine {df}");
    }

    #[test]
    fn grid_mismatch_rejected() {
        let segs = vec![seg(1, 0.0, 0.1)];
        let p = rhythm_profile_on_grid(&[&segs], 0.1, vec![0.0, 0.1, 0.2]).unwrap();
        let q = rhythm_profile_on_grid(&[&segs], 0.1, vec![0.0, 0.1, 0.3]).unwrap();
        assert!(matches!(profile_distance(&p, &q), Err(EvalError::GridMismatch)));
    }

    #[test]
    fn distance_is_symmetric_and_triangular() {
        let h = 0.1;
        let grid: Vec<f64> = (0..256).map(|i| i as f64 * 0.005).collect();
        let mk = |durs: &[f64]| {
            let segs: Vec<AlignmentSegment> = durs
                .iter()
                .scan(0.0, |acc, &d| {
                    let s = seg(7, *acc, *acc + d);
                    *acc += d;
                    Some(s)
                })
                .collect();
            rhythm_profile_on_grid(&[&segs[..]], h, grid.clone()).unwrap()
        };
        let p = mk(&[0.05, 0.07, 0.06]);
        let q = mk(&[0.12, 0.10]);
        let r = mk(&[0.08, 0.2, 0.15]);
        let d_pq = profile_distance(&p, &q).unwrap()[&7];
        let d_qp = profile_distance(&q, &p).unwrap()[&7];
        assert_eq!(d_pq, d_qp);
        let d_pr = profile_distance(&p, &r).unwrap()[&7];
        let d_rq = profile_distance(&r, &q).unwrap()[&7];
        assert!(d_pq <= d_pr + d_rq + 1e-12);
    }

    #[test]
    fn extraction_recovers_runs() {
        let labels: Vec<usize> =
            std::iter::repeat(4).take(10).chain(std::iter::repeat(9).take(15)).chain(std::iter::repeat(2).take(5)).collect();
        let p = Posteriorgram::from_labels(&labels).unwrap();
        let segs = converted_duration_extraction(&p, 0.010);
        assert_eq!(segs.len(), 3);
        assert_eq!(segs[0].phoneme_id, 4);
        assert!((segs[0].duration() - 0.10).abs() < 1e-12);
        assert!((segs[1].duration() - 0.15).abs() < 1e-12);
        assert!((segs[2].duration() - 0.05).abs() < 1e-12);
    }

    #[test]
    fn constant_posteriorgram_is_one_segment() {
        let p = Posteriorgram::from_labels(&[6; 40]).unwrap();
        let segs = converted_duration_extraction(&p, 0.0125);
        assert_eq!(segs.len(), 1);
        assert!((segs[0].duration() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn extraction_round_trips_frame_labels() {
        use crate::corpus::{frame_labels, UtteranceRecord};
        let segs = vec![seg(3, 0.0, 0.10), seg(5, 0.10, 0.22), seg(3, 0.22, 0.30)];
        let u = UtteranceRecord {
            utterance_id: "u".into(),
            speaker_id: "s".into(),
            audio: std::path::PathBuf::from("x.wav"),
            segments: segs.clone(),
        };
        let hop = 0.01;
        let labels = frame_labels(&u, hop, 29, 0).unwrap();
        let p = Posteriorgram::from_labels(&labels.labels).unwrap();
        let got = converted_duration_extraction(&p, hop);
        assert_eq!(got.len(), segs.len());
        for (a, b) in got.iter().zip(segs.iter()) {
            assert_eq!(a.phoneme_id, b.phoneme_id);
            assert!((a.duration() - b.duration()).abs() <= hop + 1e-12);
        }
    }
}
