//! Frame-label expansion of timed alignments.

use super::{CorpusError, UtteranceRecord};

/// Per-frame phoneme indices at a fixed hop.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameLabelSequence {
    pub labels: Vec<usize>,
    pub hop_seconds: f64,
}

/// Expands an alignment into `n_frames` per-frame labels.
///
/// Frame `t` gets the phoneme whose segment contains the frame-center time
/// `(t + 0.5) * hop`; segments are half-open `[start, end)`, so a boundary
/// exactly at a frame center assigns the later segment. Centers falling in
/// an inter-segment gap (or before the first segment) get `silence_id`.
pub fn frame_labels(
    u: &UtteranceRecord,
    hop_seconds: f64,
    n_frames: usize,
    silence_id: usize,
) -> Result<FrameLabelSequence, CorpusError> {
    u.validate()?;
    let last_end = u.total_span();
    let mut labels = Vec::with_capacity(n_frames);
    // Segments are sorted; sweep once.
    let mut seg = 0usize;
    for t in 0..n_frames {
        let center = (t as f64 + 0.5) * hop_seconds;
        if center >= last_end {
            return Err(CorpusError::AlignmentTooShort {
                utterance: u.utterance_id.clone(),
                center,
                end: last_end,
            });
        }
        while seg < u.segments.len() && center >= u.segments[seg].end {
            seg += 1;
        }
        let s = &u.segments[seg];
        labels.push(if center >= s.start { s.phoneme_id } else { silence_id });
    }
    Ok(FrameLabelSequence { labels, hop_seconds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::AlignmentSegment;
    use std::path::PathBuf;

    fn record(segments: Vec<AlignmentSegment>) -> UtteranceRecord {
        UtteranceRecord {
            utterance_id: "u0".into(),
            speaker_id: "s0".into(),
            audio: PathBuf::from("unused.wav"),
            segments,
        }
    }

    #[test]
    fn single_segment_fills_all_frames() {
        let u = record(vec![AlignmentSegment { phoneme_id: 7, start: 0.0, end: 1.0 }]);
        let l = frame_labels(&u, 0.010, 100, 0).unwrap();
        assert_eq!(l.labels, vec![7; 100]);
    }

    #[test]
    fn three_segments_counted_by_enumerating_centers() {
        let segs = vec![
            AlignmentSegment { phoneme_id: 1, start: 0.0, end: 0.10 },
            AlignmentSegment { phoneme_id: 2, start: 0.10, end: 0.25 },
            AlignmentSegment { phoneme_id: 3, start: 0.25, end: 0.30 },
        ];
        let u = record(segs.clone());
        let l = frame_labels(&u, 0.010, 30, 0).unwrap();

        // Oracle: enumerate all 30 frame centers and assign directly.
        let mut expected = Vec::new();
        for t in 0..30 {
            let c = (t as f64 + 0.5) * 0.010;
            let id = segs.iter().find(|s| c >= s.start && c < s.end).unwrap().phoneme_id;
            expected.push(id);
        }
        assert_eq!(l.labels, expected);
        let count = |id: usize| l.labels.iter().filter(|&&x| x == id).count();
        assert_eq!((count(1), count(2), count(3)), (10, 15, 5));
    }

    #[test]
    fn boundary_on_center_goes_to_later_segment() {
        // hop 0.1: center of frame 0 is 0.05, exactly the boundary.
        let segs = vec![
            AlignmentSegment { phoneme_id: 4, start: 0.0, end: 0.05 },
            AlignmentSegment { phoneme_id: 5, start: 0.05, end: 0.30 },
        ];
        let l = frame_labels(&record(segs), 0.1, 2, 0).unwrap();
        assert_eq!(l.labels, vec![5, 5]);
    }

    #[test]
    fn gaps_are_silence() {
        let segs = vec![
            AlignmentSegment { phoneme_id: 4, start: 0.0, end: 0.10 },
            AlignmentSegment { phoneme_id: 5, start: 0.20, end: 0.30 },
        ];
        let l = frame_labels(&record(segs), 0.1, 3, 9).unwrap();
        assert_eq!(l.labels, vec![4, 9, 5]);
    }

    #[test]
    fn center_beyond_alignment_errors() {
        let segs = vec![AlignmentSegment { phoneme_id: 4, start: 0.0, end: 0.10 }];
        let err = frame_labels(&record(segs), 0.1, 2, 0).unwrap_err();
        assert!(err.to_string().contains("alignment shorter than audio"));
    }

    #[test]
    fn label_count_always_matches_n_frames() {
        let segs = vec![AlignmentSegment { phoneme_id: 1, start: 0.0, end: 2.0 }];
        for hop in [0.005, 0.0125, 0.02] {
            let l = frame_labels(&record(segs.clone()), hop, 50, 0).unwrap();
            assert_eq!(l.labels.len(), 50);
        }
    }
}
